#include "mddm/potential.hpp"

#include "mddm/errors.hpp"

#include <cmath>

namespace mddm {

namespace {

void require_positive(double r) {
  if (!(r > 0.0)) throw DomainError("OPP: separation must be > 0");
}

}  // namespace

double opp_energy(double r, const OPPParams& p) {
  require_positive(r);
  const double inv3 = 1.0 / (r * r * r);
  const double inv15 = inv3 * inv3 * inv3 * inv3 * inv3;
  return inv15 + inv3 * std::cos(p.k * (r - 1.25) - p.phi);
}

double opp_force(double r, const OPPParams& p) {
  require_positive(r);
  const double inv = 1.0 / r;
  const double inv3 = inv * inv * inv;
  const double inv4 = inv3 * inv;
  const double inv15 = inv3 * inv3 * inv3 * inv3 * inv3;
  const double arg = p.k * (r - 1.25) - p.phi;
  return 15.0 * inv15 * inv + 3.0 * inv4 * std::cos(arg) + p.k * inv3 * std::sin(arg);
}

PotentialTable tabulate(const OPPParams& p, double r_min, double r_max, std::size_t n_points) {
  if (!(r_min > 0.0) || !(r_max > r_min) || !std::isfinite(r_max)) {
    throw InvalidArgument("tabulate: need 0 < r_min < r_max");
  }
  if (n_points < 2) throw InvalidArgument("tabulate: need at least 2 points");
  PotentialTable t;
  t.params = p;
  t.rows.reserve(n_points);
  const double dr = (r_max - r_min) / static_cast<double>(n_points - 1);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double r = (i + 1 == n_points) ? r_max : r_min + static_cast<double>(i) * dr;
    t.rows.push_back({i + 1, r, opp_energy(r, p), opp_force(r, p)});
  }
  return t;
}

void interpolate_table(const PotentialTable& table, double r, double& energy, double& force) {
  const auto& rows = table.rows;
  if (rows.size() < 2) throw InvalidArgument("interpolate_table: table too short");
  const double r0 = rows.front().r;
  const double r1 = rows.back().r;
  if (!(r >= r0 && r <= r1)) throw DomainError("interpolate_table: r outside table range");
  const double dr = (r1 - r0) / static_cast<double>(rows.size() - 1);
  auto i = static_cast<std::size_t>((r - r0) / dr);
  if (i >= rows.size() - 1) i = rows.size() - 2;
  const double frac = (r - rows[i].r) / (rows[i + 1].r - rows[i].r);
  energy = rows[i].energy + frac * (rows[i + 1].energy - rows[i].energy);
  force = rows[i].force + frac * (rows[i + 1].force - rows[i].force);
}

}  // namespace mddm
