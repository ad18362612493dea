#include "mddm/md.hpp"

#include "mddm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mddm {

PairForceField::PairForceField(const OPPParams& params, double cutoff, CutoffShift shift,
                               double overlap_floor)
    : params_(params), cutoff_(cutoff), shift_(shift), floor_(overlap_floor) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) throw InvalidArgument("cutoff must be positive");
  if (!(overlap_floor > 0.0) || overlap_floor >= cutoff) {
    throw InvalidArgument("overlap floor must lie in (0, cutoff)");
  }
  raw(cutoff_, u_cut_, f_cut_);
}

void PairForceField::use_table(PotentialTable table) {
  if (table.rows.size() < 2) throw InvalidArgument("use_table: table too short");
  if (table.rows.back().r < cutoff_) throw InvalidArgument("use_table: table ends before the cutoff");
  table_ = std::move(table);
  raw(cutoff_, u_cut_, f_cut_);
}

void PairForceField::raw(double r, double& energy, double& force) const {
  if (table_) {
    if (r < table_->rows.front().r) {
      throw OverlapError("pair distance " + std::to_string(r) + " below the table range");
    }
    interpolate_table(*table_, r, energy, force);
  } else {
    energy = opp_energy(r, params_);
    force = opp_force(r, params_);
  }
}

void PairForceField::evaluate(double r, double& energy, double& force) const {
  if (r < floor_) throw OverlapError("pair distance " + std::to_string(r) + " below overlap floor");
  raw(r, energy, force);
  energy -= u_cut_;
  if (shift_ == CutoffShift::kForce) {
    energy += (r - cutoff_) * f_cut_;
    force -= f_cut_;
  }
}

namespace {

struct PairAccumulator {
  const Points& x;
  const PairForceField& ff;
  Points& f;
  double lx, ly, lz, rc2;
  double energy = 0.0;

  // Adds pair (i, j) if inside the cutoff.
  void add(Eigen::Index i, Eigen::Index j) {
    const double dx = min_image_component(x(i, 0), x(j, 0), lx);
    const double dy = min_image_component(x(i, 1), x(j, 1), ly);
    const double dz = min_image_component(x(i, 2), x(j, 2), lz);
    const double r2 = dx * dx + dy * dy + dz * dz;
    if (r2 >= rc2) return;
    const double r = std::sqrt(r2);
    double u = 0.0, fr = 0.0;
    ff.evaluate(r, u, fr);
    energy += u;
    // (dx, dy, dz) points from i to j; a repulsive force pushes i away from j.
    const double s = fr / r;
    const double fx = s * dx, fy = s * dy, fz = s * dz;
    f(i, 0) -= fx;
    f(i, 1) -= fy;
    f(i, 2) -= fz;
    f(j, 0) += fx;
    f(j, 1) += fy;
    f(j, 2) += fz;
  }
};

}  // namespace

double compute_forces(const Points& positions, const PeriodicBox& box, const PairForceField& ff,
                      Points& forces, PairSearch search) {
  if (box.dims() != 3 || positions.cols() != 3) throw InvalidArgument("compute_forces: 3-D only");
  if (ff.cutoff() > 0.5 * box.min_length()) {
    throw InvalidArgument("compute_forces: cutoff exceeds half the box side");
  }
  const Eigen::Index n = positions.rows();
  forces.setZero(n, 3);
  PairAccumulator acc{positions, ff, forces, box.length(0), box.length(1), box.length(2),
                      ff.cutoff() * ff.cutoff()};

  bool use_cells = search == PairSearch::kCellList;
  if (search == PairSearch::kAuto) {
    use_cells = true;
    for (std::size_t d = 0; d < 3; ++d) use_cells &= box.length(d) / ff.cutoff() >= 3.0;
  }
  if (use_cells) {
    const CellList cells(positions, box, ff.cutoff());
    if (std::any_of(cells.n_cells().begin(), cells.n_cells().end(),
                    [](std::size_t c) { return c < 3; })) {
      use_cells = false;
    } else {
      std::vector<std::vector<std::size_t>> around(cells.total_cells());
      for (std::size_t c = 0; c < cells.total_cells(); ++c) around[c] = cells.neighborhood(c, 1);
      std::vector<std::size_t> partners;
      for (Eigen::Index i = 0; i < n; ++i) {
        partners.clear();
        for (std::size_t c : around[cells.cell_of(static_cast<std::size_t>(i))]) {
          for (std::size_t j : cells.members(c)) {
            if (j > static_cast<std::size_t>(i)) partners.push_back(j);
          }
        }
        // Same visiting order as the all-pairs loop, hence the same rounding.
        std::sort(partners.begin(), partners.end());
        for (std::size_t j : partners) acc.add(i, static_cast<Eigen::Index>(j));
      }
      return acc.energy;
    }
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) acc.add(i, j);
  }
  return acc.energy;
}

double MDConfig::box_length() const {
  if (!(number_density > 0.0)) throw InvalidArgument("number density must be positive");
  return std::cbrt(static_cast<double>(n_particles) / number_density);
}

void MDConfig::validate() const {
  if (n_particles < 2) throw InvalidArgument("MD needs at least two particles");
  if (!(number_density > 0.0) || !std::isfinite(number_density)) {
    throw InvalidArgument("number density must be positive");
  }
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be >= 0");
  if (!(temperature >= 0.0)) throw InvalidArgument("temperature must be >= 0");
  if (!(start_factor > 0.0)) throw InvalidArgument("start factor must be positive");
  if (!(friction >= 0.0)) throw InvalidArgument("friction must be >= 0");
  if (!(lattice_noise >= 0.0)) throw InvalidArgument("lattice noise must be >= 0");
  if (!(cutoff > 0.0)) throw InvalidArgument("cutoff must be positive");
  if (cutoff > 0.5 * box_length()) {
    throw InvalidArgument("cutoff " + std::to_string(cutoff) + " exceeds half the box side " +
                          std::to_string(0.5 * box_length()));
  }
  if (log_every == 0) throw InvalidArgument("log interval must be positive");
}

double kinetic_energy(const Points& velocities) { return 0.5 * velocities.squaredNorm(); }

double MDState::temperature() const {
  const std::size_t n = size();
  if (n < 2) return 0.0;
  return 2.0 * kinetic_energy / (3.0 * static_cast<double>(n - 1));
}

MDState init_state(const MDConfig& config, const PairForceField& ff, std::mt19937_64& rng) {
  config.validate();
  const std::size_t n = config.n_particles;
  std::size_t m = static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(n))));
  while (m * m * m < n) ++m;
  const double L = config.box_length();
  const double a = L / static_cast<double>(m);

  MDState s;
  s.box = PeriodicBox::cubic(L);
  const auto N = static_cast<Eigen::Index>(n);
  s.positions.resize(N, 3);
  std::uniform_real_distribution<double> jitter(-config.lattice_noise, config.lattice_noise);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t site[3] = {i % m, (i / m) % m, i / (m * m)};
    for (std::size_t d = 0; d < 3; ++d) {
      s.positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          static_cast<double>(site[d]) * a + (config.lattice_noise > 0 ? jitter(rng) : 0.0);
    }
  }
  wrap_in_place(s.positions, s.box);

  std::normal_distribution<double> normal;
  s.velocities.resize(N, 3);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index d = 0; d < 3; ++d) s.velocities(i, d) = normal(rng);
  }
  const Eigen::RowVector3d mean = s.velocities.colwise().mean();
  s.velocities.rowwise() -= mean;
  s.kinetic_energy = kinetic_energy(s.velocities);
  const double t_start = config.start_factor * config.temperature;
  const double t_now = s.temperature();
  if (t_now > 0.0) {
    s.velocities *= std::sqrt(t_start / t_now);
  }
  s.kinetic_energy = kinetic_energy(s.velocities);
  s.potential_energy = compute_forces(s.positions, s.box, ff, s.forces, config.search);
  return s;
}

void step_nve(MDState& state, const PairForceField& ff, double dt, PairSearch search) {
  if (dt != 0.0) {
    state.velocities += (0.5 * dt) * state.forces;
    state.positions += dt * state.velocities;
    wrap_in_place(state.positions, state.box);
    state.potential_energy = compute_forces(state.positions, state.box, ff, state.forces, search);
    state.velocities += (0.5 * dt) * state.forces;
    state.kinetic_energy = kinetic_energy(state.velocities);
  }
  ++state.step_index;
}

void step_langevin(MDState& state, const PairForceField& ff, double dt, double temperature,
                   double friction, std::mt19937_64& rng, PairSearch search) {
  step_nve(state, ff, dt, search);
  const double c1 = std::exp(-friction * dt);
  const double c2 = std::sqrt((1.0 - c1 * c1) * temperature);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < state.velocities.rows(); ++i) {
    for (Eigen::Index d = 0; d < 3; ++d) {
      state.velocities(i, d) = c1 * state.velocities(i, d) + c2 * normal(rng);
    }
  }
  state.kinetic_energy = kinetic_energy(state.velocities);
}

AnnealResult run_anneal(const MDConfig& config, const OPPParams& potential) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const PairForceField ff(potential, config.cutoff, config.shift);
  AnnealResult result;
  result.final.condition = Condition{potential.k, potential.phi, config.temperature};
  result.final.provenance = {Source::kReferenceMd, config.seed, 0};

  MDState state;
  try {
    state = init_state(config, ff, rng);
  } catch (const OverlapError& e) {
    result.aborted = true;
    result.reason = e.what();
    return result;
  }
  auto log_row = [&] {
    result.log.push_back({state.step_index, state.temperature(), state.potential_energy,
                          state.kinetic_energy});
  };
  log_row();

  const double t_hi = config.start_factor * config.temperature;
  const std::size_t total = config.anneal_steps + config.equil_steps;
  try {
    for (std::size_t s = 1; s <= total; ++s) {
      if (config.thermostat) {
        double target = config.temperature;
        if (s <= config.anneal_steps) {
          const double frac = static_cast<double>(s) / static_cast<double>(config.anneal_steps);
          target = t_hi + (config.temperature - t_hi) * frac;
        }
        step_langevin(state, ff, config.dt, target, config.friction, rng, config.search);
      } else {
        step_nve(state, ff, config.dt, config.search);
      }
      if (!std::isfinite(state.potential_energy) || !std::isfinite(state.kinetic_energy)) {
        throw OverlapError("non-finite energy at step " + std::to_string(s));
      }
      if (s % config.log_every == 0) log_row();
    }
  } catch (const OverlapError& e) {
    result.aborted = true;
    result.reason = e.what();
  }
  result.final.coords = state.positions;
  result.final.box = state.box;
  result.final.provenance.timestep = static_cast<std::int64_t>(state.step_index);
  return result;
}

}  // namespace mddm
