#include "mddm/rdf.hpp"

#include "mddm/errors.hpp"

#include <cmath>
#include <numbers>

namespace mddm {

RDFVector compute_rdf(const Points& coords, const PeriodicBox& box, std::size_t n_bins) {
  if (box.dims() != 3) throw InvalidArgument("compute_rdf: requires a 3-D box");
  if (n_bins == 0) throw InvalidArgument("compute_rdf: need at least one bin");
  const auto n = static_cast<std::size_t>(coords.rows());
  if (n < 2) throw InvalidInput("compute_rdf: need at least 2 particles");
  require_wrapped(coords, box);

  RDFVector rdf;
  rdf.r_max = 0.5 * box.min_length();
  rdf.values.assign(n_bins, 0.0);
  rdf.pair_counts.assign(n_bins, 0);
  const double width = rdf.r_max / static_cast<double>(n_bins);
  const double r_max2 = rdf.r_max * rdf.r_max;
  const double lx = box.length(0), ly = box.length(1), lz = box.length(2);

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double dx = min_image_component(coords(ii, 0), coords(jj, 0), lx);
      const double dy = min_image_component(coords(ii, 1), coords(jj, 1), ly);
      const double dz = min_image_component(coords(ii, 2), coords(jj, 2), lz);
      const double r2 = dx * dx + dy * dy + dz * dz;
      if (r2 >= r_max2) continue;
      auto b = static_cast<std::size_t>(std::sqrt(r2) / width);
      if (b >= n_bins) continue;
      ++rdf.pair_counts[b];
    }
  }

  const double n_pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double volume = box.volume();
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double lo = static_cast<double>(b) * width;
    const double hi = static_cast<double>(b + 1) * width;
    const double shell = 4.0 / 3.0 * std::numbers::pi * (hi * hi * hi - lo * lo * lo);
    const double expected = n_pairs * shell / volume;
    rdf.values[b] = static_cast<double>(rdf.pair_counts[b]) / expected;
  }
  return rdf;
}

RDFVector compute_rdf(const Conformation& conf, std::size_t n_bins) {
  return compute_rdf(conf.coords, conf.box, n_bins);
}

double rdf_mse(const RDFVector& a, const RDFVector& b) {
  if (a.n_bins() != b.n_bins() || a.n_bins() == 0) {
    throw InvalidArgument("rdf_mse: bin counts differ");
  }
  if (std::abs(a.r_max - b.r_max) > 1e-9 * std::max(a.r_max, b.r_max)) {
    throw InvalidArgument("rdf_mse: r_max differs");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.n_bins(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return s / static_cast<double>(a.n_bins());
}

std::size_t first_peak_bin(const RDFVector& rdf) {
  const std::size_t n = rdf.n_bins();
  std::size_t b = 0;
  while (b < n && rdf.values[b] < 1.0) ++b;
  if (b == n) return n;
  std::size_t best = b;
  for (; b < n && rdf.values[b] >= 1.0; ++b) {
    if (rdf.values[b] > rdf.values[best]) best = b;
  }
  return best;
}

}  // namespace mddm
