#pragma once

#include "mddm/conformation.hpp"
#include "mddm/pbc.hpp"

#include <cstdint>
#include <vector>

namespace mddm {

inline constexpr std::size_t kDefaultRdfBins = 100;

/**
 * Binned radial distribution function g(r) on [0, r_max).
 *
 * Bin b covers [b*width, (b+1)*width) with width = r_max / n_bins; values are
 * ideal-gas normalized so uniformly random points give g ~ 1.
 */
struct RDFVector {
  std::vector<double> values;
  std::vector<std::uint64_t> pair_counts;
  double r_max = 0.0;

  std::size_t n_bins() const noexcept { return values.size(); }
  double bin_width() const { return r_max / static_cast<double>(values.size()); }
  double bin_center(std::size_t b) const { return (static_cast<double>(b) + 0.5) * bin_width(); }
};

// Pairs at periodic distance >= r_max (half the smallest box side) are not counted.
RDFVector compute_rdf(const Points& coords, const PeriodicBox& box,
                      std::size_t n_bins = kDefaultRdfBins);
RDFVector compute_rdf(const Conformation& conf, std::size_t n_bins = kDefaultRdfBins);

// Mean over bins of squared g difference; throws InvalidArgument on mismatched binning.
double rdf_mse(const RDFVector& a, const RDFVector& b);

// Bin of the maximum of the first excursion of g above 1; n_bins() if g never reaches 1.
std::size_t first_peak_bin(const RDFVector& rdf);

}  // namespace mddm
