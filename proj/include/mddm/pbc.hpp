#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <vector>

namespace mddm {

// N x D coordinate block, one particle per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/**
 * Orthorhombic periodic box anchored at the origin.
 *
 * Coordinates live in [0, L_d) per dimension. Every length must be finite and
 * strictly positive; construction throws InvalidArgument otherwise.
 */
class PeriodicBox {
 public:
  explicit PeriodicBox(std::vector<double> lengths);

  static PeriodicBox cubic(double side, std::size_t dims = 3);

  std::size_t dims() const noexcept { return lengths_.size(); }
  double length(std::size_t d) const { return lengths_[d]; }
  const std::vector<double>& lengths() const noexcept { return lengths_; }

  double min_length() const noexcept;
  double volume() const noexcept;
  bool is_cubic() const noexcept;

  // True when every component of `p` lies in [0, L_d).
  bool contains(std::span<const double> p) const;

  bool operator==(const PeriodicBox&) const = default;

 private:
  std::vector<double> lengths_;
};

// True floating-point modulo into [0, length).
double wrap_coordinate(double x, double length);

// Shortest signed separation b - a along one periodic axis, for a, b in [0, length).
// An exact half-box separation resolves to +length/2.
inline double min_image_component(double a, double b, double length) {
  double dr = b - a;
  const double half = 0.5 * length;
  if (dr > half) {
    dr += -1.0 * length;
  } else if (dr <= -half) {
    dr += 1.0 * length;
  }
  return dr;
}

Points wrap_within(const Points& points, const PeriodicBox& box);

// Wrap in place; used on hot paths that own their coordinate buffer.
void wrap_in_place(Points& points, const PeriodicBox& box);

Vec min_image(std::span<const double> a, std::span<const double> b, const PeriodicBox& box);

double pbc_distance(std::span<const double> a, std::span<const double> b, const PeriodicBox& box);

// Throws InvalidInput unless every coordinate is finite and inside the box.
void require_wrapped(const Points& points, const PeriodicBox& box);

/**
 * Periodic k-nearest-neighbor graph.
 *
 * Edges are grouped by source: edges [i*k, (i+1)*k) all leave node i and are
 * ordered by increasing periodic distance (ties broken by lower destination
 * index). displacement row e is the minimum-image vector x_dst - x_src.
 */
struct NeighborGraph {
  std::size_t n_nodes = 0;
  std::size_t k = 0;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  Points displacement;

  std::size_t n_edges() const noexcept { return src.size(); }
};

enum class KnnMethod { kAllPairs, kCellList };

NeighborGraph knn_graph(const Points& points, std::size_t k, const PeriodicBox& box,
                        KnnMethod method = KnnMethod::kAllPairs);

/**
 * Binning of 3-D particles into cubic-ish cells of side >= min_cell_size.
 *
 * Cells are indexed (cx, cy, cz) -> cx + nx*(cy + ny*cz). Particles are stored
 * in cell order; within a cell they keep ascending particle index, so loops
 * over cells visit pairs in a reproducible order.
 */
class CellList {
 public:
  CellList(const Points& points, const PeriodicBox& box, double min_cell_size);

  const std::vector<std::size_t>& n_cells() const noexcept { return n_cells_; }
  std::size_t total_cells() const noexcept { return cell_start_.size() - 1; }
  std::size_t cell_of(std::size_t particle) const { return particle_cell_[particle]; }

  std::span<const std::size_t> members(std::size_t cell) const {
    return {order_.data() + cell_start_[cell], cell_start_[cell + 1] - cell_start_[cell]};
  }

  std::size_t cell_index(long cx, long cy, long cz) const;
  void cell_coords(std::size_t cell, long& cx, long& cy, long& cz) const;

  // Distinct cells whose Chebyshev cell distance from `cell` is <= reach,
  // accounting for periodic wrap (no cell is listed twice), in ascending index.
  std::vector<std::size_t> neighborhood(std::size_t cell, long reach) const;

 private:
  std::vector<std::size_t> n_cells_;
  std::vector<std::size_t> particle_cell_;
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

}  // namespace mddm
