#include "mddm/pbc.hpp"

#include "mddm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>

namespace mddm {

PeriodicBox::PeriodicBox(std::vector<double> lengths) : lengths_(std::move(lengths)) {
  if (lengths_.empty()) throw InvalidArgument("PeriodicBox: need at least one dimension");
  for (double l : lengths_) {
    if (!std::isfinite(l) || l <= 0.0) {
      throw InvalidArgument("PeriodicBox: box lengths must be finite and > 0");
    }
  }
}

PeriodicBox PeriodicBox::cubic(double side, std::size_t dims) {
  return PeriodicBox(std::vector<double>(dims, side));
}

double PeriodicBox::min_length() const noexcept {
  return *std::min_element(lengths_.begin(), lengths_.end());
}

double PeriodicBox::volume() const noexcept {
  return std::accumulate(lengths_.begin(), lengths_.end(), 1.0, std::multiplies<>());
}

bool PeriodicBox::is_cubic() const noexcept {
  return std::all_of(lengths_.begin(), lengths_.end(),
                     [&](double l) { return l == lengths_.front(); });
}

bool PeriodicBox::contains(std::span<const double> p) const {
  if (p.size() != dims()) return false;
  for (std::size_t d = 0; d < p.size(); ++d) {
    if (!(p[d] >= 0.0 && p[d] < lengths_[d])) return false;
  }
  return true;
}

double wrap_coordinate(double x, double length) {
  if (!std::isfinite(x)) throw InvalidInput("wrap_within: non-finite coordinate");
  double r = std::fmod(x, length);
  if (r < 0.0) r += length;
  // -tiny + L rounds to L.
  if (r >= length) r = 0.0;
  return r;
}

void wrap_in_place(Points& points, const PeriodicBox& box) {
  if (static_cast<std::size_t>(points.cols()) != box.dims()) {
    throw InvalidArgument("wrap_within: point dimension does not match box");
  }
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
      points(i, d) = wrap_coordinate(points(i, d), box.length(static_cast<std::size_t>(d)));
    }
  }
}

Points wrap_within(const Points& points, const PeriodicBox& box) {
  Points out = points;
  wrap_in_place(out, box);
  return out;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const PeriodicBox& box) {
  if (a.size() != box.dims() || b.size() != box.dims()) {
    throw InvalidArgument("min_image: vector dimension does not match box");
  }
  if (!box.contains(a) || !box.contains(b)) {
    throw InvalidInput("min_image: inputs must be wrapped within the box");
  }
}

}  // namespace

Vec min_image(std::span<const double> a, std::span<const double> b, const PeriodicBox& box) {
  check_pair(a, b, box);
  Vec dr(static_cast<Eigen::Index>(box.dims()));
  for (std::size_t d = 0; d < box.dims(); ++d) {
    dr[static_cast<Eigen::Index>(d)] = min_image_component(a[d], b[d], box.length(d));
  }
  return dr;
}

double pbc_distance(std::span<const double> a, std::span<const double> b, const PeriodicBox& box) {
  return min_image(a, b, box).norm();
}

void require_wrapped(const Points& points, const PeriodicBox& box) {
  if (static_cast<std::size_t>(points.cols()) != box.dims()) {
    throw InvalidArgument("point dimension " + std::to_string(points.cols()) +
                          " does not match box dimension " + std::to_string(box.dims()));
  }
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index d = 0; d < points.cols(); ++d) {
      const double x = points(i, d);
      if (!(x >= 0.0 && x < box.length(static_cast<std::size_t>(d)))) {
        throw InvalidInput("coordinate of particle " + std::to_string(i) +
                           " is not wrapped within the box");
      }
    }
  }
}

namespace {

struct Candidate {
  double dist2;
  std::size_t index;
  bool operator<(const Candidate& o) const {
    return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
  }
};

double periodic_dist2(const Points& points, std::size_t i, std::size_t j, const PeriodicBox& box) {
  double s = 0.0;
  for (std::size_t d = 0; d < box.dims(); ++d) {
    const auto di = static_cast<Eigen::Index>(d);
    const double dr = min_image_component(points(static_cast<Eigen::Index>(i), di),
                                          points(static_cast<Eigen::Index>(j), di),
                                          box.length(d));
    s += dr * dr;
  }
  return s;
}

void fill_edges(NeighborGraph& g, std::size_t i, std::span<const Candidate> best,
                const Points& points, const PeriodicBox& box) {
  for (std::size_t m = 0; m < g.k; ++m) {
    const std::size_t e = i * g.k + m;
    const std::size_t j = best[m].index;
    g.src[e] = i;
    g.dst[e] = j;
    for (std::size_t d = 0; d < box.dims(); ++d) {
      const auto di = static_cast<Eigen::Index>(d);
      g.displacement(static_cast<Eigen::Index>(e), di) =
          min_image_component(points(static_cast<Eigen::Index>(i), di),
                              points(static_cast<Eigen::Index>(j), di), box.length(d));
    }
  }
}

void knn_all_pairs(const Points& points, const PeriodicBox& box, NeighborGraph& g) {
  const std::size_t n = g.n_nodes;
  std::vector<Candidate> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      cand[c++] = {periodic_dist2(points, i, j, box), j};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(g.k), cand.end());
    fill_edges(g, i, std::span<const Candidate>(cand.data(), g.k), points, box);
  }
}

// Grow the searched cell shell until the k-th candidate is provably inside the
// covered region, then the result matches the all-pairs search exactly.
void knn_cells(const Points& points, const PeriodicBox& box, NeighborGraph& g) {
  const std::size_t n = g.n_nodes;
  const double density = static_cast<double>(n) / box.volume();
  // Cell side sized so a cell holds roughly k/8 particles.
  const double side = std::cbrt(std::max(1.0, static_cast<double>(g.k) / 8.0) / density);
  const CellList cells(points, box, side);
  double cell_side = box.length(0) / static_cast<double>(cells.n_cells()[0]);
  long max_reach = 0;
  for (std::size_t d = 0; d < 3; ++d) {
    cell_side = std::min(cell_side, box.length(d) / static_cast<double>(cells.n_cells()[d]));
    max_reach = std::max(max_reach, static_cast<long>(cells.n_cells()[d] / 2));
  }

  std::vector<Candidate> cand;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t home = cells.cell_of(i);
    for (long reach = 1;; ++reach) {
      cand.clear();
      const bool covers_all = reach >= max_reach;
      for (std::size_t c : cells.neighborhood(home, covers_all ? max_reach + 1 : reach)) {
        for (std::size_t j : cells.members(c)) {
          if (j != i) cand.push_back({periodic_dist2(points, i, j, box), j});
        }
      }
      if (cand.size() < g.k && !covers_all) continue;
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(g.k), cand.end());
      // A particle outside the shell is at least reach*cell_side away.
      const double covered = static_cast<double>(reach) * cell_side;
      if (covers_all || cand[g.k - 1].dist2 < covered * covered) break;
    }
    fill_edges(g, i, std::span<const Candidate>(cand.data(), g.k), points, box);
  }
}

}  // namespace

NeighborGraph knn_graph(const Points& points, std::size_t k, const PeriodicBox& box,
                        KnnMethod method) {
  require_wrapped(points, box);
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw InvalidArgument("knn_graph: k must be positive");
  if (k >= n) {
    throw InvalidArgument("knn_graph: k = " + std::to_string(k) +
                          " must be smaller than the particle count " + std::to_string(n));
  }
  NeighborGraph g;
  g.n_nodes = n;
  g.k = k;
  g.src.resize(n * k);
  g.dst.resize(n * k);
  g.displacement.resize(static_cast<Eigen::Index>(n * k), static_cast<Eigen::Index>(box.dims()));
  if (method == KnnMethod::kCellList && box.dims() == 3) {
    knn_cells(points, box, g);
  } else {
    knn_all_pairs(points, box, g);
  }
  return g;
}

CellList::CellList(const Points& points, const PeriodicBox& box, double min_cell_size) {
  if (box.dims() != 3) throw InvalidArgument("CellList: only 3-D boxes are supported");
  if (!(min_cell_size > 0.0)) throw InvalidArgument("CellList: cell size must be positive");
  n_cells_.resize(3);
  for (std::size_t d = 0; d < 3; ++d) {
    n_cells_[d] = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(box.length(d) / min_cell_size)));
  }
  const std::size_t total = n_cells_[0] * n_cells_[1] * n_cells_[2];
  const auto n = static_cast<std::size_t>(points.rows());
  particle_cell_.resize(n);
  std::vector<std::size_t> counts(total, 0);
  for (std::size_t i = 0; i < n; ++i) {
    long c[3];
    for (std::size_t d = 0; d < 3; ++d) {
      const double frac = points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) /
                          box.length(d);
      c[d] = std::min(static_cast<long>(n_cells_[d]) - 1,
                      static_cast<long>(frac * static_cast<double>(n_cells_[d])));
    }
    particle_cell_[i] = cell_index(c[0], c[1], c[2]);
    ++counts[particle_cell_[i]];
  }
  cell_start_.assign(total + 1, 0);
  for (std::size_t c = 0; c < total; ++c) cell_start_[c + 1] = cell_start_[c] + counts[c];
  order_.resize(n);
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) order_[fill[particle_cell_[i]]++] = i;
}

std::size_t CellList::cell_index(long cx, long cy, long cz) const {
  auto mod = [](long v, std::size_t m) {
    const long ml = static_cast<long>(m);
    return static_cast<std::size_t>(((v % ml) + ml) % ml);
  };
  return mod(cx, n_cells_[0]) + n_cells_[0] * (mod(cy, n_cells_[1]) + n_cells_[1] * mod(cz, n_cells_[2]));
}

void CellList::cell_coords(std::size_t cell, long& cx, long& cy, long& cz) const {
  cx = static_cast<long>(cell % n_cells_[0]);
  cy = static_cast<long>((cell / n_cells_[0]) % n_cells_[1]);
  cz = static_cast<long>(cell / (n_cells_[0] * n_cells_[1]));
}

std::vector<std::size_t> CellList::neighborhood(std::size_t cell, long reach) const {
  long cx, cy, cz;
  cell_coords(cell, cx, cy, cz);
  std::set<std::size_t> out;
  auto span_for = [&](std::size_t d) {
    return std::min(reach, static_cast<long>(n_cells_[d]));
  };
  const long rx = span_for(0), ry = span_for(1), rz = span_for(2);
  for (long dz = -rz; dz <= rz; ++dz) {
    for (long dy = -ry; dy <= ry; ++dy) {
      for (long dx = -rx; dx <= rx; ++dx) {
        out.insert(cell_index(cx + dx, cy + dy, cz + dz));
      }
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace mddm
