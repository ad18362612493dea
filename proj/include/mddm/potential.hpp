#pragma once

#include <cstddef>
#include <vector>

namespace mddm {

// Oscillating pair potential U(r) = r^-15 + r^-3 cos(k (r - 1.25) - phi).
struct OPPParams {
  double k = 1.0;
  double phi = 0.0;
};

// Parameter ranges covered by the reference dataset sweep.
struct OPPRanges {
  static constexpr double kMin = 1.0, kMax = 15.0;
  static constexpr double phiMin = 0.0, phiMax = 6.0;
  static constexpr double tempMin = 0.01, tempMax = 0.05;
};

double opp_energy(double r, const OPPParams& p);

// Scalar force magnitude -dU/dr.
double opp_force(double r, const OPPParams& p);

struct TableRow {
  std::size_t index;  // 1-based, LAMMPS convention
  double r;
  double energy;
  double force;
};

struct PotentialTable {
  OPPParams params;
  std::vector<TableRow> rows;
};

inline constexpr double kDefaultTableRMin = 0.75;
inline constexpr double kDefaultTableRMax = 5.0;
inline constexpr std::size_t kDefaultTablePoints = 1000;

PotentialTable tabulate(const OPPParams& p, double r_min = kDefaultTableRMin,
                        double r_max = kDefaultTableRMax,
                        std::size_t n_points = kDefaultTablePoints);

// Linear interpolation in a uniformly spaced table; r must lie inside the table range.
void interpolate_table(const PotentialTable& table, double r, double& energy, double& force);

}  // namespace mddm
