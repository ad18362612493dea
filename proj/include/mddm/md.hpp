#pragma once

#include "mddm/conformation.hpp"
#include "mddm/pbc.hpp"
#include "mddm/potential.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mddm {

// How the pair interaction is made continuous at the cutoff.
enum class CutoffShift : std::uint8_t {
  kEnergy = 0,  // U(r) - U(rc); force jumps at rc
  kForce = 1,   // U(r) - U(rc) + (r - rc) F(rc); energy and force both vanish at rc
};

enum class PairSearch : std::uint8_t { kAuto = 0, kNaive = 1, kCellList = 2 };

/**
 * OPP interaction truncated at a cutoff. Evaluated analytically, or by linear
 * interpolation in a table (parity mode for emitted LAMMPS tables).
 */
class PairForceField {
 public:
  PairForceField(const OPPParams& params, double cutoff, CutoffShift shift = CutoffShift::kEnergy,
                 double overlap_floor = 0.5);

  // Switches to interpolation in `table`, which must reach the cutoff. Distances
  // below the first row raise OverlapError.
  void use_table(PotentialTable table);

  const OPPParams& params() const noexcept { return params_; }
  double cutoff() const noexcept { return cutoff_; }
  double overlap_floor() const noexcept { return floor_; }
  CutoffShift shift() const noexcept { return shift_; }
  bool tabulated() const noexcept { return table_.has_value(); }

  // Shifted energy and scalar force -dU/dr at r < cutoff. Throws OverlapError below the floor.
  void evaluate(double r, double& energy, double& force) const;

 private:
  void raw(double r, double& energy, double& force) const;

  OPPParams params_;
  double cutoff_;
  CutoffShift shift_;
  double floor_;
  std::optional<PotentialTable> table_;
  double u_cut_ = 0.0;
  double f_cut_ = 0.0;
};

/**
 * Sums pair forces into `forces` (resized to N x 3) and returns the potential
 * energy. Pairs are accumulated in (i, j > i) order for every search mode, so
 * the cell-list and naive paths give bit-identical results. kAuto picks cells
 * when every box side holds at least three cutoff-sized cells.
 */
double compute_forces(const Points& positions, const PeriodicBox& box, const PairForceField& ff,
                      Points& forces, PairSearch search = PairSearch::kAuto);

struct MDConfig {
  std::size_t n_particles = 216;
  double number_density = 1.0;
  double dt = 0.005;
  std::size_t anneal_steps = 20000;
  std::size_t equil_steps = 20000;
  double temperature = 0.03;  // target, LJ units
  double start_factor = 10.0;
  double cutoff = 3.0;
  CutoffShift shift = CutoffShift::kEnergy;
  double friction = 1.0;  // Langevin damping rate, 1/time
  bool thermostat = true;
  double lattice_noise = 0.1;
  std::size_t log_every = 100;
  PairSearch search = PairSearch::kAuto;
  std::uint64_t seed = 12345;

  double box_length() const;
  PeriodicBox box() const { return PeriodicBox::cubic(box_length()); }
  // Throws InvalidArgument on non-positive values or cutoff > L/2.
  void validate() const;
};

struct MDState {
  Points positions;
  Points velocities;
  Points forces;
  PeriodicBox box = PeriodicBox::cubic(1.0);
  double potential_energy = 0.0;
  double kinetic_energy = 0.0;
  std::size_t step_index = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(positions.rows()); }
  double total_energy() const noexcept { return potential_energy + kinetic_energy; }
  // 2 KE / (3N - 3): centre-of-mass motion is removed at initialisation.
  double temperature() const;
};

double kinetic_energy(const Points& velocities);

/**
 * Simple-cubic lattice of side m = ceil(cbrt(N)) filled in index order
 * (exact for perfect cubes), each coordinate jittered by U(-noise, noise),
 * Gaussian velocities with zero net momentum rescaled to start_factor * T.
 * Forces and energies are evaluated for the returned state.
 */
MDState init_state(const MDConfig& config, const PairForceField& ff, std::mt19937_64& rng);

// One velocity-Verlet step of size dt; positions re-wrapped.
void step_nve(MDState& state, const PairForceField& ff, double dt,
              PairSearch search = PairSearch::kAuto);

// Velocity-Verlet step followed by an exact Ornstein-Uhlenbeck velocity update at `temperature`.
void step_langevin(MDState& state, const PairForceField& ff, double dt, double temperature,
                   double friction, std::mt19937_64& rng, PairSearch search = PairSearch::kAuto);

struct ThermoRow {
  std::size_t step;
  double temperature;
  double potential_energy;
  double kinetic_energy;
  double total_energy() const noexcept { return potential_energy + kinetic_energy; }
};

struct AnnealResult {
  Conformation final;
  std::vector<ThermoRow> log;
  bool aborted = false;
  std::string reason;
};

/**
 * Langevin-thermostatted run: target temperature ramps linearly from
 * start_factor * T to T over anneal_steps, then holds for equil_steps.
 * Thermo rows are logged every log_every steps (and at step 0). On an overlap
 * or non-finite energy the run stops and returns the partial log with
 * aborted = true.
 */
AnnealResult run_anneal(const MDConfig& config, const OPPParams& potential);

}  // namespace mddm
