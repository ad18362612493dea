#pragma once

#include "mddm/conformation.hpp"
#include "mddm/denoiser.hpp"
#include "mddm/pbc.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mddm {

using Rng = std::mt19937_64;

/**
 * Cosine noise schedule evaluated at reversed index so that alpha(t) grows
 * with t: alpha(t) = cos^2(pi/2 * (((T - t)/(T + 1) + s) / (1 + s))), clamped
 * to [1e-8, 1]. alpha(t) is the variance of the accumulated noise at step t in
 * unit-box coordinates.
 */
struct DiffusionSchedule {
  std::size_t steps = 500;
  double offset = 0.008;
  std::vector<double> alpha;  // size steps + 1

  double at(std::size_t t) const { return alpha.at(t); }
};

DiffusionSchedule build_schedule(std::size_t steps = 500, double offset = 0.008);

struct NoisedSample {
  Points x_t;  // wrapped into [0, 1)^3
  Points eps;  // standard normal draw
};

// x_t = wrap(x0 + sqrt(alpha(t)) * eps) in the unit box.
NoisedSample forward_noise(const Points& x0, std::size_t t, const DiffusionSchedule& schedule,
                           Rng& rng);

// (alpha(t-1)/alpha(t) - 1) * sqrt(alpha(t)) * eps_hat + x_t, not wrapped.
Points posterior_mean(const Points& x_t, const Points& eps_hat, std::size_t t,
                      const DiffusionSchedule& schedule);

// alpha(t-1) / (2 alpha(t)) * (alpha(t) - alpha(t-1)).
double posterior_var(std::size_t t, const DiffusionSchedule& schedule);

struct TrainConfig {
  std::size_t epochs = 800;
  double learning_rate = 0.005;
  double lr_decay = 0.95;
  std::size_t lr_decay_every = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  double learning_rate_at(std::size_t epoch) const;
};

// Adaptive-moment optimizer over a flat parameter vector.
template <class S>
class Adam {
 public:
  Adam(std::size_t n, double beta1, double beta2, double eps);

  void step(std::vector<S>& params, const std::vector<S>& grads, double learning_rate);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  std::vector<S> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double learning_rate = 0.0;
};

struct TrainResult {
  DenoiserParams<float> params;
  std::vector<double> loss_history;  // one mean loss per completed epoch
  bool diverged = false;
  std::string diagnostic;
};

using EpochCallback = std::function<void(const EpochReport&, const DenoiserParams<float>&)>;

/**
 * Trains the denoiser on physical-unit conformations. Each epoch visits every
 * conformation once in a shuffled order and takes one optimizer step per
 * visit. Conditions are fed to the network only when dconfig is conditional.
 * A non-finite loss stops training and returns the last finite parameters
 * with diverged = true.
 */
TrainResult train(const std::vector<Conformation>& dataset, const TrainConfig& config,
                  const DenoiserConfig& dconfig, const DiffusionSchedule& schedule,
                  const EpochCallback& on_epoch = {},
                  std::optional<DenoiserParams<float>> initial = std::nullopt);

// Called with (t, x_t in physical box coordinates) after each reverse step, and once for t = T.
using TraceCallback = std::function<void(std::size_t, const Points&)>;

/**
 * Reverse process: x_T ~ U[0,1)^3, then for t = T..1
 * x_{t-1} = wrap(posterior_mean(x_t, eps_hat) + sqrt(posterior_var(t)) z),
 * z = 0 at t = 1. Returns x_0 in the physical box.
 */
template <class S>
Conformation sample(const std::optional<Condition>& condition, const DenoiserParams<S>& params,
                    const DiffusionSchedule& schedule, const PeriodicBox& box,
                    std::size_t n_particles, Rng& rng, const TraceCallback& trace = {});

}  // namespace mddm
