#include "mddm/diffusion.hpp"

#include "mddm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mddm {

DiffusionSchedule build_schedule(std::size_t steps, double offset) {
  if (steps < 1) throw InvalidArgument("build_schedule: need at least one step");
  if (!(offset > 0.0)) throw InvalidArgument("build_schedule: offset must be > 0");
  DiffusionSchedule s;
  s.steps = steps;
  s.offset = offset;
  s.alpha.resize(steps + 1);
  const double denom = static_cast<double>(steps + 1);
  for (std::size_t t = 0; t <= steps; ++t) {
    const double x = static_cast<double>(steps - t) / denom;
    const double c = std::cos(0.5 * std::numbers::pi * (x + offset) / (1.0 + offset));
    s.alpha[t] = std::clamp(c * c, 1e-8, 1.0);
  }
  return s;
}

NoisedSample forward_noise(const Points& x0, std::size_t t, const DiffusionSchedule& schedule,
                           Rng& rng) {
  if (t < 1 || t > schedule.steps) throw InvalidArgument("forward_noise: t out of range");
  const PeriodicBox unit = PeriodicBox::cubic(1.0, static_cast<std::size_t>(x0.cols()));
  std::normal_distribution<double> normal;
  NoisedSample out;
  out.eps.resize(x0.rows(), x0.cols());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    for (Eigen::Index d = 0; d < x0.cols(); ++d) out.eps(i, d) = normal(rng);
  }
  out.x_t = x0 + std::sqrt(schedule.at(t)) * out.eps;
  wrap_in_place(out.x_t, unit);
  return out;
}

Points posterior_mean(const Points& x_t, const Points& eps_hat, std::size_t t,
                      const DiffusionSchedule& schedule) {
  if (t < 1 || t > schedule.steps) throw InvalidArgument("posterior_mean: t out of range");
  if (x_t.rows() != eps_hat.rows() || x_t.cols() != eps_hat.cols()) {
    throw InvalidArgument("posterior_mean: shape mismatch");
  }
  const double a_t = schedule.at(t);
  const double a_prev = schedule.at(t - 1);
  return ((a_prev / a_t - 1.0) * std::sqrt(a_t)) * eps_hat + x_t;
}

double posterior_var(std::size_t t, const DiffusionSchedule& schedule) {
  if (t < 1 || t > schedule.steps) throw InvalidArgument("posterior_var: t out of range");
  const double a_t = schedule.at(t);
  const double a_prev = schedule.at(t - 1);
  return a_prev / (2.0 * a_t) * (a_t - a_prev);
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  const auto decays = lr_decay_every == 0 ? 0 : epoch / lr_decay_every;
  return learning_rate * std::pow(lr_decay, static_cast<double>(decays));
}

template <class S>
Adam<S>::Adam(std::size_t n, double beta1, double beta2, double eps)
    : m_(n, S(0)), v_(n, S(0)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

template <class S>
void Adam<S>::step(std::vector<S>& params, const std::vector<S>& grads, double learning_rate) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw InvalidArgument("Adam: parameter/gradient size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto b1 = static_cast<S>(beta1_);
  const auto b2 = static_cast<S>(beta2_);
  const auto step_size = static_cast<S>(learning_rate / bc1);
  const auto inv_bc2 = static_cast<S>(1.0 / bc2);
  const auto eps = static_cast<S>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (S(1) - b1) * grads[i];
    v_[i] = b2 * v_[i] + (S(1) - b2) * grads[i] * grads[i];
    params[i] -= step_size * m_[i] / (std::sqrt(v_[i] * inv_bc2) + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

namespace {

Points to_unit(const Conformation& c) {
  Points x = c.coords;
  for (Eigen::Index d = 0; d < x.cols(); ++d) {
    x.col(d) /= c.box.length(static_cast<std::size_t>(d));
  }
  // Division can round a coordinate just below L up to exactly 1.
  wrap_in_place(x, PeriodicBox::cubic(1.0, static_cast<std::size_t>(x.cols())));
  return x;
}

Points to_box(const Points& unit, const PeriodicBox& box) {
  Points x = unit;
  for (Eigen::Index d = 0; d < x.cols(); ++d) x.col(d) *= box.length(static_cast<std::size_t>(d));
  wrap_in_place(x, box);
  return x;
}

}  // namespace

TrainResult train(const std::vector<Conformation>& dataset, const TrainConfig& config,
                  const DenoiserConfig& dconfig, const DiffusionSchedule& schedule,
                  const EpochCallback& on_epoch, std::optional<DenoiserParams<float>> initial) {
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  if (config.epochs == 0) throw InvalidArgument("train: epochs must be positive");
  if (!(config.learning_rate >= 0.0)) throw InvalidArgument("train: learning rate must be >= 0");
  dconfig.validate();
  if (dconfig.conditional()) {
    for (const Conformation& c : dataset) {
      if (!c.condition) throw InvalidArgument("train: conditional model needs conditioned records");
    }
  }

  TrainResult result;
  result.params = initial ? *initial : init_params(dconfig, config.seed).cast<float>();
  if (result.params.config != dconfig) throw InvalidArgument("train: initial params do not match config");
  Adam<float> adam(result.params.size(), config.beta1, config.beta2, config.adam_eps);

  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick_t(1, schedule.steps);
  std::vector<Points> unit;
  unit.reserve(dataset.size());
  for (const Conformation& c : dataset) unit.push_back(to_unit(c));

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.learning_rate_at(epoch);
    double loss_sum = 0.0;
    for (std::size_t idx : order) {
      const Conformation& conf = dataset[idx];
      const std::size_t t = pick_t(rng);
      NoisedSample noised = forward_noise(unit[idx], t, schedule, rng);
      TrainingItem item{to_box(noised.x_t, conf.box),
                        GlobalFeatures::from_condition(
                            static_cast<double>(t) / static_cast<double>(schedule.steps),
                            dconfig.conditional() ? conf.condition : std::nullopt),
                        std::move(noised.eps)};
      LossAndGradients<float> lg;
      try {
        lg = loss_and_gradients<float>(std::span<const TrainingItem>(&item, 1), result.params,
                                       conf.box);
      } catch (const TrainingDivergence& e) {
        result.diverged = true;
        result.diagnostic = "epoch " + std::to_string(epoch + 1) + ", t = " + std::to_string(t) +
                            ": " + e.what();
        return result;
      }
      loss_sum += lg.loss;
      adam.step(result.params.values, lg.grads, lr);
    }
    EpochReport report{epoch + 1, loss_sum / static_cast<double>(dataset.size()), lr};
    result.loss_history.push_back(report.mean_loss);
    if (on_epoch) on_epoch(report, result.params);
  }
  return result;
}

template <class S>
Conformation sample(const std::optional<Condition>& condition, const DenoiserParams<S>& params,
                    const DiffusionSchedule& schedule, const PeriodicBox& box,
                    std::size_t n_particles, Rng& rng, const TraceCallback& trace) {
  if (box.dims() != 3) throw InvalidArgument("sample: box must be 3-D");
  if (condition && !params.config.conditional()) {
    throw InvalidArgument("sample: condition given to an unconditional model");
  }
  if (!condition && params.config.conditional()) {
    throw InvalidArgument("sample: conditional model needs a condition");
  }
  const PeriodicBox unit = PeriodicBox::cubic(1.0);
  const auto n = static_cast<Eigen::Index>(n_particles);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal;

  Points x(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < 3; ++d) x(i, d) = uniform(rng);
  }
  wrap_in_place(x, unit);
  if (trace) trace(schedule.steps, to_box(x, box));

  Points z(n, 3);
  for (std::size_t t = schedule.steps; t >= 1; --t) {
    const GlobalFeatures g = GlobalFeatures::from_condition(
        static_cast<double>(t) / static_cast<double>(schedule.steps), condition);
    const Points eps_hat = predict_noise<S>(to_box(x, box), g, params, box);
    if (t > 1) {
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index d = 0; d < 3; ++d) z(i, d) = normal(rng);
      }
    } else {
      z.setZero();
    }
    x = posterior_mean(x, eps_hat, t, schedule) + std::sqrt(posterior_var(t, schedule)) * z;
    wrap_in_place(x, unit);
    if (trace) trace(t - 1, to_box(x, box));
  }

  Conformation out;
  out.coords = to_box(x, box);
  out.box = box;
  out.condition = condition;
  out.provenance.source = Source::kSampled;
  return out;
}

template Conformation sample<float>(const std::optional<Condition>&, const DenoiserParams<float>&,
                                    const DiffusionSchedule&, const PeriodicBox&, std::size_t, Rng&,
                                    const TraceCallback&);
template Conformation sample<double>(const std::optional<Condition>&, const DenoiserParams<double>&,
                                     const DiffusionSchedule&, const PeriodicBox&, std::size_t, Rng&,
                                     const TraceCallback&);

}  // namespace mddm
