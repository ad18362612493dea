#include "mddm/verify.hpp"

#include "mddm/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mddm {

double ks_statistic_uniform(std::vector<double>& samples, double upper) {
  if (samples.empty()) throw InvalidArgument("ks_statistic_uniform: no samples");
  if (!(upper > 0.0)) throw InvalidArgument("ks_statistic_uniform: upper bound must be positive");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double u = std::clamp(samples[i] / upper, 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

KSReport wrapped_gaussian_uniformity(double sigma_ratio, std::size_t n_samples, Rng& rng,
                                     double box_length) {
  if (!(sigma_ratio > 0.0)) throw InvalidArgument("sigma ratio must be positive");
  if (n_samples < 1000) throw InvalidArgument("need at least 1000 samples");
  std::normal_distribution<double> normal(0.0, sigma_ratio * box_length);
  std::vector<double> x(n_samples);
  for (double& v : x) v = wrap_coordinate(normal(rng), box_length);
  return {ks_statistic_uniform(x, box_length), n_samples, sigma_ratio};
}

double irwin_hall_pdf(double x) {
  // (1 / (2 * 11!)) sum_{r=0}^{12} (-1)^r C(12, r) sgn(x + 6 - r) (x + 6 - r)^11,
  // accumulated in extended precision because the terms cancel heavily.
  static constexpr long double kBinom[13] = {1, 12, 66, 220, 495, 792, 924, 792, 495, 220, 66, 12, 1};
  static constexpr long double kTwoFact11 = 2.0L * 39916800.0L;
  if (!std::isfinite(x)) return 0.0;
  if (x <= -6.0 || x >= 6.0) return 0.0;
  long double sum = 0.0L;
  for (int r = 0; r <= 12; ++r) {
    const long double u = static_cast<long double>(x) + 6.0L - static_cast<long double>(r);
    const long double sgn = u > 0 ? 1.0L : (u < 0 ? -1.0L : 0.0L);
    long double p = 1.0L;
    for (int e = 0; e < 11; ++e) p *= u;
    sum += (r % 2 ? -1.0L : 1.0L) * kBinom[r] * sgn * p;
  }
  return static_cast<double>(sum / kTwoFact11);
}

double irwin_hall_wrapped_density(double y) {
  if (!(y >= 0.0 && y < 1.0)) return 0.0;
  long double s = 0.0L;
  for (int k = -6; k <= 5; ++k) s += irwin_hall_pdf(y + k);
  return static_cast<double>(s);
}

double PosteriorReport::mean_rel_error() const {
  return std::abs(empirical_mean - formula_mean) / std::abs(formula_mean);
}
double PosteriorReport::halved_var_rel_error() const {
  return std::abs(empirical_var - halved_var) / halved_var;
}
double PosteriorReport::textbook_var_rel_error() const {
  return std::abs(empirical_var - textbook_var) / textbook_var;
}

PosteriorReport posterior_mc_check(std::size_t t, const DiffusionSchedule& schedule,
                                   std::size_t n_samples, double x0, double probe,
                                   double bin_width, Rng& rng) {
  if (t < 2 || t > schedule.steps) throw InvalidArgument("posterior_mc_check: need 2 <= t <= T");
  const double a_t = schedule.at(t);
  const double a_prev = schedule.at(t - 1);
  PosteriorReport rep;
  rep.t = t;
  rep.x0 = x0;
  rep.probe = probe;
  rep.bin_width = bin_width > 0.0 ? bin_width : 0.02 * std::sqrt(a_t);

  const double lo = probe - 0.5 * rep.bin_width;
  const double hi = probe + 0.5 * rep.bin_width;
  const double s_prev = std::sqrt(a_prev);
  const double s_inc = std::sqrt(a_t - a_prev);
  std::normal_distribution<double> normal;
  std::vector<double> kept;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double x_prev = x0 + s_prev * normal(rng);
    const double x_t = x_prev + s_inc * normal(rng);
    if (x_t >= lo && x_t < hi) kept.push_back(x_prev);
  }
  rep.n_kept = kept.size();
  if (kept.size() < 100) {
    throw InsufficientSamples("posterior_mc_check: only " + std::to_string(kept.size()) +
                              " samples in the conditioning bin");
  }

  const double n = static_cast<double>(kept.size());
  double mean = 0.0;
  for (double v : kept) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : kept) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  rep.empirical_mean = mean;
  rep.empirical_var = m2 * n / (n - 1.0);
  rep.skewness = m3 / std::pow(m2, 1.5);
  rep.excess_kurtosis = m4 / (m2 * m2) - 3.0;

  // The noise a perfect denoiser would report at x_t = probe, given x0.
  Points x_t(1, 1), eps(1, 1);
  x_t(0, 0) = probe;
  eps(0, 0) = (probe - x0) / std::sqrt(a_t);
  rep.formula_mean = posterior_mean(x_t, eps, t, schedule)(0, 0);
  rep.exact_mean = x0 + a_prev / a_t * (probe - x0);
  rep.halved_var = posterior_var(t, schedule);
  rep.textbook_var = a_prev * (a_t - a_prev) / a_t;
  return rep;
}

}  // namespace mddm
