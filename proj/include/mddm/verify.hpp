#pragma once

#include "mddm/diffusion.hpp"

#include <cstddef>
#include <random>
#include <vector>

namespace mddm {

// Kolmogorov-Smirnov statistic of `samples` against Uniform[0, upper). Sorts in place.
double ks_statistic_uniform(std::vector<double>& samples, double upper);

struct KSReport {
  double statistic = 0.0;
  std::size_t n_samples = 0;
  double sigma_ratio = 0.0;
};

// Draws N(0, (sigma_ratio L)^2), wraps onto [0, L) and tests against Uniform[0, L).
KSReport wrapped_gaussian_uniformity(double sigma_ratio, std::size_t n_samples, Rng& rng,
                                     double box_length = 1.0);

// Density of the sum of 12 U(-1/2, 1/2) variables (mean 0, variance 1).
double irwin_hall_pdf(double x);

// sum_{k=-6}^{5} f_X(y + k) for y in [0, 1), otherwise 0.
double irwin_hall_wrapped_density(double y);

struct PosteriorReport {
  std::size_t t = 0;
  double x0 = 0.0;
  double probe = 0.0;  // conditioning value of x_t
  double bin_width = 0.0;
  std::size_t n_kept = 0;
  double empirical_mean = 0.0;
  double empirical_var = 0.0;
  double formula_mean = 0.0;        // posterior_mean at the bin centre, eps implied by x0
  double exact_mean = 0.0;          // textbook Gaussian posterior mean
  double halved_var = 0.0;           // posterior_var(t)
  double textbook_var = 0.0;        // alpha(t-1)(alpha(t) - alpha(t-1)) / alpha(t)
  double skewness = 0.0;
  double excess_kurtosis = 0.0;

  double mean_rel_error() const;
  double halved_var_rel_error() const;
  double textbook_var_rel_error() const;
};

/**
 * 1-D Markov forward chain without wrapping:
 *   x_{t-1} = x0 + sqrt(alpha(t-1)) e1,  x_t = x_{t-1} + sqrt(alpha(t) - alpha(t-1)) e2,
 * conditioned on x_t in [probe - w/2, probe + w/2). bin_width <= 0 selects
 * 0.02 sqrt(alpha(t)). Samples are drawn in blocks until n_samples chains
 * have been simulated. Throws InsufficientSamples if fewer than 100 land in the bin.
 */
PosteriorReport posterior_mc_check(std::size_t t, const DiffusionSchedule& schedule,
                                   std::size_t n_samples, double x0, double probe,
                                   double bin_width, Rng& rng);

}  // namespace mddm
