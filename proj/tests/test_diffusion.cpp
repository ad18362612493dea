#include "doctest.h"
#include "oracles.hpp"

#include "mddm/diffusion.hpp"
#include "mddm/errors.hpp"
#include "mddm/verify.hpp"

#include <cmath>
#include <numbers>

using namespace mddm;

namespace {

DenoiserConfig small_config(std::size_t n_global = 1) {
  DenoiserConfig c;
  c.n_layers = 2;
  c.hidden = 8;
  c.k_neighbors = 6;
  c.n_global = n_global;
  c.conv_mlp_hidden = {8};
  c.out_mlp_hidden = {16};
  return c;
}

Conformation random_conf(std::size_t n, double L, std::mt19937_64& rng) {
  Conformation c;
  c.box = PeriodicBox::cubic(L);
  c.coords = oracle::random_points(n, c.box, rng);
  return c;
}

}  // namespace

TEST_CASE("cosine schedule") {
  const DiffusionSchedule s = build_schedule(500, 0.008);
  REQUIRE(s.alpha.size() == 501);
  for (std::size_t t = 0; t <= 500; ++t) {
    const long double x = static_cast<long double>(500 - t) / 501.0L;
    const long double c = cosl(std::numbers::pi_v<long double> / 2 * (x + 0.008L) / 1.008L);
    CHECK(s.at(t) == doctest::Approx(static_cast<double>(c * c)).epsilon(1e-13));
    if (t > 0) CHECK(s.at(t) > s.at(t - 1));
  }
  CHECK(s.at(0) < 1e-3);
  CHECK(s.at(500) > 0.99);
  CHECK_THROWS_AS(build_schedule(0, 0.008), InvalidArgument);
  CHECK_THROWS_AS(build_schedule(10, 0.0), InvalidArgument);
}

TEST_CASE("forward noise") {
  const DiffusionSchedule s = build_schedule();
  std::mt19937_64 rng(1);
  const PeriodicBox unit = PeriodicBox::cubic(1.0);
  const Points x0 = oracle::random_points(1000, unit, rng);

  SUBCASE("vanishing noise barely moves particles") {
    const NoisedSample ns = forward_noise(x0, 1, s, rng);
    require_wrapped(ns.x_t, unit);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x0.rows(); ++i) {
      const Vec d = min_image({&x0(i, 0), 3}, {&ns.x_t(i, 0), 3}, unit);
      worst = std::max(worst, d.cwiseAbs().maxCoeff());
      CHECK((d - std::sqrt(s.at(1)) * ns.eps.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    }
    CHECK(worst < 5 * std::sqrt(s.at(1)));
  }

  SUBCASE("terminal step is uniform") {
    std::vector<double> all;
    for (int rep = 0; rep < 334; ++rep) {
      const NoisedSample ns = forward_noise(x0, 500, s, rng);
      require_wrapped(ns.x_t, unit);
      all.insert(all.end(), ns.x_t.data(), ns.x_t.data() + ns.x_t.size());
    }
    CHECK(all.size() >= 1000000);
    CHECK(ks_statistic_uniform(all, 1.0) < 0.01);
  }

  SUBCASE("displacement variance before wrapping equals alpha") {
    for (std::size_t t : {50, 250, 450}) {
      double sum2 = 0.0;
      std::size_t n = 0;
      while (n < 100000) {
        const NoisedSample ns = forward_noise(x0, t, s, rng);
        sum2 += (std::sqrt(s.at(t)) * ns.eps).squaredNorm();
        n += static_cast<std::size_t>(ns.eps.size());
      }
      CHECK(sum2 / static_cast<double>(n) == doctest::Approx(s.at(t)).epsilon(0.03));
    }
  }

  CHECK_THROWS_AS(forward_noise(x0, 0, s, rng), InvalidArgument);
  CHECK_THROWS_AS(forward_noise(x0, 501, s, rng), InvalidArgument);
}

TEST_CASE("posterior mean and variance") {
  const DiffusionSchedule s = build_schedule();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nrm;
  Points x(20, 3), e1(20, 3), e2(20, 3);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index d = 0; d < 3; ++d) {
      x(i, d) = nrm(rng);
      e1(i, d) = nrm(rng);
      e2(i, d) = nrm(rng);
    }
  for (std::size_t t : {2, 10, 250, 500}) {
    CHECK(posterior_mean(x, Points::Zero(20, 3), t, s) == x);
    const double at = s.at(t), ap = s.at(t - 1);
    const Points x0_hat = x - std::sqrt(at) * e1;
    const Points closed = ((x - x0_hat) / at) * ap + x0_hat;
    CHECK((posterior_mean(x, e1, t, s) - closed).cwiseAbs().maxCoeff() < 1e-12);
    const double a = 0.7, b = -1.3;
    const Points lhs = posterior_mean(x, a * e1 + b * e2, t, s);
    const Points rhs = a * posterior_mean(x, e1, t, s) + b * posterior_mean(x, e2, t, s) - (a + b - 1) * x;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
  for (std::size_t t = 1; t <= 500; ++t) {
    CHECK(posterior_var(t, s) > 0.0);
    CHECK(posterior_var(t, s) == doctest::Approx(s.at(t - 1) * (s.at(t) - s.at(t - 1)) / (2 * s.at(t))));
  }
  DiffusionSchedule flat;
  flat.steps = 3;
  flat.alpha = {0.5, 0.5, 0.5, 0.5};
  CHECK(posterior_var(2, flat) == 0.0);
  CHECK_THROWS_AS(posterior_var(0, s), InvalidArgument);
}

TEST_CASE("learning-rate decay") {
  TrainConfig c;
  CHECK(c.learning_rate_at(0) == 0.005);
  CHECK(c.learning_rate_at(99) == 0.005);
  CHECK(c.learning_rate_at(100) == doctest::Approx(0.00475));
  CHECK(c.learning_rate_at(250) == doctest::Approx(0.005 * 0.95 * 0.95));
}

TEST_CASE("Adam") {
  std::vector<double> p{1.0, -2.0, 0.5};
  Adam<double> opt(3, 0.9, 0.999, 1e-8);
  const std::vector<double> before = p;
  opt.step(p, {0.3, -0.1, 2.0}, 0.0);
  CHECK(p == before);
  // First step moves every coordinate by ~lr against the gradient sign.
  Adam<double> opt2(3, 0.9, 0.999, 1e-8);
  opt2.step(p, {0.3, -0.1, 2.0}, 0.01);
  CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-1.99).epsilon(1e-6));
  // Minimises a quadratic.
  std::vector<double> q{3.0, -4.0};
  Adam<double> opt3(2, 0.9, 0.999, 1e-8);
  for (int i = 0; i < 3000; ++i) opt3.step(q, {2 * q[0], 2 * q[1]}, 0.01);
  CHECK(std::abs(q[0]) < 1e-2);
  CHECK(std::abs(q[1]) < 1e-2);
  CHECK_THROWS_AS(opt3.step(q, {1.0}, 0.1), InvalidArgument);
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(5);
  const std::vector<Conformation> data{random_conf(24, 3.0, rng), random_conf(24, 3.0, rng)};
  const DiffusionSchedule s = build_schedule();
  TrainConfig tc;
  tc.epochs = 20;
  tc.seed = 17;
  std::size_t reports = 0;
  const auto a = train(data, tc, small_config(), s, [&](const EpochReport& r, const DenoiserParams<float>&) {
    CHECK(r.epoch == ++reports);
  });
  const auto b = train(data, tc, small_config(), s);
  CHECK_FALSE(a.diverged);
  CHECK(reports == 20);
  REQUIRE(a.loss_history.size() == 20);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.params.values == b.params.values);
  tc.seed = 18;
  CHECK(train(data, tc, small_config(), s).loss_history != a.loss_history);

  tc.learning_rate = 0.0;
  tc.epochs = 3;
  const auto frozen = train(data, tc, small_config(), s);
  CHECK(frozen.params.values == init_params(small_config(), tc.seed).cast<float>().values);
}

TEST_CASE("Adam on backpropagated gradients fits a fixed batch") {
  Conformation lattice;
  lattice.box = PeriodicBox::cubic(3.0);
  lattice.coords.resize(27, 3);
  for (Eigen::Index i = 0; i < 27; ++i) {
    lattice.coords(i, 0) = static_cast<double>(i % 3) + 0.5;
    lattice.coords(i, 1) = static_cast<double>((i / 3) % 3) + 0.5;
    lattice.coords(i, 2) = static_cast<double>(i / 9) + 0.5;
  }
  const DiffusionSchedule s = build_schedule();
  Rng rng(3);
  const Points unit = lattice.coords / 3.0;
  std::vector<TrainingItem> batch;
  for (int i = 0; i < 16; ++i) {
    const NoisedSample ns = forward_noise(unit, 20, s, rng);
    batch.push_back({ns.x_t * 3.0, GlobalFeatures::from_condition(20.0 / 500.0, std::nullopt), ns.eps});
  }
  auto p = init_params(small_config(), 17).cast<float>();
  Adam<float> opt(p.size(), 0.9, 0.999, 1e-8);
  const double initial = loss_and_gradients<float>(batch, p, lattice.box).loss;
  for (int it = 0; it < 600; ++it) opt.step(p.values, loss_and_gradients<float>(batch, p, lattice.box).grads, 0.005);
  CHECK(loss_and_gradients<float>(batch, p, lattice.box).loss < 0.5 * initial);
}

TEST_CASE("training validation and divergence") {
  std::mt19937_64 rng(6);
  const DiffusionSchedule s = build_schedule();
  std::vector<Conformation> data{random_conf(24, 3.0, rng)};
  TrainConfig tc;
  tc.epochs = 2;
  CHECK_THROWS_AS(train({}, tc, small_config(), s), InvalidArgument);
  CHECK_THROWS_AS(train(data, tc, small_config(4), s), InvalidArgument);
  data[0].condition = Condition{3.0, 1.0, 0.02};
  CHECK_FALSE(train(data, tc, small_config(4), s).diverged);

  auto bad = init_params(small_config(), 0).cast<float>();
  bad.values[0] = std::numeric_limits<float>::infinity();
  const auto r = train(data, tc, small_config(), s, {}, bad);
  CHECK(r.diverged);
  CHECK(r.loss_history.empty());
  CHECK_FALSE(r.diagnostic.empty());
}

TEST_CASE("sampling with untrained weights stays valid") {
  const DiffusionSchedule s = build_schedule(50);
  const auto p = init_params(small_config(), 1).cast<float>();
  const PeriodicBox box = PeriodicBox::cubic(3.0);
  Rng rng(2);
  std::size_t calls = 0;
  std::size_t last_t = 999;
  const Conformation c = sample<float>(std::nullopt, p, s, box, 30, rng, [&](std::size_t t, const Points& x) {
    require_wrapped(x, box);
    CHECK(t < last_t);
    last_t = t;
    ++calls;
  });
  CHECK(calls == 51);
  CHECK(last_t == 0);
  CHECK(c.size() == 30);
  CHECK(c.provenance.source == Source::kSampled);
  c.validate();

  Rng r1(9), r2(9);
  CHECK(sample<float>(std::nullopt, p, s, box, 30, r1).coords == sample<float>(std::nullopt, p, s, box, 30, r2).coords);
  CHECK_THROWS_AS(sample<float>(Condition{1, 1, 0.02}, p, s, box, 30, rng), InvalidArgument);
  const auto pc = init_params(small_config(4), 1).cast<float>();
  CHECK_THROWS_AS(sample<float>(std::nullopt, pc, s, box, 30, rng), InvalidArgument);
  CHECK(sample<float>(Condition{1, 1, 0.02}, pc, s, box, 30, rng).condition.has_value());
}
