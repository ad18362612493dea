#include "doctest.h"
#include "oracles.hpp"

#include "mddm/denoiser.hpp"
#include "mddm/errors.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace mddm;

namespace {

DenoiserConfig tiny_config(std::size_t n_global = 1) {
  DenoiserConfig c;
  c.n_layers = 2;
  c.hidden = 4;
  c.k_neighbors = 3;
  c.n_global = n_global;
  c.conv_mlp_hidden = {4, 4};
  c.out_mlp_hidden = {8, 8};
  return c;
}

// Hand count of weights + biases for an MLP with the given widths.
std::size_t mlp_count(std::initializer_list<std::size_t> widths) {
  std::vector<std::size_t> w(widths);
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) n += w[i] * w[i + 1] + w[i + 1];
  return n;
}

double max_rel_diff(const Points& a, const Points& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("parameter count matches hand arithmetic") {
  DenoiserConfig c;
  // Input conv [disp, g] -> 32 -> 32 -> 32; 8 convs [disp, f_i, f_j - f_i, g]; output [g, f] -> 128 -> 128 -> 3.
  const std::size_t uncond = mlp_count({4, 32, 32, 32}) + 8 * mlp_count({68, 32, 32, 32}) +
                             mlp_count({33, 128, 128, 3});
  CHECK(uncond == 58083);
  CHECK(parameter_count(c) == uncond);
  c.n_global = 4;
  CHECK(parameter_count(c) == mlp_count({7, 32, 32, 32}) + 8 * mlp_count({71, 32, 32, 32}) +
                                  mlp_count({36, 128, 128, 3}));
  CHECK(parameter_count(c) == 59331);
}

TEST_CASE("config validation") {
  DenoiserConfig c;
  c.hidden = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = DenoiserConfig{};
  c.n_global = 2;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  CHECK(activation_from_string(to_string(Activation::kSoftplus)) == Activation::kSoftplus);
  CHECK_THROWS(activation_from_string("relu6"));
}

TEST_CASE("init_params is deterministic and non-degenerate") {
  const DenoiserConfig c;
  const auto a = init_params(c, 0);
  const auto b = init_params(c, 0);
  CHECK(a.values == b.values);
  CHECK(init_params(c, 1).values != a.values);
  CHECK(std::all_of(a.values.begin(), a.values.end(), [](double v) { return std::isfinite(v); }));
  const auto [lo, hi] = std::minmax_element(a.values.begin(), a.values.end());
  CHECK(*lo < *hi);
  const ParamLayout layout(c);
  const auto& first = layout.input_conv();
  const double bound = std::sqrt(1.0 / static_cast<double>(first.sizes[0]));
  for (std::size_t i = 0; i < first.sizes[0] * first.sizes[1]; ++i) {
    CHECK(std::abs(a.values[first.weight_offset[0] + i]) <= bound);
  }
  for (std::size_t i = 0; i < first.sizes[1]; ++i) CHECK(a.values[first.bias_offset[0] + i] == 0.0);
}

TEST_CASE("condition rescaling") {
  const auto lo = rescale_condition({1.0, 0.0, 0.01});
  const auto hi = rescale_condition({15.0, 6.0, 0.05});
  for (int i = 0; i < 3; ++i) {
    CHECK(lo[static_cast<std::size_t>(i)] == doctest::Approx(-1.0));
    CHECK(hi[static_cast<std::size_t>(i)] == doctest::Approx(1.0));
  }
  const auto g = GlobalFeatures::from_condition(0.5, Condition{8.0, 3.0, 0.03});
  CHECK(g.width() == 4);
  CHECK(g.values().size() == 4);
  CHECK(g.values()[0] == 0.5);
}

TEST_CASE("pbc_conv equals the naive edge loop") {
  std::mt19937_64 rng(21);
  const PeriodicBox box = PeriodicBox::cubic(3.0);
  DenoiserConfig c = tiny_config(4);
  c.hidden = 5;
  const auto params = init_params(c, 3);
  // Give biases non-zero values so they are exercised too.
  auto values = params.values;
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const ParamLayout layout(c);
  for (std::size_t m = 0; m < layout.n_mlps(); ++m) {
    const auto& mlp = layout.mlp(m);
    for (std::size_t l = 0; l < mlp.n_linear(); ++l)
      for (std::size_t o = 0; o < mlp.sizes[l + 1]; ++o) values[mlp.bias_offset[l] + o] = u(rng);
  }
  const std::vector<double> global{0.3, -0.2, 0.9, 0.1};

  for (int trial = 0; trial < 5; ++trial) {
    const Points x = oracle::random_points(8, box, rng);
    const NeighborGraph g = knn_graph(x, 3, box);

    const NodeMatrix<double> f0 = pbc_conv<double>(nullptr, g, global, MlpView<double>{values.data(), &layout.input_conv()},
                                                   c.activation);
    const auto want0 = oracle::conv_naive(nullptr, g, global, values, layout.input_conv(), c.activation);
    std::vector<std::vector<double>> f0v(8);
    for (Eigen::Index i = 0; i < 8; ++i) {
      for (Eigen::Index ch = 0; ch < f0.cols(); ++ch) {
        CHECK(f0(i, ch) == doctest::Approx(want0[static_cast<std::size_t>(i)][static_cast<std::size_t>(ch)]).epsilon(1e-12));
        f0v[static_cast<std::size_t>(i)].push_back(f0(i, ch));
      }
    }

    const NodeMatrix<double> f1 = pbc_conv<double>(&f0, g, global, MlpView<double>{values.data(), &layout.conv(0)},
                                                   c.activation);
    const auto want1 = oracle::conv_naive(&f0v, g, global, values, layout.conv(0), c.activation);
    for (Eigen::Index i = 0; i < 8; ++i) {
      for (Eigen::Index ch = 0; ch < f1.cols(); ++ch) {
        CHECK(f1(i, ch) == doctest::Approx(want1[static_cast<std::size_t>(i)][static_cast<std::size_t>(ch)]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("pbc_conv on a lattice with constant features gives identical rows") {
  const PeriodicBox box = PeriodicBox::cubic(4.0);
  Points x(64, 3);
  for (int i = 0; i < 64; ++i) {
    x(i, 0) = i % 4 + 0.5;
    x(i, 1) = (i / 4) % 4 + 0.5;
    x(i, 2) = i / 16 + 0.5;
  }
  const DenoiserConfig c = tiny_config();
  const auto p = init_params(c, 9);
  const ParamLayout layout(c);
  const NeighborGraph g = knn_graph(x, 6, box);
  NodeMatrix<double> f = NodeMatrix<double>::Constant(64, static_cast<Eigen::Index>(c.hidden), 0.7);
  const std::vector<double> global{0.25};
  const auto out = pbc_conv<double>(&f, g, global, MlpView<double>{p.values.data(), &layout.conv(0)}, c.activation);
  for (Eigen::Index i = 1; i < 64; ++i) CHECK((out.row(i) - out.row(0)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(pbc_conv<double>(nullptr, g, global, MlpView<double>{p.values.data(), &layout.conv(0)}, c.activation),
                  InvalidArgument);
}

TEST_CASE("predict_noise shape and errors") {
  std::mt19937_64 rng(2);
  const PeriodicBox box = PeriodicBox::cubic(5.0);
  const DenoiserConfig c;
  const auto p = init_params(c, 0);
  const Points x = oracle::random_points(40, box, rng);
  const Points y = predict_noise(x, GlobalFeatures{0.5, std::nullopt}, p, box);
  CHECK(y.rows() == 40);
  CHECK(y.cols() == 3);
  CHECK_THROWS_AS(predict_noise(oracle::random_points(32, box, rng), GlobalFeatures{0.5, std::nullopt}, p, box),
                  InvalidArgument);
  CHECK_THROWS_AS(predict_noise(x, GlobalFeatures::from_condition(0.5, Condition{2, 2, 0.02}), p, box),
                  InvalidArgument);
}

TEST_CASE("predict_noise translation invariance and permutation equivariance") {
  std::mt19937_64 rng(8);
  const PeriodicBox box = PeriodicBox::cubic(4.0);
  DenoiserConfig c;
  c.n_global = 4;
  const auto pd = init_params(c, 5);
  const auto pf = pd.cast<float>();
  const GlobalFeatures gf = GlobalFeatures::from_condition(0.3, Condition{4.0, 2.0, 0.02});
  for (int trial = 0; trial < 5; ++trial) {
    const Points x = oracle::random_points(64, box, rng);
    Points shifted = x;
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (Eigen::Index d = 0; d < 3; ++d) shifted.col(d).array() += u(rng);
    wrap_in_place(shifted, box);

    const Points yd = predict_noise(x, gf, pd, box);
    CHECK(max_rel_diff(predict_noise(shifted, gf, pd, box), yd) <= 1e-12);
    const Points yf = predict_noise(x, gf, pf, box);
    CHECK(max_rel_diff(predict_noise(shifted, gf, pf, box), yf) <= 1e-5);

    std::vector<Eigen::Index> perm(64);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Points xp(64, 3);
    for (Eigen::Index i = 0; i < 64; ++i) xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    const Points yp = predict_noise(xp, gf, pd, box);
    for (Eigen::Index i = 0; i < 64; ++i) CHECK(yp.row(i) == yd.row(perm[static_cast<std::size_t>(i)]));
  }
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(77);
  const PeriodicBox box = PeriodicBox::cubic(2.5);
  for (std::size_t n_global : {std::size_t{1}, std::size_t{4}}) {
    const DenoiserConfig c = tiny_config(n_global);
    auto p = init_params(c, 13);
    std::normal_distribution<double> nrm;
    std::vector<TrainingItem> batch;
    for (int b = 0; b < 2; ++b) {
      TrainingItem item;
      item.x_t = oracle::random_points(10, box, rng);
      item.global = n_global == 4 ? GlobalFeatures::from_condition(0.4, Condition{5, 1, 0.03})
                                  : GlobalFeatures{0.4 + 0.1 * b, std::nullopt};
      item.eps.resize(10, 3);
      for (Eigen::Index i = 0; i < 10; ++i)
        for (Eigen::Index d = 0; d < 3; ++d) item.eps(i, d) = nrm(rng);
      batch.push_back(item);
    }
    const auto lg = loss_and_gradients<double>(batch, p, box);
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    int bad = 0;
    for (int probe = 0; probe < 200; ++probe) {
      const std::size_t i = pick(rng);
      const double orig = p.values[i];
      // Five-point stencil: truncation ~h^4, roundoff ~1e-11 absolute at h = 1e-4.
      const double h = 1e-4;
      auto loss_at = [&](double v) {
        p.values[i] = v;
        return loss_and_gradients<double>(batch, p, box).loss;
      };
      const double fd = (-loss_at(orig + 2 * h) + 8 * loss_at(orig + h) - 8 * loss_at(orig - h) +
                         loss_at(orig - 2 * h)) / (12 * h);
      p.values[i] = orig;
      const double g = lg.grads[i];
      // Gradients below 1e-6 are compared on an absolute scale.
      const double rel = std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6});
      if (rel > 1e-4) {
        ++bad;
        MESSAGE("param " << i << ": finite difference " << fd << ", backprop " << g);
      }
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("planted target gives zero loss and gradients; batch order is irrelevant") {
  std::mt19937_64 rng(4);
  const PeriodicBox box = PeriodicBox::cubic(2.5);
  const DenoiserConfig c = tiny_config();
  const auto p = init_params(c, 2);
  std::vector<TrainingItem> batch;
  for (int b = 0; b < 3; ++b) {
    TrainingItem item;
    item.x_t = oracle::random_points(10, box, rng);
    item.global = GlobalFeatures{0.1 * (b + 1), std::nullopt};
    item.eps = predict_noise(item.x_t, item.global, p, box);
    batch.push_back(item);
  }
  const auto zero = loss_and_gradients<double>(batch, p, box);
  CHECK(zero.loss == 0.0);
  CHECK(std::all_of(zero.grads.begin(), zero.grads.end(), [](double g) { return g == 0.0; }));

  std::normal_distribution<double> nrm;
  for (auto& item : batch)
    for (Eigen::Index i = 0; i < 10; ++i) item.eps(i, 0) += nrm(rng);
  const auto a = loss_and_gradients<double>(batch, p, box);
  std::reverse(batch.begin(), batch.end());
  const auto b = loss_and_gradients<double>(batch, p, box);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
  for (std::size_t i = 0; i < a.grads.size(); ++i) CHECK(a.grads[i] == doctest::Approx(b.grads[i]).epsilon(1e-10).scale(1e-12));
}

TEST_CASE("non-finite inputs raise a training divergence") {
  std::mt19937_64 rng(4);
  const PeriodicBox box = PeriodicBox::cubic(2.5);
  const DenoiserConfig c = tiny_config();
  auto p = init_params(c, 2);
  p.values[ParamLayout(c).output().bias_offset.back()] = std::numeric_limits<double>::quiet_NaN();
  TrainingItem item{oracle::random_points(10, box, rng), GlobalFeatures{0.5, std::nullopt}, Points::Zero(10, 3)};
  CHECK_THROWS_AS(loss_and_gradients<double>(std::span<const TrainingItem>(&item, 1), p, box), TrainingDivergence);
}
