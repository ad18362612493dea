#include "mddm/denoiser.hpp"

#include "mddm/errors.hpp"
#include "mddm/potential.hpp"

#include <cmath>
#include <random>
#include <string>

namespace mddm {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kSiLU: return "silu";
    case Activation::kSoftplus: return "softplus";
    case Activation::kTanh: return "tanh";
  }
  return "unknown";
}

Activation activation_from_string(const std::string& s) {
  if (s == "silu") return Activation::kSiLU;
  if (s == "softplus") return Activation::kSoftplus;
  if (s == "tanh") return Activation::kTanh;
  throw InvalidArgument("unknown activation '" + s + "'");
}

void DenoiserConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw InvalidArgument(std::string("DenoiserConfig: ") + name + " must be positive");
  };
  positive(n_layers, "n_layers");
  positive(hidden, "hidden");
  positive(k_neighbors, "k_neighbors");
  if (n_global != 1 && n_global != 4) {
    throw InvalidArgument("DenoiserConfig: n_global must be 1 (unconditional) or 4 (conditional)");
  }
  for (std::size_t h : conv_mlp_hidden) positive(h, "conv_mlp_hidden entries");
  for (std::size_t h : out_mlp_hidden) positive(h, "out_mlp_hidden entries");
}

std::array<double, 3> rescale_condition(const Condition& c) {
  auto unit = [](double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; };
  return {unit(c.k, OPPRanges::kMin, OPPRanges::kMax),
          unit(c.phi, OPPRanges::phiMin, OPPRanges::phiMax),
          unit(c.temperature, OPPRanges::tempMin, OPPRanges::tempMax)};
}

GlobalFeatures GlobalFeatures::from_condition(double t_frac, const std::optional<Condition>& c) {
  GlobalFeatures g;
  g.t_frac = t_frac;
  if (c) g.condition = rescale_condition(*c);
  return g;
}

std::vector<double> GlobalFeatures::values() const {
  std::vector<double> v{t_frac};
  if (condition) v.insert(v.end(), condition->begin(), condition->end());
  return v;
}

namespace {

MlpLayout make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                   std::size_t& offset) {
  MlpLayout m;
  m.sizes.push_back(in);
  m.sizes.insert(m.sizes.end(), hidden.begin(), hidden.end());
  m.sizes.push_back(out);
  for (std::size_t l = 0; l + 1 < m.sizes.size(); ++l) {
    m.weight_offset.push_back(offset);
    offset += m.sizes[l] * m.sizes[l + 1];
    m.bias_offset.push_back(offset);
    offset += m.sizes[l + 1];
  }
  return m;
}

}  // namespace

ParamLayout::ParamLayout(const DenoiserConfig& c) {
  c.validate();
  const std::size_t d = DenoiserConfig::kDims;
  const std::size_t g_conv = c.concat_global ? c.n_global : 0;
  mlps_.push_back(make_mlp(d + c.n_global, c.conv_mlp_hidden, c.hidden, total_));
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    mlps_.push_back(make_mlp(d + 2 * c.hidden + g_conv, c.conv_mlp_hidden, c.hidden, total_));
  }
  mlps_.push_back(make_mlp(c.hidden + g_conv, c.out_mlp_hidden, DenoiserConfig::kOut, total_));
}

std::size_t parameter_count(const DenoiserConfig& config) { return ParamLayout(config).size(); }

DenoiserParams<double> init_params(const DenoiserConfig& config, std::uint64_t seed) {
  const ParamLayout layout(config);
  DenoiserParams<double> p{config, std::vector<double>(layout.size(), 0.0)};
  std::mt19937_64 rng(seed);
  for (std::size_t m = 0; m < layout.n_mlps(); ++m) {
    const MlpLayout& mlp = layout.mlp(m);
    for (std::size_t l = 0; l < mlp.n_linear(); ++l) {
      const double bound = std::sqrt(1.0 / static_cast<double>(mlp.sizes[l]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      const std::size_t n = mlp.sizes[l] * mlp.sizes[l + 1];
      for (std::size_t i = 0; i < n; ++i) p.values[mlp.weight_offset[l] + i] = dist(rng);
    }
  }
  return p;
}

namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using VecS = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
void activate(Activation act, const Mat<S>& z, Mat<S>& a) {
  switch (act) {
    case Activation::kSiLU:
      a = z.array() / (S(1) + (-z.array()).exp());
      break;
    case Activation::kSoftplus:
      a = z.array().max(S(0)) + (-z.array().abs()).exp().log1p();
      break;
    case Activation::kTanh:
      a = z.array().tanh();
      break;
  }
}

// On entry `grad` holds dL/da; on exit dL/dz.
template <class S>
void activation_backward(Activation act, const Mat<S>& z, Mat<S>& grad) {
  switch (act) {
    case Activation::kSiLU: {
      const auto s = (S(1) / (S(1) + (-z.array()).exp())).eval();
      grad.array() *= s * (S(1) + z.array() * (S(1) - s));
      break;
    }
    case Activation::kSoftplus:
      grad.array() *= S(1) / (S(1) + (-z.array()).exp());
      break;
    case Activation::kTanh:
      grad.array() *= S(1) - z.array().tanh().square();
      break;
  }
}

template <class S>
struct GradView {
  S* base;
  const MlpLayout* layout;

  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weight(std::size_t l) const {
    return {base + layout->weight_offset[l], static_cast<Eigen::Index>(layout->sizes[l + 1]),
            static_cast<Eigen::Index>(layout->sizes[l])};
  }
  Eigen::Map<VecS<S>> bias(std::size_t l) const {
    return {base + layout->bias_offset[l], static_cast<Eigen::Index>(layout->sizes[l + 1])};
  }
};

template <class S>
struct ConvCache {
  std::vector<Mat<S>> z;  // pre-activation of each linear layer (last one is the edge output)
  std::vector<Mat<S>> a;  // hidden activations
  // Scratch reused between calls so steady-state passes do not allocate.
  Mat<S> src_term, dst_term, dz, da, per_src, per_dst;
};

template <class S>
struct MlpCache {
  Mat<S> input;
  std::vector<Mat<S>> z;
  std::vector<Mat<S>> a;
  Mat<S> dz, dx;
};

// Column-major (features x nodes) convolution; `disp` is 3 x E. Writes the
// pooled node features into `out`.
template <class S>
void conv_forward(const Mat<S>* fin, const Mat<S>& disp, const NeighborGraph& g,
                  const VecS<S>& global, const MlpView<S>& mlp, Activation act, ConvCache<S>& c,
                  Mat<S>& out) {
  const MlpLayout& lay = *mlp.layout;
  const auto n = static_cast<Eigen::Index>(g.n_nodes);
  const auto k = static_cast<Eigen::Index>(g.k);
  const Eigen::Index n_edges = n * k;
  const Eigen::Index f = fin ? fin->rows() : 0;
  const Eigen::Index n_glob = global.size();
  if (static_cast<Eigen::Index>(lay.sizes[0]) != 3 + 2 * f + n_glob) {
    throw InvalidArgument("pbc_conv: MLP input width " + std::to_string(lay.sizes[0]) +
                          " does not match 3 + 2*" + std::to_string(f) + " + " +
                          std::to_string(n_glob));
  }
  if (disp.cols() != n_edges || (fin && fin->cols() != n)) {
    throw InvalidArgument("pbc_conv: feature/graph size mismatch");
  }

  const std::size_t n_lin = lay.n_linear();
  c.z.resize(n_lin);
  c.a.resize(n_lin - 1);

  // First linear layer split into per-edge (displacement) and per-node terms:
  // W [d; f_i; f_j - f_i; g] = W_d d + (W_i - W_j) f_i + W_j f_j + W_g g.
  const auto w1 = mlp.weight(0);
  VecS<S> shared = mlp.bias(0);
  if (n_glob > 0) shared.noalias() += w1.rightCols(n_glob) * global;
  Mat<S>& z1 = c.z[0];
  z1.noalias() = w1.leftCols(3) * disp;
  if (fin) {
    c.src_term.noalias() = (w1.middleCols(3, f) - w1.middleCols(3 + f, f)) * (*fin);
    c.src_term.colwise() += shared;
    c.dst_term.noalias() = w1.middleCols(3 + f, f) * (*fin);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index m = 0; m < k; ++m) {
        const Eigen::Index e = i * k + m;
        z1.col(e) += c.src_term.col(i) +
                     c.dst_term.col(static_cast<Eigen::Index>(g.dst[static_cast<std::size_t>(e)]));
      }
    }
  } else {
    z1.colwise() += shared;
  }

  for (std::size_t l = 1; l < n_lin; ++l) {
    activate(act, c.z[l - 1], c.a[l - 1]);
    c.z[l].noalias() = mlp.weight(l) * c.a[l - 1];
    c.z[l].colwise() += mlp.bias(l);
  }

  // Channel-wise max over each node's k edges. The winning edge is recovered
  // in the backward pass.
  const Mat<S>& edge_out = c.z.back();
  out.resize(edge_out.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.col(i) = edge_out.middleCols(i * k, k).rowwise().maxCoeff();
  }
}

template <class S>
void conv_backward(const Mat<S>* fin, const Mat<S>& disp, const NeighborGraph& g,
                   const VecS<S>& global, const MlpView<S>& mlp, const GradView<S>& grad,
                   Activation act, ConvCache<S>& c, const Mat<S>& dout, Mat<S>* dfin) {
  const MlpLayout& lay = *mlp.layout;
  const auto n = static_cast<Eigen::Index>(g.n_nodes);
  const auto k = static_cast<Eigen::Index>(g.k);
  const Eigen::Index n_edges = n * k;
  const Eigen::Index n_glob = global.size();
  const std::size_t n_lin = lay.n_linear();

  // Max-pool gradient goes to the earliest edge attaining the maximum.
  const Mat<S>& edge_out = c.z.back();
  Mat<S>& dz = c.dz;
  dz.setZero(dout.rows(), n_edges);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index e0 = i * k;
    for (Eigen::Index ch = 0; ch < dout.rows(); ++ch) {
      const S best = edge_out.row(ch).segment(e0, k).maxCoeff();
      Eigen::Index e = e0;
      while (edge_out(ch, e) != best) ++e;
      dz(ch, e) = dout(ch, i);
    }
  }
  for (std::size_t l = n_lin - 1; l >= 1; --l) {
    grad.weight(l).noalias() += dz * c.a[l - 1].transpose();
    grad.bias(l) += dz.rowwise().sum();
    c.da.noalias() = mlp.weight(l).transpose() * dz;
    activation_backward(act, c.z[l - 1], c.da);
    dz.swap(c.da);
  }

  auto gw1 = grad.weight(0);
  gw1.leftCols(3).noalias() += dz * disp.transpose();
  c.per_src.resize(dz.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) c.per_src.col(i) = dz.middleCols(i * k, k).rowwise().sum();
  const VecS<S> total = c.per_src.rowwise().sum();
  grad.bias(0) += total;
  if (n_glob > 0) gw1.rightCols(n_glob).noalias() += total * global.transpose();

  if (fin) {
    const Eigen::Index f = fin->rows();
    c.per_dst.setZero(dz.rows(), n);
    for (Eigen::Index e = 0; e < n_edges; ++e) {
      c.per_dst.col(static_cast<Eigen::Index>(g.dst[static_cast<std::size_t>(e)])) += dz.col(e);
    }
    gw1.middleCols(3, f).noalias() += c.per_src * fin->transpose();
    gw1.middleCols(3 + f, f).noalias() += (c.per_dst - c.per_src) * fin->transpose();
    if (dfin) {
      const auto w1 = mlp.weight(0);
      dfin->noalias() += (w1.middleCols(3, f) - w1.middleCols(3 + f, f)).transpose() * c.per_src;
      dfin->noalias() += w1.middleCols(3 + f, f).transpose() * c.per_dst;
    }
  }
}

template <class S>
const Mat<S>& mlp_forward(const MlpView<S>& mlp, Activation act, MlpCache<S>& c) {
  const std::size_t n_lin = mlp.layout->n_linear();
  c.z.resize(n_lin);
  c.a.resize(n_lin - 1);
  for (std::size_t l = 0; l < n_lin; ++l) {
    const Mat<S>& x = l == 0 ? c.input : c.a[l - 1];
    c.z[l].noalias() = mlp.weight(l) * x;
    c.z[l].colwise() += mlp.bias(l);
    if (l + 1 < n_lin) activate(act, c.z[l], c.a[l]);
  }
  return c.z.back();
}

// `c.dz` holds dL/d(output) on entry; returns dL/d(input).
template <class S>
const Mat<S>& mlp_backward(const MlpView<S>& mlp, const GradView<S>& grad, Activation act,
                           MlpCache<S>& c) {
  const std::size_t n_lin = mlp.layout->n_linear();
  for (std::size_t l = n_lin; l-- > 0;) {
    const Mat<S>& x = l == 0 ? c.input : c.a[l - 1];
    grad.weight(l).noalias() += c.dz * x.transpose();
    grad.bias(l) += c.dz.rowwise().sum();
    c.dx.noalias() = mlp.weight(l).transpose() * c.dz;
    if (l > 0) activation_backward(act, c.z[l - 1], c.dx);
    c.dz.swap(c.dx);
  }
  return c.dz;
}

template <class S>
struct ForwardPass {
  NeighborGraph graph;
  Mat<S> disp;
  VecS<S> global;
  VecS<S> conv_global;           // empty when global features are not concatenated
  std::vector<Mat<S>> features;  // features[0] from the input conv, features[l] after conv l
  std::vector<ConvCache<S>> conv;
  MlpCache<S> out;
  Mat<S> df, dfin;
  // Aligned copies of the parameters and gradient accumulator. Eigen peels
  // misaligned heads differently, so working on caller memory would make
  // float results depend on where the caller's vector happened to live.
  VecS<S> weights;
  VecS<S> grads;
};

// One workspace per thread and scalar type; buffers keep their capacity across calls.
template <class S>
ForwardPass<S>& workspace() {
  thread_local ForwardPass<S> fp;
  return fp;
}

template <class S>
void check_inputs(const Points& positions, const GlobalFeatures& global,
                  const DenoiserParams<S>& params, const PeriodicBox& box,
                  const ParamLayout& layout) {
  if (box.dims() != 3 || positions.cols() != 3) {
    throw InvalidArgument("predict_noise: positions must be N x 3 in a 3-D box");
  }
  if (params.values.size() != layout.size()) {
    throw InvalidArgument("predict_noise: parameter vector has " +
                          std::to_string(params.values.size()) + " entries, config needs " +
                          std::to_string(layout.size()));
  }
  if (global.width() != params.config.n_global) {
    throw InvalidArgument("predict_noise: global feature width " + std::to_string(global.width()) +
                          " does not match config width " + std::to_string(params.config.n_global));
  }
  if (static_cast<std::size_t>(positions.rows()) <= params.config.k_neighbors) {
    throw InvalidArgument("predict_noise: need more than k_neighbors = " +
                          std::to_string(params.config.k_neighbors) + " particles");
  }
}

// Returns the 3 x N noise estimate (a reference into the workspace).
template <class S>
const Mat<S>& forward(const Points& positions, const GlobalFeatures& global,
                      const DenoiserParams<S>& params, const PeriodicBox& box,
                      const ParamLayout& layout, ForwardPass<S>& fp) {
  check_inputs(positions, global, params, box, layout);
  const DenoiserConfig& cfg = params.config;
  fp.graph = knn_graph(positions, cfg.k_neighbors, box);
  fp.disp = fp.graph.displacement.transpose().template cast<S>();
  const std::vector<double> gv = global.values();
  fp.global.resize(static_cast<Eigen::Index>(gv.size()));
  for (std::size_t i = 0; i < gv.size(); ++i) fp.global[static_cast<Eigen::Index>(i)] = static_cast<S>(gv[i]);
  fp.conv_global = cfg.concat_global ? fp.global : VecS<S>();

  fp.weights = Eigen::Map<const VecS<S>>(params.values.data(), static_cast<Eigen::Index>(params.size()));
  const S* base = fp.weights.data();
  fp.conv.resize(cfg.n_layers + 1);
  fp.features.resize(cfg.n_layers + 1);
  conv_forward<S>(nullptr, fp.disp, fp.graph, fp.global, MlpView<S>{base, &layout.input_conv()},
                  cfg.activation, fp.conv[0], fp.features[0]);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    conv_forward<S>(&fp.features[l], fp.disp, fp.graph, fp.conv_global,
                    MlpView<S>{base, &layout.conv(l)}, cfg.activation, fp.conv[l + 1],
                    fp.features[l + 1]);
    if (cfg.residual) fp.features[l + 1] += fp.features[l];
  }

  const Mat<S>& f = fp.features.back();
  const Eigen::Index g_width = fp.conv_global.size();
  Mat<S>& x = fp.out.input;
  x.resize(g_width + f.rows(), f.cols());
  if (g_width > 0) x.topRows(g_width) = fp.conv_global.replicate(1, f.cols());
  x.bottomRows(f.rows()) = f;
  return mlp_forward<S>(MlpView<S>{base, &layout.output()}, cfg.activation, fp.out);
}

// Expects dL/dy (3 x N) in fp.out.dz; accumulates parameter gradients.
template <class S>
void backward(ForwardPass<S>& fp, const DenoiserParams<S>& params, const ParamLayout& layout,
              S* grad_base) {
  const DenoiserConfig& cfg = params.config;
  const S* base = fp.weights.data();
  const Mat<S>& dx = mlp_backward<S>(MlpView<S>{base, &layout.output()},
                                     GradView<S>{grad_base, &layout.output()}, cfg.activation, fp.out);
  const auto f_width = static_cast<Eigen::Index>(cfg.hidden);
  fp.df = dx.bottomRows(f_width);
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    if (cfg.residual) {
      fp.dfin = fp.df;
    } else {
      fp.dfin.setZero(f_width, fp.df.cols());
    }
    conv_backward<S>(&fp.features[l], fp.disp, fp.graph, fp.conv_global,
                     MlpView<S>{base, &layout.conv(l)}, GradView<S>{grad_base, &layout.conv(l)},
                     cfg.activation, fp.conv[l + 1], fp.df, &fp.dfin);
    fp.df.swap(fp.dfin);
  }
  conv_backward<S>(nullptr, fp.disp, fp.graph, fp.global, MlpView<S>{base, &layout.input_conv()},
                   GradView<S>{grad_base, &layout.input_conv()}, cfg.activation, fp.conv[0], fp.df,
                   nullptr);
}

}  // namespace

template <class S>
NodeMatrix<S> pbc_conv(const NodeMatrix<S>* node_features, const NeighborGraph& graph,
                       std::span<const S> global, const MlpView<S>& mlp, Activation activation) {
  if (graph.displacement.cols() != 3) throw InvalidArgument("pbc_conv: graph must be 3-D");
  const Mat<S> disp = graph.displacement.transpose().template cast<S>();
  VecS<S> g(static_cast<Eigen::Index>(global.size()));
  for (std::size_t i = 0; i < global.size(); ++i) g[static_cast<Eigen::Index>(i)] = global[i];
  ConvCache<S> cache;
  Mat<S> out;
  if (node_features) {
    if (static_cast<std::size_t>(node_features->rows()) != graph.n_nodes) {
      throw InvalidArgument("pbc_conv: node feature rows do not match graph size");
    }
    const Mat<S> fin = node_features->transpose();
    conv_forward<S>(&fin, disp, graph, g, mlp, activation, cache, out);
  } else {
    conv_forward<S>(nullptr, disp, graph, g, mlp, activation, cache, out);
  }
  return out.transpose();
}

template <class S>
Points predict_noise(const Points& positions, const GlobalFeatures& global,
                     const DenoiserParams<S>& params, const PeriodicBox& box) {
  const ParamLayout layout(params.config);
  const Mat<S>& y = forward(positions, global, params, box, layout, workspace<S>());
  return y.transpose().template cast<double>();
}

template <class S>
LossAndGradients<S> loss_and_gradients(std::span<const TrainingItem> batch,
                                       const DenoiserParams<S>& params, const PeriodicBox& box) {
  if (batch.empty()) throw InvalidArgument("loss_and_gradients: empty batch");
  const ParamLayout layout(params.config);
  LossAndGradients<S> result;
  const auto n_items = static_cast<double>(batch.size());
  ForwardPass<S>& fp = workspace<S>();
  fp.grads.setZero(static_cast<Eigen::Index>(layout.size()));
  for (const TrainingItem& item : batch) {
    if (item.eps.rows() != item.x_t.rows() || item.eps.cols() != 3) {
      throw InvalidArgument("loss_and_gradients: eps must be N x 3");
    }
    const Mat<S>& y = forward(item.x_t, item.global, params, box, layout, fp);
    fp.out.dz = y - item.eps.transpose().template cast<S>();
    const auto n = static_cast<double>(y.cols());
    const double item_loss = static_cast<double>(fp.out.dz.squaredNorm()) / n;
    if (!std::isfinite(item_loss)) {
      throw TrainingDivergence("loss_and_gradients: non-finite loss");
    }
    result.loss += item_loss / n_items;
    fp.out.dz *= static_cast<S>(2.0 / (n * n_items));
    backward(fp, params, layout, fp.grads.data());
  }
  result.grads.assign(fp.grads.data(), fp.grads.data() + fp.grads.size());
  for (S gval : result.grads) {
    if (!std::isfinite(static_cast<double>(gval))) {
      throw TrainingDivergence("loss_and_gradients: non-finite gradient");
    }
  }
  return result;
}

#define MDDM_INSTANTIATE(S)                                                                        \
  template NodeMatrix<S> pbc_conv<S>(const NodeMatrix<S>*, const NeighborGraph&, std::span<const S>, \
                                     const MlpView<S>&, Activation);                               \
  template Points predict_noise<S>(const Points&, const GlobalFeatures&, const DenoiserParams<S>&,  \
                                   const PeriodicBox&);                                            \
  template LossAndGradients<S> loss_and_gradients<S>(std::span<const TrainingItem>,                 \
                                                     const DenoiserParams<S>&, const PeriodicBox&);

MDDM_INSTANTIATE(float)
MDDM_INSTANTIATE(double)

#undef MDDM_INSTANTIATE

}  // namespace mddm
