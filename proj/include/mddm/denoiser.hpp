#pragma once

#include "mddm/conformation.hpp"
#include "mddm/pbc.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mddm {

enum class Activation : std::uint8_t { kSiLU = 0, kSoftplus = 1, kTanh = 2 };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/**
 * Shape of the periodic graph-convolution denoiser.
 *
 * n_global is the width of the global feature vector g: 1 (t/T only) for
 * unconditional models, 4 (t/T plus rescaled k, phi, T) for conditional ones.
 */
struct DenoiserConfig {
  std::size_t n_layers = 8;
  std::size_t hidden = 32;
  std::size_t k_neighbors = 32;
  std::size_t n_global = 1;
  std::vector<std::size_t> conv_mlp_hidden{32, 32};
  std::vector<std::size_t> out_mlp_hidden{128, 128};
  bool residual = true;
  bool concat_global = true;
  Activation activation = Activation::kSiLU;

  static constexpr std::size_t kDims = 3;
  static constexpr std::size_t kOut = 3;

  bool conditional() const noexcept { return n_global == 4; }
  void validate() const;
  bool operator==(const DenoiserConfig&) const = default;
};

// Global input vector: diffusion progress plus an optional condition
// already rescaled to [-1, 1] over the dataset ranges.
struct GlobalFeatures {
  double t_frac = 0.0;
  std::optional<std::array<double, 3>> condition;

  static GlobalFeatures from_condition(double t_frac, const std::optional<Condition>& c);
  std::size_t width() const noexcept { return condition ? 4 : 1; }
  std::vector<double> values() const;
};

// Affine map of MD inputs onto [-1, 1] over the dataset parameter ranges.
std::array<double, 3> rescale_condition(const Condition& c);

// Offsets of every weight matrix (row-major out x in) and bias in the flat vector.
struct MlpLayout {
  std::vector<std::size_t> sizes;  // input width, hidden widths..., output width
  std::vector<std::size_t> weight_offset;
  std::vector<std::size_t> bias_offset;

  std::size_t n_linear() const noexcept { return sizes.size() - 1; }
};

/**
 * Flat parameter indexing. MLP 0 is the input convolution, MLPs 1..n_layers
 * are the stacked convolutions, and the last MLP maps node features to noise.
 */
class ParamLayout {
 public:
  explicit ParamLayout(const DenoiserConfig& config);

  std::size_t size() const noexcept { return total_; }
  const MlpLayout& mlp(std::size_t i) const { return mlps_[i]; }
  std::size_t n_mlps() const noexcept { return mlps_.size(); }
  const MlpLayout& input_conv() const { return mlps_.front(); }
  const MlpLayout& conv(std::size_t layer) const { return mlps_[1 + layer]; }
  const MlpLayout& output() const { return mlps_.back(); }

 private:
  std::vector<MlpLayout> mlps_;
  std::size_t total_ = 0;
};

std::size_t parameter_count(const DenoiserConfig& config);

template <class S>
struct DenoiserParams {
  DenoiserConfig config;
  std::vector<S> values;

  std::size_t size() const noexcept { return values.size(); }

  template <class T>
  DenoiserParams<T> cast() const {
    DenoiserParams<T> out{config, std::vector<T>(values.size())};
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<T>(values[i]);
    return out;
  }
};

// Weights ~ U(-sqrt(1/fan_in), +sqrt(1/fan_in)), biases zero; deterministic in seed.
DenoiserParams<double> init_params(const DenoiserConfig& config, std::uint64_t seed);

template <class S>
using NodeMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Read-only view of one MLP inside a flat parameter vector.
template <class S>
struct MlpView {
  const S* base;
  const MlpLayout* layout;

  using WeightMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using BiasMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;

  WeightMap weight(std::size_t l) const {
    return WeightMap(base + layout->weight_offset[l], static_cast<Eigen::Index>(layout->sizes[l + 1]),
                     static_cast<Eigen::Index>(layout->sizes[l]));
  }
  BiasMap bias(std::size_t l) const {
    return BiasMap(base + layout->bias_offset[l], static_cast<Eigen::Index>(layout->sizes[l + 1]));
  }
};

/**
 * One periodic graph convolution:
 *   f'_i = max_{j in N(i)} MLP(disp(i->j) || f_i || f_j - f_i || g)
 * with the max taken per output channel. With node_features == nullptr the
 * layer is the input convolution and consumes disp(i->j) || g only. Pass an
 * empty `global` when the MLP was built without global inputs.
 */
template <class S>
NodeMatrix<S> pbc_conv(const NodeMatrix<S>* node_features, const NeighborGraph& graph,
                       std::span<const S> global, const MlpView<S>& mlp, Activation activation);

// Per-particle noise estimate (N x 3) for wrapped positions in `box`.
template <class S>
Points predict_noise(const Points& positions, const GlobalFeatures& global,
                     const DenoiserParams<S>& params, const PeriodicBox& box);

struct TrainingItem {
  Points x_t;        // noised positions in box units, wrapped
  GlobalFeatures global;
  Points eps;        // target noise, N x 3
};

template <class S>
struct LossAndGradients {
  double loss = 0.0;
  std::vector<S> grads;
};

// Mean over items and particles of |eps - eps_hat|^2 with exact reverse-mode gradients.
template <class S>
LossAndGradients<S> loss_and_gradients(std::span<const TrainingItem> batch,
                                       const DenoiserParams<S>& params, const PeriodicBox& box);

}  // namespace mddm
