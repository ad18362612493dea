#pragma once

#include "mddm/denoiser.hpp"
#include "mddm/diffusion.hpp"

#include <filesystem>

namespace mddm {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct TrainingMetadata {
  std::size_t epochs_completed = 0;
  std::uint64_t seed = 0;
  std::size_t n_particles = 0;  // system size the model was trained on
  std::vector<double> box_lengths;
  bool diverged = false;
};

struct Checkpoint {
  DenoiserParams<float> params;
  std::size_t schedule_steps = 500;
  double schedule_offset = 0.008;
  TrainingMetadata meta;
};

/**
 * Binary layout (little-endian):
 *   "MDDMCKPT" u32 version
 *   u64 n_layers, hidden, k_neighbors, n_global
 *   u64 count + u64[] conv_mlp_hidden, u64 count + u64[] out_mlp_hidden
 *   u8 residual, u8 concat_global, u8 activation
 *   u64 schedule steps, f64 schedule offset
 *   u64 epochs_completed, u64 seed, u64 n_particles,
 *   u64 count + f64[] box lengths, u8 diverged
 *   u64 parameter count + f32[] parameters
 */
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mddm
