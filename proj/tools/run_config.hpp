#pragma once

#include "mddm/denoiser.hpp"
#include "mddm/diffusion.hpp"
#include "mddm/md.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mddm::cli {

// Bad flags, unknown keys or malformed values. Maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inclusive range with a number of evenly spaced points.
struct Axis {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 1;

  double at(std::size_t i) const;
};

/**
 * Flat "section.key = value" configuration. Layers apply in order: built-in
 * defaults, then a config file, then --set overrides. Files may group keys
 * under [section] headers; '#' starts a comment.
 */
class RunConfig {
 public:
  RunConfig();

  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin);
  // "key=value"
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;
  Axis get_axis(const std::string& prefix) const;

  // Every key with its value and description, grouped by section.
  std::string dump(bool with_help = false) const;

  DiffusionSchedule schedule() const;
  DenoiserConfig denoiser(bool conditional) const;
  TrainConfig training() const;
  MDConfig md() const;
  std::uint64_t seed() const { return get_u64("seed"); }

 private:
  struct Entry {
    std::string value;
    std::string help;
  };
  std::map<std::string, Entry> entries_;
};

// Deterministic per-item seed derived from a base seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t item);

}  // namespace mddm::cli
