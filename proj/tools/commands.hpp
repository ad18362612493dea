#pragma once

#include "run_config.hpp"

#include "mddm/conformation.hpp"
#include "mddm/io.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mddm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

// Runs `fn(i)` for i in [0, count) on up to `jobs` threads. The first exception is rethrown.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct GenDataOptions {
  std::filesystem::path out;
  bool emit_lammps = false;
  std::size_t jobs = 1;
  bool dry_run = false;  // print the plan and runtime warning, run nothing
};

// Sweep grid (train split) followed by sweep.test_count random conditions (test split).
std::vector<std::pair<Condition, Split>> plan_sweep(const RunConfig& config);

int cmd_gen_data(const RunConfig& config, const GenDataOptions& opts, std::ostream& log);

struct TrainOptions {
  std::filesystem::path manifest;
  std::filesystem::path out;
  bool conditional = false;
  std::optional<std::size_t> record;  // unconditional: index into the train split
};

int cmd_train(const RunConfig& config, const TrainOptions& opts, std::ostream& log);

struct SampleOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::size_t count = 1;
  std::optional<Condition> condition;
  bool trace = false;
  std::size_t jobs = 1;
};

int cmd_sample(const RunConfig& config, const SampleOptions& opts, std::ostream& log);

struct EvalOptions {
  std::filesystem::path generated;  // manifest.json
  std::filesystem::path reference;  // manifest.json
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> summary_csv;
};

int cmd_eval(const RunConfig& config, const EvalOptions& opts, std::ostream& out);

struct RdfOptions {
  std::filesystem::path input;  // native conformation or LAMMPS dump
  std::filesystem::path csv;
  std::optional<std::filesystem::path> svg;
  std::size_t snapshot = 0;     // dump snapshot index
};

int cmd_rdf(const RunConfig& config, const RdfOptions& opts, std::ostream& log);

struct VerifyOptions {
  std::vector<std::string> suites;  // empty = all
  std::optional<std::filesystem::path> json;
};

int cmd_verify(const RunConfig& config, const VerifyOptions& opts, std::ostream& out);

// Reads a native conformation file or, when the text starts with "ITEM:", a LAMMPS dump.
Conformation load_any_conformation(const std::filesystem::path& path, std::size_t snapshot = 0);

// Self-contained SVG line plot of g(r).
std::string rdf_svg(const std::vector<double>& r, const std::vector<double>& g, const std::string& title);

}  // namespace mddm::cli
