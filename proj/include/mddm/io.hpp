#pragma once

#include "mddm/conformation.hpp"
#include "mddm/potential.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mddm {

// ---- LAMMPS atom-style dumps ----

/**
 * Reads every snapshot in an atom-style dump. Scaled (xs ys zs) or unscaled
 * (x y z, xu yu zu) columns are detected from the ATOMS header; rows are
 * ordered by atom id and coordinates are shifted to a zero box origin and
 * wrapped. Orthogonal boxes only.
 */
std::vector<Conformation> parse_lammps_dump(std::istream& in);

// Writes one snapshot with columns "id type xs ys zs" (scaled) or "id type x y z",
// printed with 6 significant digits like LAMMPS does by default.
void write_lammps_dump(std::ostream& out, const Conformation& conf, bool scaled = true);

// ---- LAMMPS input script and pair table ----

struct LammpsScriptParams {
  OPPParams potential;  // recorded in a header comment
  double temperature = 0.0;
  std::size_t num_steps = 100000;
  std::size_t dump_every = 1000;
  std::string dump_file = "dump.atom";
  std::string table_path = "custom.table";
};

std::string emit_lammps_script(const LammpsScriptParams& params);

std::string write_table_file(const PotentialTable& table, const std::string& keyword = "CUSTOM");

struct ParsedTable {
  std::string keyword;
  std::vector<TableRow> rows;
};

ParsedTable read_table_file(std::istream& in);

// ---- cubic symmetry augmentation ----

// One of the 48 signed permutation matrices: out[d] = sign[d] * in[perm[d]].
struct CubicSymmetry {
  std::array<int, 3> perm;
  std::array<int, 3> sign;
};

// The 48 symmetries; index 0 is the identity.
const std::vector<CubicSymmetry>& cubic_symmetries();

// Index c such that applying a then b equals applying c.
std::size_t compose_symmetries(std::size_t a, std::size_t b);

// Applies symmetry `id` about the box centre, then re-wraps.
Conformation apply_symmetry(const Conformation& conf, std::size_t id);

// All 48 images of `conf`; requires a cubic box.
std::vector<Conformation> augment(const Conformation& conf);

// Uniform random shift of all particles followed by wrapping.
Conformation random_translate(const Conformation& conf, std::mt19937_64& rng);

// ---- native dataset ----

enum class Split : std::uint8_t { kTrain = 0, kTest = 1 };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestRecord {
  std::string file;  // relative to the manifest directory
  std::optional<Condition> condition;
  Split split = Split::kTrain;
  std::size_t augmentation = 0;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
};

inline constexpr std::uint32_t kConformationFormatVersion = 1;
inline constexpr std::uint32_t kManifestFormatVersion = 1;

// Binary conformation file, full double precision, little-endian host order.
void save_conformation(const std::filesystem::path& path, const Conformation& conf);
Conformation load_conformation(const std::filesystem::path& path);

// Writes manifest.json atomically (temp file + rename) into `dir`.
void save_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& manifest_path);

struct DatasetEntry {
  ManifestRecord record;
  Conformation conformation;
};

// Writes every conformation under `dir` and the manifest that lists them.
void save_dataset(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries);

// Loads records (optionally only one split) listed in `manifest_path`.
std::vector<DatasetEntry> load_dataset(const std::filesystem::path& manifest_path,
                                       std::optional<Split> split = std::nullopt);

// Writes `text` to `path` via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace mddm
