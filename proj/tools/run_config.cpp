#include "run_config.hpp"

#include "mddm/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace mddm::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Default {
  const char* key;
  const char* value;
  const char* help;
};

// clang-format off
constexpr Default kDefaults[] = {
    {"seed", "0", "base seed; every command derives per-item seeds from it"},
    {"schedule.steps", "500", "number of diffusion steps T"},
    {"schedule.offset", "0.008", "cosine schedule offset s"},
    {"denoiser.layers", "8", "stacked periodic graph convolutions"},
    {"denoiser.hidden", "32", "node feature width"},
    {"denoiser.k", "32", "nearest neighbours per particle"},
    {"denoiser.conv_hidden", "32,32", "hidden widths of each convolution MLP"},
    {"denoiser.out_hidden", "128,128", "hidden widths of the output MLP"},
    {"denoiser.activation", "silu", "silu | softplus | tanh"},
    {"denoiser.residual", "true", "residual connections between convolutions"},
    {"denoiser.concat_global", "true", "feed global features to every convolution"},
    {"train.epochs", "800", "passes over the training set"},
    {"train.lr", "0.005", "initial Adam learning rate"},
    {"train.lr_decay", "0.95", "multiplicative learning-rate decay"},
    {"train.lr_decay_every", "100", "epochs between decays"},
    {"train.augmentations", "48", "cubic symmetry images per conformation (1..48)"},
    {"train.checkpoint_every", "50", "epochs between checkpoint writes (0 = only at the end)"},
    {"md.n", "216", "particles per simulation"},
    {"md.density", "1.0", "number density"},
    {"md.dt", "0.005", "time step"},
    {"md.anneal_steps", "20000", "steps of the linear temperature ramp"},
    {"md.equil_steps", "20000", "steps held at the target temperature"},
    {"md.start_factor", "10", "initial temperature as a multiple of the target"},
    {"md.cutoff", "3.0", "pair cutoff radius"},
    {"md.shift", "energy", "energy | force cutoff shifting"},
    {"md.friction", "1.0", "Langevin damping rate"},
    {"md.lattice_noise", "0.1", "uniform jitter of the initial lattice"},
    {"md.log_every", "100", "thermo log interval"},
    {"sweep.k.lo", "1.0", "lowest k"},
    {"sweep.k.hi", "15.0", "highest k"},
    {"sweep.k.count", "2", "grid points along k"},
    {"sweep.phi.lo", "0.0", "lowest phi"},
    {"sweep.phi.hi", "6.0", "highest phi"},
    {"sweep.phi.count", "2", "grid points along phi"},
    {"sweep.T.lo", "0.01", "lowest target temperature"},
    {"sweep.T.hi", "0.05", "highest target temperature"},
    {"sweep.T.count", "2", "grid points along T"},
    {"sweep.test_count", "0", "extra test-split conditions drawn uniformly within the ranges"},
    {"lammps.steps", "100000", "run length per stage in emitted scripts"},
    {"lammps.dump_every", "1000", "dump interval in emitted scripts"},
    {"rdf.bins", "100", "histogram bins up to half the box side"},
    {"sample.trace_steps", "500,490,100,10,0", "steps saved by sample --trace"},
};
// clang-format on

template <class T>
T parse_or_throw(const std::string& key, const std::string& text) {
  T out{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw UsageError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return out;
}

}  // namespace

double Axis::at(std::size_t i) const {
  if (count <= 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

RunConfig::RunConfig() {
  for (const Default& d : kDefaults) entries_[d.key] = {d.value, d.help};
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  load_text(text.str(), path.string());
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(origin + ":" + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    set(section.empty() ? key : section + "." + key, trim(line.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw UsageError("unknown config key '" + key + "'");
  it->second.value = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second.value;
}

double RunConfig::get_double(const std::string& key) const { return parse_or_throw<double>(key, get(key)); }

std::size_t RunConfig::get_size(const std::string& key) const {
  return parse_or_throw<std::size_t>(key, get(key));
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return parse_or_throw<std::uint64_t>(key, get(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_or_throw<std::size_t>(key, item));
  }
  return out;
}

Axis RunConfig::get_axis(const std::string& prefix) const {
  Axis a{get_double(prefix + ".lo"), get_double(prefix + ".hi"), get_size(prefix + ".count")};
  if (a.count == 0 || a.hi < a.lo) throw UsageError("sweep axis '" + prefix + "' is empty or reversed");
  return a;
}

std::string RunConfig::dump(bool with_help) const {
  std::ostringstream out;
  // Top-level keys first so that re-reading the output does not file them under a section.
  for (const auto& [key, entry] : entries_) {
    if (key.find('.') != std::string::npos) continue;
    if (with_help) out << "# " << entry.help << '\n';
    out << key << " = " << entry.value << '\n';
  }
  std::string section;
  for (const auto& [key, entry] : entries_) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    if (with_help) out << "# " << entry.help << '\n';
    out << key.substr(dot + 1) << " = " << entry.value << '\n';
  }
  return out.str();
}

DiffusionSchedule RunConfig::schedule() const {
  try {
    return build_schedule(get_size("schedule.steps"), get_double("schedule.offset"));
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

DenoiserConfig RunConfig::denoiser(bool conditional) const {
  DenoiserConfig c;
  c.n_layers = get_size("denoiser.layers");
  c.hidden = get_size("denoiser.hidden");
  c.k_neighbors = get_size("denoiser.k");
  c.n_global = conditional ? 4 : 1;
  c.conv_mlp_hidden = get_sizes("denoiser.conv_hidden");
  c.out_mlp_hidden = get_sizes("denoiser.out_hidden");
  c.residual = get_bool("denoiser.residual");
  c.concat_global = get_bool("denoiser.concat_global");
  try {
    c.activation = activation_from_string(get("denoiser.activation"));
    c.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return c;
}

TrainConfig RunConfig::training() const {
  TrainConfig t;
  t.epochs = get_size("train.epochs");
  t.learning_rate = get_double("train.lr");
  t.lr_decay = get_double("train.lr_decay");
  t.lr_decay_every = get_size("train.lr_decay_every");
  t.seed = seed();
  if (t.epochs == 0 || t.lr_decay_every == 0) throw UsageError("train.epochs and train.lr_decay_every must be positive");
  return t;
}

MDConfig RunConfig::md() const {
  MDConfig m;
  m.n_particles = get_size("md.n");
  m.number_density = get_double("md.density");
  m.dt = get_double("md.dt");
  m.anneal_steps = get_size("md.anneal_steps");
  m.equil_steps = get_size("md.equil_steps");
  m.start_factor = get_double("md.start_factor");
  m.cutoff = get_double("md.cutoff");
  const std::string& shift = get("md.shift");
  if (shift == "energy") {
    m.shift = CutoffShift::kEnergy;
  } else if (shift == "force") {
    m.shift = CutoffShift::kForce;
  } else {
    throw UsageError("md.shift must be 'energy' or 'force'");
  }
  m.friction = get_double("md.friction");
  m.lattice_noise = get_double("md.lattice_noise");
  m.log_every = get_size("md.log_every");
  m.seed = seed();
  try {
    m.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return m;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t item) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (item + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace mddm::cli
