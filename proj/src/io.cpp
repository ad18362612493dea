#include "mddm/io.hpp"

#include "mddm/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace mddm {

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& value) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc() && ptr == end;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

// Line reader that tracks 1-based line numbers for error messages.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_;
    return true;
  }
  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::string require_line(LineReader& r, const std::string& section) {
  std::string line;
  if (!r.next(line)) throw ParseError("unexpected end of file in " + section + " section", r.line() + 1);
  return line;
}

void expect_item(LineReader& r, const std::string& line, std::string_view item) {
  const std::string prefix = "ITEM: " + std::string(item);
  const bool match = line.rfind(prefix, 0) == 0 &&
                     (line.size() == prefix.size() || line[prefix.size()] == ' ' ||
                      line[prefix.size()] == '\r');
  if (!match) {
    throw ParseError("expected '" + prefix + "', got '" + line + "'", r.line());
  }
}

const std::set<std::string, std::less<>>& known_dump_columns() {
  static const std::set<std::string, std::less<>> cols{
      "id", "type", "mol", "element", "mass", "q",  "x",  "y",  "z",  "xs", "ys", "zs",
      "xu", "yu",   "zu",  "xsu",     "ysu",  "zsu", "ix", "iy", "iz", "vx", "vy", "vz",
      "fx", "fy",   "fz"};
  return cols;
}

}  // namespace

std::vector<Conformation> parse_lammps_dump(std::istream& in) {
  LineReader reader(in);
  std::vector<Conformation> out;
  std::string line;
  while (reader.next(line)) {
    if (is_blank(line)) continue;
    expect_item(reader, line, "TIMESTEP");
    line = require_line(reader, "TIMESTEP");
    std::int64_t timestep = 0;
    {
      auto tok = split_ws(line);
      if (tok.size() != 1 || !parse_number(tok[0], timestep)) {
        throw ParseError("bad timestep '" + line + "'", reader.line());
      }
    }

    expect_item(reader, require_line(reader, "TIMESTEP"), "NUMBER OF ATOMS");
    line = require_line(reader, "NUMBER OF ATOMS");
    std::size_t n_atoms = 0;
    {
      auto tok = split_ws(line);
      if (tok.size() != 1 || !parse_number(tok[0], n_atoms) || n_atoms == 0) {
        throw ParseError("bad atom count '" + line + "'", reader.line());
      }
    }

    line = require_line(reader, "NUMBER OF ATOMS");
    expect_item(reader, line, "BOX BOUNDS");
    if (line.find("xy") != std::string::npos) {
      throw ParseError("triclinic boxes are not supported", reader.line());
    }
    std::array<double, 3> lo{}, len{};
    for (int d = 0; d < 3; ++d) {
      line = require_line(reader, "BOX BOUNDS");
      auto tok = split_ws(line);
      double a = 0, b = 0;
      if (tok.size() != 2 || !parse_number(tok[0], a) || !parse_number(tok[1], b) || !(b > a)) {
        throw ParseError("bad box bounds '" + line + "'", reader.line());
      }
      lo[d] = a;
      len[d] = b - a;
    }

    line = require_line(reader, "BOX BOUNDS");
    expect_item(reader, line, "ATOMS");
    auto header = split_ws(std::string_view(line).substr(std::strlen("ITEM: ATOMS")));
    int id_col = -1;
    std::array<int, 3> xyz{-1, -1, -1};
    bool scaled = false;
    for (std::size_t c = 0; c < header.size(); ++c) {
      const std::string_view name = header[c];
      if (!known_dump_columns().contains(name)) {
        throw ParseError("unknown ATOMS column '" + std::string(name) + "'", reader.line());
      }
      const int ci = static_cast<int>(c);
      if (name == "id") id_col = ci;
      static constexpr std::array<std::array<std::string_view, 3>, 4> families{
          {{"x", "y", "z"}, {"xu", "yu", "zu"}, {"xs", "ys", "zs"}, {"xsu", "ysu", "zsu"}}};
      for (std::size_t f = 0; f < families.size(); ++f) {
        for (int d = 0; d < 3; ++d) {
          if (name != families[f][static_cast<std::size_t>(d)]) continue;
          if (xyz[static_cast<std::size_t>(d)] >= 0) {
            throw ParseError("more than one coordinate column for axis " + std::to_string(d),
                             reader.line());
          }
          xyz[static_cast<std::size_t>(d)] = ci;
          const bool s = f >= 2;
          if (d > 0 && s != scaled) throw ParseError("mixed scaled/unscaled columns", reader.line());
          scaled = s;
        }
      }
    }
    if (id_col < 0) throw ParseError("ATOMS header lacks an id column", reader.line());
    if (std::any_of(xyz.begin(), xyz.end(), [](int c) { return c < 0; })) {
      throw ParseError("ATOMS header lacks coordinate columns", reader.line());
    }

    std::vector<std::pair<std::int64_t, std::array<double, 3>>> atoms;
    atoms.reserve(n_atoms);
    for (std::size_t a = 0; a < n_atoms; ++a) {
      line = require_line(reader, "ATOMS");
      auto tok = split_ws(line);
      if (tok.size() != header.size()) {
        throw ParseError("expected " + std::to_string(header.size()) + " columns, got " +
                             std::to_string(tok.size()),
                         reader.line());
      }
      std::int64_t id = 0;
      if (!parse_number(tok[static_cast<std::size_t>(id_col)], id)) {
        throw ParseError("bad atom id", reader.line());
      }
      std::array<double, 3> p{};
      for (std::size_t d = 0; d < 3; ++d) {
        double v = 0;
        if (!parse_number(tok[static_cast<std::size_t>(xyz[d])], v) || !std::isfinite(v)) {
          throw ParseError("bad coordinate value", reader.line());
        }
        p[d] = scaled ? v * len[d] : v - lo[d];
      }
      atoms.emplace_back(id, p);
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t a = 1; a < atoms.size(); ++a) {
      if (atoms[a].first == atoms[a - 1].first) {
        throw ParseError("duplicate atom id " + std::to_string(atoms[a].first), reader.line());
      }
    }

    Conformation conf;
    conf.box = PeriodicBox({len[0], len[1], len[2]});
    conf.coords.resize(static_cast<Eigen::Index>(n_atoms), 3);
    for (std::size_t a = 0; a < n_atoms; ++a) {
      for (std::size_t d = 0; d < 3; ++d) {
        conf.coords(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(d)) = atoms[a].second[d];
      }
    }
    wrap_in_place(conf.coords, conf.box);
    conf.provenance.source = Source::kLammpsDump;
    conf.provenance.timestep = timestep;
    out.push_back(std::move(conf));
  }
  return out;
}

void write_lammps_dump(std::ostream& out, const Conformation& conf, bool scaled) {
  conf.validate();
  if (conf.box.dims() != 3) throw InvalidArgument("write_lammps_dump: box must be 3-D");
  out << "ITEM: TIMESTEP\n" << conf.provenance.timestep << '\n';
  out << "ITEM: NUMBER OF ATOMS\n" << conf.size() << '\n';
  out << "ITEM: BOX BOUNDS pp pp pp\n";
  out << std::setprecision(17);
  for (std::size_t d = 0; d < 3; ++d) out << 0.0 << ' ' << conf.box.length(d) << '\n';
  out << (scaled ? "ITEM: ATOMS id type xs ys zs\n" : "ITEM: ATOMS id type x y z\n");
  out << std::setprecision(6);
  for (std::size_t i = 0; i < conf.size(); ++i) {
    out << (i + 1) << " 1";
    for (std::size_t d = 0; d < 3; ++d) {
      double v = conf.coords(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
      if (scaled) v /= conf.box.length(d);
      out << ' ' << v;
    }
    out << '\n';
  }
}

std::string emit_lammps_script(const LammpsScriptParams& p) {
  std::ostringstream s;
  s << std::setprecision(17);
  const double ti = 10.0 * std::abs(p.temperature);
  s << "# OPP k = " << p.potential.k << ", phi = " << p.potential.phi << "\n"
    << "units lj\n"
       "atom_style atomic\n"
       "dimension 3\n"
       "boundary p p p\n"
       "\n"
       "region box block 0 10 0 10 0 10\n"
       "create_box 1 box\n"
       "\n"
       "lattice sc 1.0\n"
       "create_atoms 1 box\n"
       "\n"
       "pair_style table linear 1000\n"
    << "pair_coeff 1 1 " << p.table_path << " CUSTOM\n"
    << "\n"
       "mass 1 1.0\n"
       "\n"
       "velocity all create 1.0 12345 dist gaussian\n"
       "displace_atoms all random 0.1 0.1 0.1 12345\n"
       "\n"
       "neighbor 0.3 bin\n"
       "neigh_modify delay 0 every 1 check yes\n"
       "\n"
       "# Nose-Hoover Thermostat for NVT\n"
    << "fix 1 all nvt temp " << ti << ' ' << p.temperature << " $(100.0*dt)\n"
    << "\n"
       "timestep 0.005\n"
       "thermo 100\n"
       "thermo_style custom step temp pe ke etotal\n"
       "\n"
    << "run " << p.num_steps << '\n'
    << "dump 1 all atom " << p.dump_every << ' ' << p.dump_file << '\n'
    << "run " << p.num_steps << '\n';
  return s.str();
}

std::string write_table_file(const PotentialTable& table, const std::string& keyword) {
  if (table.rows.empty()) throw InvalidArgument("write_table_file: empty table");
  if (keyword.empty() || keyword.find_first_of(" \t\n") != std::string::npos) {
    throw InvalidArgument("write_table_file: keyword must be a single token");
  }
  std::ostringstream s;
  s << std::setprecision(15);
  s << "# OPP pair table: k = " << table.params.k << ", phi = " << table.params.phi
    << "; columns index r energy force\n\n";
  s << keyword << '\n' << "N " << table.rows.size() << "\n\n";
  for (const TableRow& row : table.rows) {
    s << row.index << ' ' << row.r << ' ' << row.energy << ' ' << row.force << '\n';
  }
  return s.str();
}

ParsedTable read_table_file(std::istream& in) {
  LineReader reader(in);
  ParsedTable out;
  std::string line;
  auto next_content = [&](const std::string& section) {
    while (true) {
      line = require_line(reader, section);
      const auto tok = split_ws(line);
      if (!tok.empty() && tok[0].front() != '#') return tok;
    }
  };
  auto tok = next_content("keyword");
  if (tok.size() != 1) throw ParseError("expected a keyword line", reader.line());
  out.keyword = std::string(tok[0]);
  tok = next_content("N");
  std::size_t n = 0;
  if (tok.size() < 2 || tok[0] != "N" || !parse_number(tok[1], n) || n < 2) {
    throw ParseError("expected 'N <points>'", reader.line());
  }
  out.rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    tok = next_content("table rows");
    TableRow row{};
    if (tok.size() != 4 || !parse_number(tok[0], row.index) || !parse_number(tok[1], row.r) ||
        !parse_number(tok[2], row.energy) || !parse_number(tok[3], row.force)) {
      throw ParseError("expected 'index r energy force'", reader.line());
    }
    if (row.index != i + 1) throw ParseError("table rows out of order", reader.line());
    out.rows.push_back(row);
  }
  return out;
}

// ---- symmetries ----

const std::vector<CubicSymmetry>& cubic_symmetries() {
  static const std::vector<CubicSymmetry> ops = [] {
    std::vector<CubicSymmetry> v;
    std::array<int, 3> perm{0, 1, 2};
    do {
      for (int bits = 0; bits < 8; ++bits) {
        CubicSymmetry op{perm, {}};
        for (int d = 0; d < 3; ++d) op.sign[static_cast<std::size_t>(d)] = (bits >> d) & 1 ? -1 : 1;
        v.push_back(op);
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return v;
  }();
  return ops;
}

std::size_t compose_symmetries(std::size_t a, std::size_t b) {
  const auto& ops = cubic_symmetries();
  const CubicSymmetry& A = ops.at(a);
  const CubicSymmetry& B = ops.at(b);
  CubicSymmetry c{};
  for (std::size_t d = 0; d < 3; ++d) {
    const auto pb = static_cast<std::size_t>(B.perm[d]);
    c.perm[d] = A.perm[pb];
    c.sign[d] = B.sign[d] * A.sign[pb];
  }
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (ops[i].perm == c.perm && ops[i].sign == c.sign) return i;
  }
  throw std::logic_error("compose_symmetries: group not closed");
}

Conformation apply_symmetry(const Conformation& conf, std::size_t id) {
  if (conf.box.dims() != 3 || !conf.box.is_cubic()) {
    throw InvalidArgument("augmentation requires a cubic 3-D box");
  }
  const CubicSymmetry& op = cubic_symmetries().at(id);
  Conformation out = conf;
  if (id == 0) return out;
  const double L = conf.box.length(0);
  for (Eigen::Index i = 0; i < conf.coords.rows(); ++i) {
    for (std::size_t d = 0; d < 3; ++d) {
      const double x = conf.coords(i, op.perm[d]);
      // Reflection about the centre L/2 maps x to L - x.
      out.coords(i, static_cast<Eigen::Index>(d)) = op.sign[d] > 0 ? x : L - x;
    }
  }
  wrap_in_place(out.coords, out.box);
  return out;
}

std::vector<Conformation> augment(const Conformation& conf) {
  std::vector<Conformation> out;
  out.reserve(cubic_symmetries().size());
  for (std::size_t id = 0; id < cubic_symmetries().size(); ++id) out.push_back(apply_symmetry(conf, id));
  return out;
}

Conformation random_translate(const Conformation& conf, std::mt19937_64& rng) {
  Conformation out = conf;
  for (std::size_t d = 0; d < conf.box.dims(); ++d) {
    std::uniform_real_distribution<double> shift(0.0, conf.box.length(d));
    out.coords.col(static_cast<Eigen::Index>(d)).array() += shift(rng);
  }
  wrap_in_place(out.coords, out.box);
  return out;
}

// ---- native format ----

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw InvalidArgument("unknown split '" + s + "'");
}

namespace {

constexpr char kConfMagic[8] = {'M', 'D', 'D', 'M', 'C', 'O', 'N', 'F'};

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw LoadError(path.string() + ": truncated file");
  return v;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f << text;
    f.flush();
    if (!f) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

void save_conformation(const std::filesystem::path& path, const Conformation& conf) {
  conf.validate();
  std::ostringstream s(std::ios::binary);
  s.write(kConfMagic, sizeof(kConfMagic));
  put<std::uint32_t>(s, kConformationFormatVersion);
  put<std::uint32_t>(s, static_cast<std::uint32_t>(conf.box.dims()));
  for (double l : conf.box.lengths()) put(s, l);
  put<std::uint8_t>(s, conf.condition ? 1 : 0);
  const Condition c = conf.condition.value_or(Condition{});
  put(s, c.k);
  put(s, c.phi);
  put(s, c.temperature);
  put<std::uint8_t>(s, static_cast<std::uint8_t>(conf.provenance.source));
  put<std::uint64_t>(s, conf.provenance.seed);
  put<std::int64_t>(s, conf.provenance.timestep);
  put<std::uint64_t>(s, conf.size());
  for (Eigen::Index i = 0; i < conf.coords.rows(); ++i) {
    for (Eigen::Index d = 0; d < conf.coords.cols(); ++d) put(s, conf.coords(i, d));
  }
  write_file_atomic(path, s.str());
}

Conformation load_conformation(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[sizeof(kConfMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kConfMagic, sizeof(magic)) != 0) {
    throw LoadError(path.string() + ": not a conformation file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kConformationFormatVersion) {
    throw LoadError(path.string() + ": unsupported format version " + std::to_string(version));
  }
  const auto dims = get<std::uint32_t>(in, path);
  if (dims < 1 || dims > 16) throw LoadError(path.string() + ": bad dimension count");
  std::vector<double> lengths(dims);
  for (double& l : lengths) l = get<double>(in, path);

  Conformation conf;
  try {
    conf.box = PeriodicBox(lengths);
  } catch (const std::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  const auto has_condition = get<std::uint8_t>(in, path);
  Condition c;
  c.k = get<double>(in, path);
  c.phi = get<double>(in, path);
  c.temperature = get<double>(in, path);
  if (has_condition > 1) throw LoadError(path.string() + ": bad condition flag");
  if (has_condition) conf.condition = c;
  const auto source = get<std::uint8_t>(in, path);
  if (source > static_cast<std::uint8_t>(Source::kSampled)) {
    throw LoadError(path.string() + ": bad source tag");
  }
  conf.provenance.source = static_cast<Source>(source);
  conf.provenance.seed = get<std::uint64_t>(in, path);
  conf.provenance.timestep = get<std::int64_t>(in, path);
  const auto n = get<std::uint64_t>(in, path);
  if (n == 0 || n > (1ULL << 32)) throw LoadError(path.string() + ": bad particle count");
  conf.coords.resize(static_cast<Eigen::Index>(n), dims);
  in.read(reinterpret_cast<char*>(conf.coords.data()),
          static_cast<std::streamsize>(n * dims * sizeof(double)));
  if (!in) throw LoadError(path.string() + ": truncated coordinates");
  if (in.peek() != std::char_traits<char>::eof()) throw LoadError(path.string() + ": trailing data");
  try {
    conf.validate();
  } catch (const std::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return conf;
}

void save_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  nlohmann::json j;
  j["format"] = "mddm-manifest";
  j["version"] = kManifestFormatVersion;
  j["records"] = nlohmann::json::array();
  std::set<std::string> seen;
  for (const ManifestRecord& r : manifest.records) {
    if (!seen.insert(r.file).second) throw InvalidArgument("duplicate manifest path " + r.file);
    nlohmann::json rec;
    rec["file"] = r.file;
    if (r.condition) {
      rec["condition"] = {{"k", r.condition->k},
                          {"phi", r.condition->phi},
                          {"temperature", r.condition->temperature}};
    } else {
      rec["condition"] = nullptr;
    }
    rec["split"] = to_string(r.split);
    rec["augmentation"] = r.augmentation;
    j["records"].push_back(std::move(rec));
  }
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  DatasetManifest m;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format") != "mddm-manifest") throw LoadError("not a dataset manifest");
    if (j.at("version").get<std::uint32_t>() != kManifestFormatVersion) {
      throw LoadError("unsupported manifest version");
    }
    std::set<std::string> seen;
    for (const auto& rec : j.at("records")) {
      ManifestRecord r;
      r.file = rec.at("file").get<std::string>();
      if (!seen.insert(r.file).second) throw LoadError("duplicate path " + r.file);
      if (!rec.at("condition").is_null()) {
        const auto& c = rec.at("condition");
        r.condition = Condition{c.at("k").get<double>(), c.at("phi").get<double>(),
                                c.at("temperature").get<double>()};
      }
      r.split = split_from_string(rec.at("split").get<std::string>());
      r.augmentation = rec.at("augmentation").get<std::size_t>();
      m.records.push_back(std::move(r));
    }
  } catch (const LoadError& e) {
    throw LoadError(manifest_path.string() + ": " + e.what());
  } catch (const std::exception& e) {
    throw LoadError(manifest_path.string() + ": " + e.what());
  }
  return m;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<DatasetEntry>& entries) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  for (const DatasetEntry& e : entries) {
    const std::filesystem::path file = dir / e.record.file;
    std::filesystem::create_directories(file.parent_path());
    save_conformation(file, e.conformation);
    m.records.push_back(e.record);
  }
  save_manifest(dir, m);
}

std::vector<DatasetEntry> load_dataset(const std::filesystem::path& manifest_path,
                                       std::optional<Split> split) {
  const DatasetManifest m = load_manifest(manifest_path);
  const std::filesystem::path dir = manifest_path.parent_path();
  std::vector<DatasetEntry> out;
  for (const ManifestRecord& r : m.records) {
    if (split && r.split != *split) continue;
    Conformation c = load_conformation(dir / r.file);
    if (c.condition != r.condition) {
      throw LoadError(r.file + ": condition differs from manifest");
    }
    out.push_back({r, std::move(c)});
  }
  return out;
}

}  // namespace mddm
