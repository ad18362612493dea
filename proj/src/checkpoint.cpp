#include "mddm/checkpoint.hpp"

#include "mddm/errors.hpp"
#include "mddm/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace mddm {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'D', 'M', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    s_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_u64(std::size_t v) { put<std::uint64_t>(v); }
  void put_sizes(const std::vector<std::size_t>& v) {
    put_u64(v.size());
    for (std::size_t x : v) put_u64(x);
  }
  std::string str() const { return s_.str(); }

  std::ostringstream s_{std::ios::binary};
};

class Reader {
 public:
  Reader(std::istream& in, std::filesystem::path path) : in_(in), path_(std::move(path)) {}

  template <class T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) fail("truncated file");
    return v;
  }
  std::size_t get_count(std::size_t limit) {
    const auto n = get<std::uint64_t>();
    if (n > limit) fail("implausible element count");
    return static_cast<std::size_t>(n);
  }
  std::vector<std::size_t> get_sizes() {
    std::vector<std::size_t> v(get_count(64));
    for (auto& x : v) x = get_count(1u << 20);
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw LoadError(path_.string() + ": " + what);
  }

 private:
  std::istream& in_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const DenoiserConfig& c = ckpt.params.config;
  c.validate();
  if (ckpt.params.size() != parameter_count(c)) {
    throw InvalidArgument("save_checkpoint: parameter vector does not match config");
  }
  Writer w;
  w.s_.write(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointFormatVersion);
  w.put_u64(c.n_layers);
  w.put_u64(c.hidden);
  w.put_u64(c.k_neighbors);
  w.put_u64(c.n_global);
  w.put_sizes(c.conv_mlp_hidden);
  w.put_sizes(c.out_mlp_hidden);
  w.put<std::uint8_t>(c.residual);
  w.put<std::uint8_t>(c.concat_global);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.activation));
  w.put_u64(ckpt.schedule_steps);
  w.put<double>(ckpt.schedule_offset);
  w.put_u64(ckpt.meta.epochs_completed);
  w.put<std::uint64_t>(ckpt.meta.seed);
  w.put_u64(ckpt.meta.n_particles);
  w.put_u64(ckpt.meta.box_lengths.size());
  for (double l : ckpt.meta.box_lengths) w.put<double>(l);
  w.put<std::uint8_t>(ckpt.meta.diverged);
  w.put_u64(ckpt.params.size());
  for (float v : ckpt.params.values) w.put<float>(v);
  write_file_atomic(path, w.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Reader r(in, path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) r.fail("not a checkpoint file");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    r.fail("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  DenoiserConfig& c = ckpt.params.config;
  c.n_layers = r.get_count(1024);
  c.hidden = r.get_count(1u << 16);
  c.k_neighbors = r.get_count(1u << 16);
  c.n_global = r.get_count(16);
  c.conv_mlp_hidden = r.get_sizes();
  c.out_mlp_hidden = r.get_sizes();
  c.residual = r.get<std::uint8_t>() != 0;
  c.concat_global = r.get<std::uint8_t>() != 0;
  const auto act = r.get<std::uint8_t>();
  if (act > static_cast<std::uint8_t>(Activation::kTanh)) r.fail("unknown activation");
  c.activation = static_cast<Activation>(act);
  try {
    c.validate();
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  ckpt.schedule_steps = r.get_count(1u << 24);
  ckpt.schedule_offset = r.get<double>();
  ckpt.meta.epochs_completed = r.get_count(~0ULL);
  ckpt.meta.seed = r.get<std::uint64_t>();
  ckpt.meta.n_particles = r.get_count(1ULL << 32);
  ckpt.meta.box_lengths.resize(r.get_count(16));
  for (double& l : ckpt.meta.box_lengths) l = r.get<double>();
  ckpt.meta.diverged = r.get<std::uint8_t>() != 0;
  const std::size_t n = r.get_count(1ULL << 32);
  if (n != parameter_count(c)) r.fail("parameter count does not match stored config");
  ckpt.params.values.resize(n);
  in.read(reinterpret_cast<char*>(ckpt.params.values.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) r.fail("truncated parameters");
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing data");
  return ckpt;
}

}  // namespace mddm
