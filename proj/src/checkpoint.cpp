#include "gcl/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "gcl/errors.hpp"

namespace gcl {

namespace {

constexpr char kMagic[8] = {'G', 'C', 'L', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError(path + ": truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw ParseError(path + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in, const std::string& path) {
  const std::uint64_t bits = get_u64(in, path);
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) put_f64(out, x);
}

void get_doubles(std::istream& in, const std::string& path, std::vector<double>& v) {
  for (double& x : v) x = get_f64(in, path);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp + "' for writing");
    out.write(kMagic, 8);
    put_u32(out, kVersion);
    out.put(static_cast<char>(ckpt.head));
    put_f64(out, ckpt.scale);

    const auto& net = ckpt.model.backbone;
    put_u32(out, static_cast<std::uint32_t>(net.input_dim()));
    put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) put_u32(out, static_cast<std::uint32_t>(layer.weight.cols));
    put_u32(out, static_cast<std::uint32_t>(ckpt.model.classifier.classes()));
    for (const auto& layer : net.layers) {
      put_doubles(out, layer.weight.data);
      put_doubles(out, layer.bias.data);
    }
    put_doubles(out, ckpt.model.classifier.weight.data);

    put_u32(out, static_cast<std::uint32_t>(ckpt.train_counts.size()));
    for (std::int64_t c : ckpt.train_counts) put_u64(out, static_cast<std::uint64_t>(c));
    put_u64(out, ckpt.iteration);
    put_u64(out, ckpt.config_hash);

    out.put(ckpt.velocity.empty() ? '\0' : '\1');
    for (const auto& v : ckpt.velocity) put_doubles(out, v);
    if (!out) throw DataError("write to '" + tmp + "' failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw DataError("cannot move checkpoint into place at '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw ParseError(path + ": not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kVersion) {
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  int head_byte = in.get();
  if (head_byte < 0) throw ParseError(path + ": truncated checkpoint");
  ckpt.head = static_cast<HeadKind>(head_byte);
  ckpt.scale = get_f64(in, path);

  const int input_dim = static_cast<int>(get_u32(in, path));
  const int num_layers = static_cast<int>(get_u32(in, path));
  if (num_layers < 1 || num_layers > 1024) throw ParseError(path + ": implausible layer count");
  std::vector<int> dims{input_dim};
  for (int l = 0; l < num_layers; ++l) dims.push_back(static_cast<int>(get_u32(in, path)));
  const int classes = static_cast<int>(get_u32(in, path));

  ckpt.model.backbone = make_mlp(dims);
  for (auto& layer : ckpt.model.backbone.layers) {
    get_doubles(in, path, layer.weight.data);
    get_doubles(in, path, layer.bias.data);
  }
  ckpt.model.classifier.weight = Tensor2(dims.back(), classes);
  get_doubles(in, path, ckpt.model.classifier.weight.data);

  const int count_entries = static_cast<int>(get_u32(in, path));
  ckpt.train_counts.resize(count_entries);
  for (auto& c : ckpt.train_counts) c = static_cast<std::int64_t>(get_u64(in, path));
  ckpt.iteration = get_u64(in, path);
  ckpt.config_hash = get_u64(in, path);

  const int has_velocity = in.get();
  if (has_velocity < 0) throw ParseError(path + ": truncated checkpoint");
  if (has_velocity) {
    for (std::size_t n : param_shapes(ckpt.model)) {
      std::vector<double> v(n);
      get_doubles(in, path, v);
      ckpt.velocity.push_back(std::move(v));
    }
  }
  return ckpt;
}

}  // namespace gcl
