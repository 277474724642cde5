#include "eds/nn/checkpoint.hpp"

#include <fstream>

#include "eds/binary_io.hpp"

namespace eds::nn {

namespace {
constexpr std::string_view kMagic = "EDSNNCK1";
}

const std::vector<double>& Checkpoint::array(const std::string& key) const {
  auto it = arrays.find(key);
  if (it == arrays.end()) throw InputError("checkpoint: missing array '" + key + "'");
  return it->second;
}

double Checkpoint::scalar(const std::string& key) const {
  const auto& a = array(key);
  if (a.size() != 1) throw InputError("checkpoint: '" + key + "' is not a scalar");
  return a[0];
}

const std::string& Checkpoint::tag(const std::string& key) const {
  auto it = tags.find(key);
  if (it == tags.end()) throw InputError("checkpoint: missing tag '" + key + "'");
  return it->second;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  using namespace binary;
  os.write(kMagic.data(), kMagic.size());
  write_u32(os, Checkpoint::kVersion);
  const Network& net = ckpt.net;
  write_u64(os, net.input_shape().channels);
  write_u64(os, net.input_shape().length);
  write_u64(os, net.layers().size());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const LayerSpec& spec = net.layers()[i];
    write_u32(os, static_cast<std::uint32_t>(spec.kind));
    write_u32(os, static_cast<std::uint32_t>(spec.padding));
    write_u64(os, spec.kernel);
    write_u64(os, spec.stride);
    write_u64(os, spec.in_features);
    write_u64(os, spec.out_features);
    const LayerParams& p = net.params()[i];
    write_u64(os, p.weights.size());
    write_f64s(os, p.weights);
    write_u64(os, p.bias.size());
    write_f64s(os, p.bias);
  }
  write_u64(os, ckpt.arrays.size());
  for (const auto& [key, values] : ckpt.arrays) {
    write_string(os, key);
    write_u64(os, values.size());
    write_f64s(os, values);
  }
  write_u64(os, ckpt.tags.size());
  for (const auto& [key, value] : ckpt.tags) {
    write_string(os, key);
    write_string(os, value);
  }
  if (!os) throw InputError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& is) {
  using namespace binary;
  expect_magic(is, kMagic, "checkpoint");
  const std::uint32_t version = read_u32(is);
  if (version != Checkpoint::kVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(version));
  }
  Shape input;
  input.channels = read_u64(is);
  input.length = read_u64(is);
  const std::uint64_t n_layers = read_u64(is);
  if (n_layers > 4096) throw InputError("checkpoint: implausible layer count");
  std::vector<LayerSpec> specs;
  std::vector<LayerParams> params;
  for (std::uint64_t i = 0; i < n_layers; ++i) {
    LayerSpec spec;
    spec.kind = static_cast<LayerKind>(read_u32(is));
    spec.padding = static_cast<Padding>(read_u32(is));
    spec.kernel = read_u64(is);
    spec.stride = read_u64(is);
    spec.in_features = read_u64(is);
    spec.out_features = read_u64(is);
    LayerParams p;
    p.weights = read_f64s(is, read_u64(is));
    p.bias = read_f64s(is, read_u64(is));
    specs.push_back(spec);
    params.push_back(std::move(p));
  }
  Checkpoint ckpt;
  ckpt.net = Network(input, specs);
  auto dst = ckpt.net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].weights.size() != dst[i].weights.size() ||
        params[i].bias.size() != dst[i].bias.size()) {
      throw InputError("checkpoint: parameter count mismatch in layer " + std::to_string(i));
    }
    dst[i] = std::move(params[i]);
  }
  const std::uint64_t n_arrays = read_u64(is);
  for (std::uint64_t i = 0; i < n_arrays; ++i) {
    std::string key = read_string(is);
    ckpt.arrays[key] = read_f64s(is, read_u64(is));
  }
  const std::uint64_t n_tags = read_u64(is);
  for (std::uint64_t i = 0; i < n_tags; ++i) {
    std::string key = read_string(is);
    ckpt.tags[key] = read_string(is);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("checkpoint: cannot open " + path.string());
  return read_checkpoint(is);
}

}  // namespace eds::nn
