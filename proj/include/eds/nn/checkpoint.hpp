#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "eds/nn/network.hpp"

namespace eds::nn {

// Weight checkpoint: "EDSNNCK1", u32 version, input shape, layer table with
// float64 weights, then named float64 arrays and string tags. All integers
// and floats are little-endian. Round-trips bit-exactly.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  Network net;
  std::map<std::string, std::vector<double>> arrays;
  std::map<std::string, std::string> tags;

  const std::vector<double>& array(const std::string& key) const;
  double scalar(const std::string& key) const;
  const std::string& tag(const std::string& key) const;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace eds::nn
