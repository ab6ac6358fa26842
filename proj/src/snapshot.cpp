/*
 * Copyright 2026 The SImpAl Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "simpal/snapshot.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/core.h>

namespace simpal {
namespace {

constexpr char kMagic[8] = {'S', 'I', 'M', 'P', 'A', 'L', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t take(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw SnapshotError(fmt::format("snapshot truncated at byte {}", pos_));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t position() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void put_layer(std::string& out, const AffineLayer& layer) {
  put_u32(out, static_cast<std::uint32_t>(layer.out_dim()));
  put_u32(out, static_cast<std::uint32_t>(layer.in_dim()));
  for (double w : layer.weight.values()) put_f64(out, w);
  for (double b : layer.bias.values()) put_f64(out, b);
}

AffineLayer get_layer(Reader& in) {
  const std::uint32_t out = in.u32(), fan_in = in.u32();
  if (out == 0 || fan_in == 0) throw SnapshotError("snapshot layer with a zero dimension");
  AffineLayer layer{Matrix(out, fan_in), Matrix(1, out)};
  for (double& w : layer.weight.values()) w = in.f64();
  for (double& b : layer.bias.values()) b = in.f64();
  return layer;
}

}  // namespace

std::string encode_params(const ModelParams& params) {
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(params.extractor.size()));
  put_u32(out, static_cast<std::uint32_t>(params.heads.size()));
  for (const auto& l : params.extractor) put_layer(out, l);
  for (const auto& l : params.heads) put_layer(out, l);
  return out;
}

ModelParams decode_params(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw SnapshotError("not a parameter snapshot (bad magic bytes)");
  }
  Reader in(bytes);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) in.take(1);
  const std::uint32_t version = in.u32();
  if (version != kVersion) throw SnapshotError(fmt::format("unsupported snapshot version {}", version));
  const std::uint32_t n_extractor = in.u32(), n_heads = in.u32();
  ModelParams params;
  for (std::uint32_t i = 0; i < n_extractor; ++i) params.extractor.push_back(get_layer(in));
  for (std::uint32_t i = 0; i < n_heads; ++i) params.heads.push_back(get_layer(in));
  if (!in.done()) {
    throw SnapshotError(fmt::format("trailing bytes after snapshot at offset {}", in.position()));
  }
  try {
    params.validate();
  } catch (const ShapeError& e) {
    throw SnapshotError(fmt::format("inconsistent snapshot: {}", e.what()));
  }
  return params;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SnapshotError(fmt::format("cannot write '{}'", path.string()));
  const std::string bytes = encode_params(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SnapshotError(fmt::format("write to '{}' failed", path.string()));
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError(fmt::format("cannot open snapshot '{}'", path.string()));
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_params(bytes);
}

}  // namespace simpal
