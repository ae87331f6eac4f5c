// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint container:
//   "HSBN1" | version (1 byte) | metadata length (uint32 LE) | metadata JSON
//   | arrays, each a run of little-endian float64 values
// The metadata lists the arrays in file order as {"name", "length"}.

#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "hsbinn/error.hpp"

namespace hsbinn {

inline constexpr char kCheckpointMagic[5] = {'H', 'S', 'B', 'N', '1'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointFile {
  nlohmann::json meta;
  std::map<std::string, Eigen::VectorXd> arrays;
  std::vector<std::string> order;  ///< array order on disk

  void put(const std::string& name, Eigen::VectorXd v) {
    if (!arrays.contains(name)) order.push_back(name);
    arrays[name] = std::move(v);
  }
  const Eigen::VectorXd& get(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("checkpoint: missing array '" + name + "'");
    return it->second;
  }
};

namespace detail {

inline void put_u64_le(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return x;
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const CheckpointFile& ck) {
  nlohmann::json meta = ck.meta;
  meta["arrays"] = nlohmann::json::array();
  for (const auto& name : ck.order) meta["arrays"].push_back({{"name", name}, {"length", ck.arrays.at(name).size()}});
  const std::string text = meta.dump();
  if (text.size() > UINT32_MAX) throw FormatError("checkpoint metadata too large");

  std::string buf(kCheckpointMagic, sizeof kCheckpointMagic);
  buf.push_back(static_cast<char>(kCheckpointVersion));
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  buf += text;
  for (const auto& name : ck.order)
    for (double v : ck.arrays.at(name)) detail::put_u64_le(buf, std::bit_cast<std::uint64_t>(v));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + tmp);
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into place at " + path);
}

inline CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  const std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  if (buf.size() < 10 || buf.compare(0, 5, std::string(kCheckpointMagic, 5)) != 0)
    throw FormatError(path + ": not an hsbinn checkpoint");
  if (p[5] != kCheckpointVersion)
    throw FormatError(path + ": checkpoint version " + std::to_string(p[5]) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(p[6 + i]) << (8 * i);
  if (buf.size() < 10 + static_cast<std::size_t>(len)) throw FormatError(path + ": truncated metadata");

  CheckpointFile ck;
  try {
    ck.meta = nlohmann::json::parse(buf.substr(10, len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad metadata: " + e.what());
  }
  std::size_t pos = 10 + len;
  if (!ck.meta.contains("arrays")) throw FormatError(path + ": metadata lists no arrays");
  for (const auto& a : ck.meta["arrays"]) {
    const std::string name = a.at("name").get<std::string>();
    const auto n = a.at("length").get<std::size_t>();
    if (buf.size() < pos + 8 * n) throw FormatError(path + ": truncated array '" + name + "'");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<double>(detail::get_u64_le(p + pos + 8 * i));
    pos += 8 * n;
    ck.put(name, std::move(v));
  }
  if (pos != buf.size()) throw FormatError(path + ": trailing bytes after the last array");
  return ck;
}

}  // namespace hsbinn
