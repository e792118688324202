#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "p2n/errors.hpp"
#include "p2n/nn/unet.hpp"

namespace p2n {

// Checkpoint layout, version 1:
//
//   bytes 0..7   magic "P2NCKPT\x01"
//   bytes 8..15  header length L, uint64 little-endian
//   next L bytes header JSON (UTF-8):
//                {"format_version":1,
//                 "architecture":{"channels","base_width","depth","residual","leaky_slope"},
//                 "arrays":[{"name","shape":[...],"count"}, ...]}
//   remainder    float32 little-endian payloads, concatenated in "arrays" order
//
// The header is dumped with sorted keys, so equal models give equal bytes.

inline constexpr char kCheckpointMagic[8] = {'P', '2', 'N', 'C', 'K', 'P', 'T', '\x01'};
inline constexpr int kCheckpointVersion = 1;

namespace detail {
inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline void put_f32(std::vector<char>& buf, float f) {
  std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}
inline float get_f32(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(u);
}
}  // namespace detail

inline nlohmann::json to_json(const nn::ArchitectureConfig& a) {
  return {{"channels", a.channels},
          {"base_width", a.base_width},
          {"depth", a.depth},
          {"residual", a.residual},
          {"leaky_slope", a.leaky_slope}};
}

inline nn::ArchitectureConfig architecture_from_json(const nlohmann::json& j) {
  nn::ArchitectureConfig a;
  a.channels = j.value("channels", a.channels);
  a.base_width = j.value("base_width", a.base_width);
  a.depth = j.value("depth", a.depth);
  a.residual = j.value("residual", a.residual);
  a.leaky_slope = j.value("leaky_slope", a.leaky_slope);
  a.validate();
  return a;
}

template <class S>
void save_checkpoint(nn::UNet<S>& model, const std::filesystem::path& path) {
  nlohmann::json arrays = nlohmann::json::array();
  std::vector<char> payload;
  for (const auto& p : model.parameters()) {
    arrays.push_back({{"name", p.name}, {"shape", p.shape}, {"count", p.value.size()}});
    for (S v : p.value) detail::put_f32(payload, static_cast<float>(v));
  }
  const nlohmann::json header{
      {"format_version", kCheckpointVersion}, {"architecture", to_json(model.config())}, {"arrays", arrays}};
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

template <class S = float>
nn::UNet<S> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const auto len = detail::get_u64(in);
  if (len > (1u << 26)) throw FormatError(path.string() + ": implausible header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  if (header.value("format_version", 0) != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version");

  nn::UNet<S> model(architecture_from_json(header.at("architecture")));
  auto params = model.parameters();
  const auto& arrays = header.at("arrays");
  if (arrays.size() != params.size()) throw FormatError(path.string() + ": array count does not match architecture");
  std::vector<unsigned char> buf;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& a = arrays[k];
    if (a.at("name").get<std::string>() != params[k].name || a.at("count").get<std::size_t>() != params[k].value.size())
      throw FormatError(path.string() + ": array '" + a.at("name").get<std::string>() + "' does not match architecture");
    buf.resize(params[k].value.size() * 4);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw FormatError(path.string() + ": payload truncated");
    for (std::size_t i = 0; i < params[k].value.size(); ++i)
      params[k].value[i] = static_cast<S>(detail::get_f32(buf.data() + 4 * i));
  }
  model.set_mode(nn::Mode::eval);
  return model;
}

}  // namespace p2n
