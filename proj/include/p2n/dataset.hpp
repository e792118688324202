#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "p2n/errors.hpp"

namespace p2n {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string id;
  fs::path noisy;
  std::optional<fs::path> clean;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Paired noisy/clean image list. Paths are stored as found (absolute when
/// produced by `scan_dataset`).
struct DatasetManifest {
  fs::path root;
  std::vector<ManifestEntry> entries;

  bool all_paired() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.clean.has_value(); });
  }

  /// Unique ids and every referenced file present.
  void validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
      if (!seen.insert(e.id).second) throw FormatError("duplicate manifest id '" + e.id + "'");
      if (!fs::exists(e.noisy)) throw IoError("manifest entry '" + e.id + "': missing " + e.noisy.string());
      if (e.clean && !fs::exists(*e.clean))
        throw IoError("manifest entry '" + e.id + "': missing " + e.clean->string());
    }
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

/// Image files directly inside `dir`, sorted by filename.
inline std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& de : fs::directory_iterator(dir))
    if (de.is_regular_file() && is_image_file(de.path())) out.push_back(de.path());
  std::sort(out.begin(), out.end());
  return out;
}

/// Discovers `root/noisy/<name>` files and pairs each with `root/gt/<name>`
/// when present. The id is the filename stem. An empty result is reported on
/// stderr but is not an error.
inline DatasetManifest scan_dataset(const fs::path& root, std::ostream& warn = std::cerr) {
  if (!fs::is_directory(root)) throw IoError("dataset root does not exist: " + root.string());
  DatasetManifest m;
  m.root = fs::absolute(root);
  for (const auto& noisy : list_images(m.root / "noisy")) {
    ManifestEntry e{noisy.stem().string(), noisy, std::nullopt};
    const auto gt = m.root / "gt" / noisy.filename();
    if (fs::exists(gt)) e.clean = gt;
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) warn << "warning: no images found under " << (m.root / "noisy").string() << "\n";
  m.validate();
  return m;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json j{{"id", e.id}, {"noisy", e.noisy.string()}};
    if (e.clean) j["clean"] = e.clean->string();
    entries.push_back(std::move(j));
  }
  return {{"root", m.root.string()}, {"entries", std::move(entries)}};
}

/// Relative paths in the document resolve against `root` (or the manifest
/// file's directory when `root` is absent).
inline DatasetManifest manifest_from_json(const nlohmann::json& j, const fs::path& base = {}) {
  DatasetManifest m;
  m.root = j.contains("root") ? fs::path(j.at("root").get<std::string>()) : base;
  if (!j.contains("entries") || !j.at("entries").is_array()) throw FormatError("manifest lacks an 'entries' array");
  auto resolve = [&](const std::string& s) {
    fs::path p(s);
    return p.is_absolute() ? p : m.root / p;
  };
  for (const auto& e : j.at("entries")) {
    ManifestEntry entry;
    entry.id = e.at("id").get<std::string>();
    entry.noisy = resolve(e.at("noisy").get<std::string>());
    if (e.contains("clean") && !e.at("clean").is_null()) entry.clean = resolve(e.at("clean").get<std::string>());
    m.entries.push_back(std::move(entry));
  }
  m.validate();
  return m;
}

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(m).dump(2) << "\n";
}

inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

}  // namespace p2n
