#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace protoseg {

struct LayerEntry {
  int layer_index = 0;
  std::size_t channels = 0;
  std::filesystem::path feature;  // absolute after loading
};

struct ImageEntry {
  std::string id;
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> ground_truth;
  std::filesystem::path output;
  std::vector<LayerEntry> layers;  // strictly increasing layer_index
};

/// Versioned description of an analysis run. On disk it is a JSON document:
///
///   { "version": 1, "global_seed": 0,
///     "images": [ { "id": "case_001", "input": "x.npy",
///                   "ground_truth": "g.npy", "output": "b.npy",
///                   "layers": [ { "layer_index": 1, "channels": 64,
///                                 "feature": "case_001_l01.npy" } ] } ] }
///
/// Paths are relative to the manifest's directory. "input" and
/// "ground_truth" are optional; unknown keys (e.g. exporter metadata) are
/// ignored.
struct AnalysisManifest {
  int version = 1;
  std::uint64_t global_seed = 0;
  std::vector<ImageEntry> images;
};

/// Throws kSchemaViolation (Error::subject() holds the field path, e.g.
/// "images[1].id") and kDanglingReference (subject = missing file).
AnalysisManifest load_manifest(const std::filesystem::path& path);

/// Validate a parsed document; relative paths resolve against `base_dir`.
AnalysisManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                bool check_files = true);

/// Writes paths relative to the manifest directory where possible.
void save_manifest(const AnalysisManifest& manifest, const std::filesystem::path& path);

}  // namespace protoseg
