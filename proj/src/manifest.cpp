#include "protoseg/manifest.hpp"

#include <fstream>
#include <set>

#include "protoseg/error.hpp"

namespace protoseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void violation(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kSchemaViolation, field + ": " + what).with_subject(field);
}

const json& require_field(const json& object, const std::string& key, const std::string& path) {
  const auto it = object.find(key);
  if (it == object.end()) violation(path + key, "missing required field");
  return *it;
}

std::string require_string(const json& value, const std::string& field) {
  if (!value.is_string() || value.get_ref<const std::string&>().empty()) violation(field, "expected a non-empty string");
  return value.get<std::string>();
}

fs::path resolve(const json& value, const std::string& field, const fs::path& base_dir, bool check_files) {
  fs::path p = require_string(value, field);
  if (p.is_relative()) p = base_dir / p;
  p = p.lexically_normal();
  if (check_files && !fs::is_regular_file(p)) {
    throw Error(ErrorCode::kDanglingReference, field + " references missing file " + p.string()).with_subject(p.string());
  }
  return p;
}

std::string relative_to(const fs::path& p, const fs::path& base_dir) {
  const auto rel = p.lexically_relative(base_dir);
  return rel.empty() ? p.generic_string() : rel.generic_string();
}

}  // namespace

AnalysisManifest parse_manifest(const json& doc, const fs::path& base_dir, bool check_files) {
  if (!doc.is_object()) violation("$", "manifest must be a JSON object");
  AnalysisManifest manifest;
  const auto& version = require_field(doc, "version", "");
  if (!version.is_number_integer() || version.get<long long>() != 1) violation("version", "only version 1 is supported");
  manifest.version = 1;
  if (const auto it = doc.find("global_seed"); it != doc.end()) {
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0)) {
      violation("global_seed", "expected a non-negative integer");
    }
    manifest.global_seed = it->get<std::uint64_t>();
  }
  const auto& images = require_field(doc, "images", "");
  if (!images.is_array() || images.empty()) violation("images", "expected a non-empty array");

  std::set<std::string> seen;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string prefix = "images[" + std::to_string(i) + "].";
    const auto& node = images[i];
    if (!node.is_object()) violation("images[" + std::to_string(i) + "]", "expected an object");
    ImageEntry image;
    image.id = require_string(require_field(node, "id", prefix), prefix + "id");
    if (!seen.insert(image.id).second) violation(prefix + "id", "duplicate image id '" + image.id + "'");
    image.output = resolve(require_field(node, "output", prefix), prefix + "output", base_dir, check_files);
    if (const auto it = node.find("input"); it != node.end() && !it->is_null()) {
      image.input = resolve(*it, prefix + "input", base_dir, check_files);
    }
    if (const auto it = node.find("ground_truth"); it != node.end() && !it->is_null()) {
      image.ground_truth = resolve(*it, prefix + "ground_truth", base_dir, check_files);
    }
    const auto& layers = require_field(node, "layers", prefix);
    if (!layers.is_array() || layers.empty()) violation(prefix + "layers", "expected a non-empty array");
    for (std::size_t j = 0; j < layers.size(); ++j) {
      const std::string lp = prefix + "layers[" + std::to_string(j) + "].";
      const auto& layer_node = layers[j];
      if (!layer_node.is_object()) violation(lp.substr(0, lp.size() - 1), "expected an object");
      LayerEntry layer;
      const auto& index = require_field(layer_node, "layer_index", lp);
      if (!index.is_number_integer()) violation(lp + "layer_index", "expected an integer");
      layer.layer_index = index.get<int>();
      if (!image.layers.empty() && layer.layer_index <= image.layers.back().layer_index) {
        violation(lp + "layer_index", "layer indices must be strictly increasing");
      }
      const auto& channels = require_field(layer_node, "channels", lp);
      if (!channels.is_number_integer() || channels.get<std::int64_t>() <= 0) {
        violation(lp + "channels", "expected a positive integer");
      }
      layer.channels = channels.get<std::size_t>();
      layer.feature = resolve(require_field(layer_node, "feature", lp), lp + "feature", base_dir, check_files);
      image.layers.push_back(std::move(layer));
    }
    manifest.images.push_back(std::move(image));
  }
  return manifest;
}

AnalysisManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open manifest " + path.string()).with_subject(path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    violation("$", std::string("not valid JSON: ") + e.what());
  }
  return parse_manifest(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void save_manifest(const AnalysisManifest& manifest, const fs::path& path) {
  const fs::path base = path.parent_path().empty() ? fs::current_path() : fs::absolute(path.parent_path());
  const auto rel = [&](const fs::path& p) { return relative_to(fs::absolute(p).lexically_normal(), base); };
  json doc;
  doc["version"] = manifest.version;
  doc["global_seed"] = manifest.global_seed;
  doc["images"] = json::array();
  for (const auto& image : manifest.images) {
    json node;
    node["id"] = image.id;
    node["output"] = rel(image.output);
    if (image.input) node["input"] = rel(*image.input);
    if (image.ground_truth) node["ground_truth"] = rel(*image.ground_truth);
    node["layers"] = json::array();
    for (const auto& layer : image.layers) {
      node["layers"].push_back({{"layer_index", layer.layer_index}, {"channels", layer.channels}, {"feature", rel(layer.feature)}});
    }
    doc["images"].push_back(std::move(node));
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace protoseg
