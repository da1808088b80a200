#include "protoseg/report_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "protoseg/error.hpp"

namespace protoseg {

using nlohmann::json;

namespace {

std::string fixed6(double value) {
  if (!std::isfinite(value)) return "null";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6f", value);
  // avoid "-0.000000" so tiny negatives do not flip the text between runs
  if (std::string_view(buffer) == "-0.000000") return "0.000000";
  return buffer;
}

void write_json(const json& node, std::string& out, int depth) {
  const std::string pad(static_cast<std::size_t>(depth + 1) * 2, ' ');
  const std::string close_pad(static_cast<std::size_t>(depth) * 2, ' ');
  switch (node.type()) {
    case json::value_t::object: {
      if (node.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (const auto& [key, value] : node.items()) {  // std::map order: sorted
        if (!first) out += ",\n";
        first = false;
        out += pad + json(key).dump() + ": ";
        write_json(value, out, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case json::value_t::array: {
      if (node.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < node.size(); ++i) {
        if (i > 0) out += ",\n";
        out += pad;
        write_json(node[i], out, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += fixed6(node.get<double>());
      return;
    default:
      out += node.dump();
  }
}

json optional_number(const std::optional<double>& value) { return value ? json(*value) : json(nullptr); }

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char c : text) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::string csv_optional(const std::optional<double>& value) { return value ? fixed6(*value) : std::string(); }

std::string join_row(std::initializer_list<std::string> fields) {
  std::string line;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) line += ',';
    first = false;
    line += f;
  }
  return line + '\n';
}

json failures_json(const std::vector<std::string>& failures) { return json(failures); }

}  // namespace

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw Error(ErrorCode::kPreconditionViolation, "unknown report format '" + std::string(name) + "'");
}

std::string format_json(const json& doc) {
  std::string out;
  write_json(doc, out, 0);
  out += '\n';
  return out;
}

json to_json(const LayerSweepReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row{{"image_id", r.image_id}, {"layer_index", r.layer_index}, {"height", r.height},
             {"width", r.width},       {"channels", r.channels},       {"defined", r.sa.defined}};
    row["sa"] = r.sa.defined ? json(r.sa.value) : json(nullptr);
    row["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    rows.push_back(std::move(row));
  }
  json layers = json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"layer_index", l.layer_index}, {"mean", l.mean}, {"std", l.std}, {"count", l.count}});
  }
  return {{"kind", "layer_sweep"}, {"rows", std::move(rows)}, {"layers", std::move(layers)}};
}

json to_json(const UnitSweepReport& report) {
  json units = json::array();
  for (std::size_t i = 0; i < report.units.size(); ++i) {
    const auto& u = report.units[i];
    std::string group = "undefined";
    if (u.sa.defined) group = report.boundary && i < *report.boundary ? "active" : "inertia";
    units.push_back({{"unit_id", u.unit_id},
                     {"sa", u.sa.defined ? json(u.sa.value) : json(nullptr)},
                     {"defined", u.sa.defined},
                     {"group", group}});
  }
  return {{"kind", "unit_sweep"},
          {"units", std::move(units)},
          {"boundary", report.boundary ? json(*report.boundary) : json(nullptr)}};
}

json to_json(const RankingReport& report) {
  json entries = json::array();
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    entries.push_back({{"rank", i + 1}, {"image_id", e.image_id}, {"mu", e.mu}, {"unit_count", e.unit_count}});
  }
  return {{"kind", "ranking"}, {"entries", std::move(entries)}};
}

json to_json(const CoverageTable& table) {
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"coverage", r.coverage},
                    {"retained", r.retained},
                    {"mean_dice", optional_number(r.mean_dice)},
                    {"std_dice", optional_number(r.std_dice)},
                    {"retained_ids", r.retained_ids},
                    {"rejected_ids", r.rejected_ids}});
  }
  return {{"kind", "coverage"}, {"total", table.total}, {"rows", std::move(rows)}};
}

json to_json(const ConfidenceReport& report) {
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back({{"image_id", r.image_id}, {"mu", r.mu}, {"dice", optional_number(r.dice)}});
  }
  return {{"kind", "confidence"}, {"records", std::move(records)}, {"failures", failures_json(report.failures)}};
}

json to_json(const GainReport& report) {
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back(
        {{"image_id", r.image_id}, {"sa_input", r.sa_input}, {"dice_output", r.dice_output}, {"d", r.d}});
  }
  return {{"kind", "separableness"},
          {"records", std::move(records)},
          {"mean_d", optional_number(report.mean_d)},
          {"failures", failures_json(report.failures)}};
}

json to_json(const NoiseReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back(
        {{"layer_index", r.layer_index}, {"level", r.level}, {"mean_difference", r.mean_difference}, {"count", r.count}});
  }
  return {{"kind", "noise"}, {"rows", std::move(rows)}, {"failures", failures_json(report.failures)}};
}

std::string to_csv(const LayerSweepReport& report) {
  std::string out = "image_id,layer_index,height,width,channels,sa,error\n";
  for (const auto& r : report.rows) {
    out += join_row({csv_field(r.image_id), std::to_string(r.layer_index), std::to_string(r.height),
                     std::to_string(r.width), std::to_string(r.channels), r.sa.defined ? fixed6(r.sa.value) : "",
                     csv_field(r.error)});
  }
  return out;
}

std::string to_csv(const UnitSweepReport& report) {
  std::string out = "rank,unit_id,sa,group\n";
  for (std::size_t i = 0; i < report.units.size(); ++i) {
    const auto& u = report.units[i];
    std::string group = "undefined";
    if (u.sa.defined) group = report.boundary && i < *report.boundary ? "active" : "inertia";
    out += join_row({std::to_string(i + 1), std::to_string(u.unit_id), u.sa.defined ? fixed6(u.sa.value) : "", group});
  }
  return out;
}

std::string to_csv(const RankingReport& report) {
  std::string out = "rank,image_id,mu,unit_count\n";
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    const auto& e = report.entries[i];
    out += join_row({std::to_string(i + 1), csv_field(e.image_id), fixed6(e.mu), std::to_string(e.unit_count)});
  }
  return out;
}

std::string to_csv(const CoverageTable& table) {
  std::string out = "coverage,retained,total,mean_dice,std_dice\n";
  for (const auto& r : table.rows) {
    out += join_row({fixed6(r.coverage), std::to_string(r.retained), std::to_string(table.total),
                     csv_optional(r.mean_dice), csv_optional(r.std_dice)});
  }
  return out;
}

std::string to_csv(const ConfidenceReport& report) {
  std::string out = "image_id,mu,dice\n";
  for (const auto& r : report.records) out += join_row({csv_field(r.image_id), fixed6(r.mu), csv_optional(r.dice)});
  return out;
}

std::string to_csv(const GainReport& report) {
  std::string out = "image_id,sa_input,dice_output,d\n";
  for (const auto& r : report.records) {
    out += join_row({csv_field(r.image_id), fixed6(r.sa_input), fixed6(r.dice_output), fixed6(r.d)});
  }
  return out;
}

std::string to_csv(const NoiseReport& report) {
  std::string out = "layer_index,level,mean_difference,count\n";
  for (const auto& r : report.rows) {
    out += join_row({std::to_string(r.layer_index), fixed6(r.level), fixed6(r.mean_difference), std::to_string(r.count)});
  }
  return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing").with_subject(path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing " + path.string()).with_subject(path.string());
}

}  // namespace protoseg
