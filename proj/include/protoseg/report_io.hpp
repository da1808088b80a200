#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "protoseg/analysis.hpp"

namespace protoseg {

enum class ReportFormat { kJson, kCsv };

ReportFormat parse_report_format(std::string_view name);

/// Deterministic JSON text: keys sorted, two-space indent, every floating
/// value printed with %.6f and non-finite values as null.
std::string format_json(const nlohmann::json& doc);

nlohmann::json to_json(const LayerSweepReport& report);
nlohmann::json to_json(const UnitSweepReport& report);
nlohmann::json to_json(const RankingReport& report);
nlohmann::json to_json(const CoverageTable& table);
nlohmann::json to_json(const ConfidenceReport& report);
nlohmann::json to_json(const GainReport& report);
nlohmann::json to_json(const NoiseReport& report);

std::string to_csv(const LayerSweepReport& report);
std::string to_csv(const UnitSweepReport& report);
std::string to_csv(const RankingReport& report);
std::string to_csv(const CoverageTable& table);
std::string to_csv(const ConfidenceReport& report);
std::string to_csv(const GainReport& report);
std::string to_csv(const NoiseReport& report);

template <typename Report>
std::string format_report(const Report& report, ReportFormat format) {
  return format == ReportFormat::kJson ? format_json(to_json(report)) : to_csv(report);
}

/// Writes the text in one go; throws kIoFailure.
void write_text(const std::filesystem::path& path, std::string_view text);

template <typename Report>
void save_report(const Report& report, const std::filesystem::path& path, ReportFormat format) {
  write_text(path, format_report(report, format));
}

}  // namespace protoseg
