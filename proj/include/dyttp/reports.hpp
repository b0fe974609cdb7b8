#pragma once

#include <string>
#include <vector>

#include "dyttp/evaluation.hpp"
#include "dyttp/persistence.hpp"
#include "json.hpp"

namespace dyttp {

inline constexpr int kReportSchemaVersion = 1;

/// Aligned text table; the first row is the header.
std::string format_table(const std::vector<std::vector<std::string>>& rows);

std::string format_fixed(double v, int digits);

std::string metrics_table(const std::string& label, const MetricsReport& m);
std::string latency_table(const std::string& label, const LatencyReport& l);

/// DyT | Snapshot | Backbone | ADE | FDE | MR | inf(ms), one row per cell.
std::string ablation_table(const std::vector<AblationCell>& cells);

/// Header fields shared by every JSON report.
nlohmann::ordered_json report_header(const std::string& kind, std::uint64_t seed);

nlohmann::ordered_json ablation_json(const std::vector<AblationCell>& cells, const AblationConfig& cfg);

}  // namespace dyttp
