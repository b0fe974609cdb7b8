#include "dyttp/reports.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace dyttp {

namespace {

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80 ? 1 : 0;
  return n;
}

}  // namespace

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string format_table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      const auto& cell = rows[r][c];
      line += (c == 0 ? "" : "  ") + cell + std::string(width[c] - display_width(cell), ' ');
    }
    line.erase(line.find_last_not_of(' ') + 1);
    out << line << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c == 0 ? 0 : 2);
      out << std::string(total, '-') << '\n';
    }
  }
  return out.str();
}

std::string metrics_table(const std::string& label, const MetricsReport& m) {
  return format_table({{"model", "minADE", "minFDE", "MR", "count"},
                       {label, format_fixed(m.min_ade, 4), format_fixed(m.min_fde, 4), format_fixed(m.miss_rate, 4),
                        std::to_string(m.count)}});
}

std::string latency_table(const std::string& label, const LatencyReport& l) {
  return format_table({{"variant", "ave(ms)", "std(ms)", "min(ms)", "max(ms)", "iters"},
                       {label, format_fixed(l.ave_ms, 4), format_fixed(l.std_ms, 4), format_fixed(l.min_ms, 4),
                        format_fixed(l.max_ms, 4), std::to_string(l.iterations)}});
}

std::string ablation_table(const std::vector<AblationCell>& cells) {
  const std::string check = "✓";
  std::vector<std::vector<std::string>> rows{{"DyT", "Snapshot", "Backbone", "ADE", "FDE", "MR", "inf(ms)"}};
  for (const auto& c : cells) {
    std::vector<std::string> row{c.dyt_enabled ? check : "", c.snapshot_enabled ? check : "", check};
    if (c.ok) {
      row.push_back(format_fixed(c.metrics.min_ade, 4));
      row.push_back(format_fixed(c.metrics.min_fde, 4));
      row.push_back(format_fixed(c.metrics.miss_rate, 4));
      row.push_back(format_fixed(c.latency.ave_ms, 3));
    } else {
      for (int i = 0; i < 4; ++i) row.push_back("failed");
    }
    rows.push_back(std::move(row));
  }
  return format_table(rows);
}

nlohmann::ordered_json report_header(const std::string& kind, std::uint64_t seed) {
  return {{"schema_version", kReportSchemaVersion}, {"kind", kind}, {"seed", seed}};
}

nlohmann::ordered_json ablation_json(const std::vector<AblationCell>& cells, const AblationConfig& cfg) {
  auto doc = report_header("ablation", cfg.train.seed);
  doc["normalization_sites"] = "all";
  doc["init_seed"] = cfg.init_seed;
  doc["scheduler"] = {{"eta_min", cfg.train.scheduler.eta_min},
                      {"eta_max", cfg.train.scheduler.eta_max},
                      {"cycle_length", cfg.train.scheduler.cycle_length},
                      {"num_cycles", cfg.train.scheduler.num_cycles}};
  doc["batch_size"] = cfg.train.batch_size;
  doc["lambda"] = cfg.train.lambda;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json j{{"label", c.label()},
                             {"dyt_enabled", c.dyt_enabled},
                             {"snapshot_enabled", c.snapshot_enabled},
                             {"ok", c.ok},
                             {"seed", c.seed},
                             {"config", to_json(c.model)}};
    if (c.ok) {
      j["metrics"] = c.metrics.to_json();
      j["latency"] = c.latency.to_json();
    } else {
      j["error"] = c.error;
    }
    arr.push_back(std::move(j));
  }
  doc["cells"] = std::move(arr);
  return doc;
}

}  // namespace dyttp
