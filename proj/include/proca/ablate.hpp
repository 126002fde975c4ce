#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "proca/config.hpp"
#include "proca/pipeline.hpp"

namespace proca {

struct AblationAxis {
  std::string key;                  // dotted config key or alias
  std::vector<std::string> values;  // raw value strings, applied as overrides
};

struct AblationCell {
  int index = 0;
  std::vector<std::pair<std::string, std::string>> assignment;
  bool failed = false;
  std::string error;
  double miou_stage1 = std::numeric_limits<double>::quiet_NaN();
  double miou_stage2 = std::numeric_limits<double>::quiet_NaN();
  double miou_stage3 = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline std::string slug(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

}  // namespace detail

/// Cartesian sweep over the given axes with shared seeds: each cell applies
/// its overrides onto the base config and runs the full pipeline into its own
/// subdirectory. Failed cells are marked and the sweep continues. Emits
/// ablation.csv and ablation.md mirroring the sweep layout.
inline std::vector<AblationCell> run_ablation_matrix(const nlohmann::json& base_doc,
                                                     const std::vector<AblationAxis>& axes,
                                                     const std::string& out_dir,
                                                     int max_workers = 1) {
  namespace fs_ns = std::filesystem;
  fs_ns::create_directories(out_dir);

  std::vector<AblationCell> cells;
  std::vector<std::size_t> radix(axes.size(), 0);
  int total = 1;
  for (const auto& axis : axes) {
    if (axis.values.empty()) throw ConfigError("ablate: axis '" + axis.key + "' has no values");
    total *= static_cast<int>(axis.values.size());
  }
  for (int i = 0; i < total; ++i) {
    AblationCell cell;
    cell.index = i;
    int rem = i;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& axis = axes[a];
      cell.assignment.emplace_back(axis.key, axis.values[rem % axis.values.size()]);
      rem /= static_cast<int>(axis.values.size());
    }
    cells.push_back(std::move(cell));
  }

  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= total) return;
      AblationCell& cell = cells[i];
      std::ostringstream name;
      name << "cell_" << std::setw(3) << std::setfill('0') << i;
      for (const auto& [k, v] : cell.assignment) name << "_" << detail::slug(k + "=" + v);
      const std::string cell_dir = (fs_ns::path(out_dir) / "cells" / name.str()).string();
      try {
        nlohmann::json doc = base_doc;
        for (const auto& [k, v] : cell.assignment) apply_override(doc, k, v);
        const PipelineConfig cfg = parse_config(doc);
        const RunReport report = run_pipeline(cfg, cell_dir);
        for (const auto& s : report.stages) {
          if (s.stage == 1) cell.miou_stage1 = s.target_eval.miou;
          if (s.stage == 2) cell.miou_stage2 = s.target_eval.miou;
          if (s.stage == 3) cell.miou_stage3 = s.target_eval.miou;
        }
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    }
  };

  const int workers = std::max(1, std::min<int>(max_workers, total));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // summary table, cells in index order
  std::ostringstream csv, md;
  csv << "cell";
  md << "| cell |";
  for (const auto& axis : axes) {
    csv << "," << axis.key;
    md << " " << axis.key << " |";
  }
  csv << ",target_miou_stage1,target_miou_stage2,target_miou_stage3,status\n";
  md << " stage1 | stage2 | stage3 | status |\n|";
  for (std::size_t i = 0; i < axes.size() + 5; ++i) md << "---|";
  md << "\n";
  for (const auto& cell : cells) {
    csv << cell.index;
    md << "| " << cell.index << " |";
    for (const auto& [_, v] : cell.assignment) {
      csv << "," << v;
      md << " " << v << " |";
    }
    for (const double v : {cell.miou_stage1, cell.miou_stage2, cell.miou_stage3}) {
      csv << "," << format_metric(v);
      md << " " << (std::isnan(v) ? std::string("-") : format_metric(v)) << " |";
    }
    csv << "," << (cell.failed ? "failed" : "ok") << "\n";
    md << " " << (cell.failed ? "failed" : "ok") << " |\n";
  }
  std::ofstream csv_os(fs_ns::path(out_dir) / "ablation.csv");
  csv_os << csv.str();
  std::ofstream md_os(fs_ns::path(out_dir) / "ablation.md");
  md_os << "# Ablation sweep\n\n" << md.str();
  return cells;
}

}  // namespace proca
