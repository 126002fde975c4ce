#include "proca/report.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "proca/metrics.hpp"
#include "proca/plot.hpp"
#include "proca/tensor.hpp"

namespace proca {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("render_report: missing " + path.string());
  return json::parse(is);
}

std::optional<json> try_read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) return std::nullopt;
  return json::parse(is);
}

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

constexpr std::array<std::uint8_t, 3> kPalette[] = {
    {40, 90, 200}, {200, 90, 40}, {40, 160, 80}, {150, 60, 160}, {120, 120, 40},
};

}  // namespace

void render_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const json config = read_json_file(dir / "config.json");
  const auto rows = read_metrics_csv((dir / "metrics.csv").string());
  const auto final_eval = try_read_json(dir / "final_eval.json");
  const auto timing = try_read_json(dir / "timing.json");
  const auto thresholds = try_read_json(dir / "thresholds.json");

  fs::create_directories(dir / "plots");

  // loss curves per stage
  {
    std::vector<PlotSeries> series;
    for (int stage = 1; stage <= 3; ++stage) {
      PlotSeries s;
      s.label = "STAGE " + std::to_string(stage);
      s.color = kPalette[stage - 1];
      long offset = 0;
      for (const auto& r : rows)
        if (r.stage < stage) offset = std::max(offset, r.step);
      for (const auto& r : rows) {
        if (r.stage != stage || std::isnan(r.loss_total)) continue;
        s.x.push_back(static_cast<double>(r.step));
        s.y.push_back(r.loss_total);
      }
      if (!s.x.empty()) series.push_back(std::move(s));
    }
    if (!series.empty())
      plot_lines((dir / "plots" / "loss_curves.png").string(), "TRAINING LOSS", series);
  }

  // mIoU trace (evaluation rows), global step axis
  {
    PlotSeries src, tgt;
    src.label = "SOURCE MIOU";
    src.color = kPalette[0];
    tgt.label = "TARGET MIOU";
    tgt.color = kPalette[1];
    double base = 0;
    int last_stage = 0;
    double stage_extent = 0;
    for (const auto& r : rows) {
      if (std::isnan(r.miou_source) && std::isnan(r.miou_target)) continue;
      if (r.stage != last_stage) {
        base += stage_extent;
        stage_extent = 0;
        last_stage = r.stage;
      }
      stage_extent = std::max(stage_extent, static_cast<double>(r.step));
      if (!std::isnan(r.miou_source)) {
        src.x.push_back(base + r.step);
        src.y.push_back(r.miou_source);
      }
      if (!std::isnan(r.miou_target)) {
        tgt.x.push_back(base + r.step);
        tgt.y.push_back(r.miou_target);
      }
    }
    if (!src.x.empty() || !tgt.x.empty())
      plot_lines((dir / "plots" / "miou.png").string(), "MIOU OVER TRAINING", {src, tgt});
  }

  // per-class IoU bars for the last stage present
  std::string final_stage_name;
  if (final_eval) {
    for (int stage = 3; stage >= 1; --stage) {
      const std::string key = "stage" + std::to_string(stage);
      if (final_eval->contains(key)) {
        final_stage_name = key;
        const auto iou = final_eval->at(key).at("target").at("iou").get<std::vector<double>>();
        plot_bars((dir / "plots" / ("iou_target_" + key + ".png")).string(),
                  "TARGET IOU PER CLASS " + key, iou);
        break;
      }
    }
  }

  std::ostringstream md;
  md << "# Run report\n\n";
  md << "## Configuration\n\n```json\n" << config.dump(2) << "\n```\n\n";

  if (final_eval) {
    md << "## Stage results\n\n";
    md << "| stage | source mIoU | target mIoU | wall-clock (s) |\n";
    md << "|-------|-------------|-------------|----------------|\n";
    for (int stage = 1; stage <= 3; ++stage) {
      const std::string key = "stage" + std::to_string(stage);
      if (!final_eval->contains(key)) continue;
      const auto& e = final_eval->at(key);
      std::string wall = "-";
      if (timing && timing->contains(key)) wall = fmt(timing->at(key).get<double>(), 1);
      md << "| " << stage << " | " << fmt(e.at("source").at("miou").get<double>()) << " | "
         << fmt(e.at("target").at("miou").get<double>()) << " | " << wall << " |\n";
    }
    md << "\n";

    if (!final_stage_name.empty()) {
      const auto& e = final_eval->at(final_stage_name).at("target");
      const auto iou = e.at("iou").get<std::vector<double>>();
      const auto present = e.at("present").get<std::vector<bool>>();
      md << "## Per-class target IoU (" << final_stage_name << ")\n\n";
      md << "| class | IoU | in ground truth |\n|-------|-----|-----------------|\n";
      for (std::size_t c = 0; c < iou.size(); ++c)
        md << "| " << (c + 1) << " | " << fmt(iou[c]) << " | " << (present[c] ? "yes" : "no")
           << " |\n";
      const auto excluded = e.at("excluded").get<std::vector<int>>();
      if (!excluded.empty()) {
        md << "\nExcluded from mIoU (absent from prediction and truth):";
        for (int c : excluded) md << " " << c;
        md << "\n";
      }
      md << "\n";
    }
  }

  if (thresholds) {
    md << "## Self-training thresholds\n\n```json\n" << thresholds->dump(2) << "\n```\n\n";
  }

  md << "## Artifacts\n\n";
  md << "- `metrics.csv`: per-step losses and periodic evaluations (" << rows.size()
     << " rows)\n";
  md << "- `checkpoints/`: stage checkpoints\n";
  md << "- `plots/`: loss curves, mIoU trace, per-class IoU bars\n";

  std::ofstream os(dir / "report.md");
  os << md.str();
  if (!os) throw InputError("render_report: cannot write report.md in " + run_dir);
}

}  // namespace proca
