// proca: prototypical contrast adaptation on synthetic domain-shift
// segmentation. Subcommands cover dataset generation, the three training
// stages, evaluation, ablation sweeps and report regeneration.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "proca/ablate.hpp"
#include "proca/config.hpp"
#include "proca/dataset_io.hpp"
#include "proca/pipeline.hpp"
#include "proca/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace proca;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUnknownVerb = 2;
constexpr int kExitInvalidConfig = 3;

void emit_error(int code, const std::string& message) {
  json err;
  err["error"] = message;
  err["code"] = code;
  std::cerr << err.dump() << "\n";
}

std::vector<double> parse_scale_list(const std::string& csv) {
  std::vector<double> scales;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    scales.push_back(std::stod(item));
  }
  return scales;
}

PipelineConfig load_config_or_default(const std::string& config_path,
                                      const std::vector<std::string>& overrides) {
  if (!config_path.empty()) return load_config_file(config_path, overrides);
  json doc = config_to_json(default_config());
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override: expected key=value, got '" + ov + "'");
    apply_override(doc, ov.substr(0, eq), ov.substr(eq + 1));
  }
  return parse_config(doc);
}

void write_effective_config(const PipelineConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "config.json");
  os << config_to_json(cfg).dump(2) << "\n";
}

std::ofstream open_metrics(const std::string& run_dir, bool truncate) {
  fs::create_directories(run_dir);
  const fs::path path = fs::path(run_dir) / "metrics.csv";
  const bool fresh = truncate || !fs::exists(path);
  std::ofstream os(path, fresh ? std::ios::trunc : std::ios::app);
  if (fresh) os << metrics_csv_header() << "\n";
  return os;
}

int run_worker_count() {
  if (const char* env = std::getenv("PROCA_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

json eval_result_json(const EvalResult& result, const std::string& split,
                      const std::vector<double>& scales) {
  json j;
  j["split"] = split;
  j["mst_scales"] = scales;
  j["miou"] = result.miou;
  j["iou"] = std::vector<double>(result.iou.data(), result.iou.data() + result.iou.size());
  j["excluded"] = result.excluded;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prototypical contrast adaptation on synthetic domain-shift segmentation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path, mst_csv, split = "target-eval";
  std::vector<std::string> overrides, axis_specs;

  const auto add_common = [&](CLI::App* cmd, bool needs_out) {
    cmd->add_option("--config", config_path, "config JSON path (defaults used when omitted)");
    cmd->add_option("--set", overrides, "dotted config override key=value")->take_all();
    cmd->add_option(
        "--seed",
        [&overrides](const std::vector<std::string>& vals) {
          overrides.push_back("seed=" + vals.front());
          return true;
        },
        "run seed (shorthand for --set seed=N)");
    if (needs_out) cmd->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate source/target/eval dataset directories");
  add_common(gen, true);

  CLI::App* train = app.add_subcommand("train", "stage 1: supervised source-only training");
  add_common(train, true);

  CLI::App* adapt = app.add_subcommand("adapt", "stage 2: prototypical contrast adaptation");
  add_common(adapt, true);
  adapt->add_option("--checkpoint", checkpoint_path,
                    "stage-1 checkpoint (default: <out>/checkpoints/stage1.ckpt)");

  CLI::App* selftrain = app.add_subcommand("selftrain", "stage 3: pseudo-label self-training");
  add_common(selftrain, true);
  selftrain->add_option("--checkpoint", checkpoint_path,
                        "starting checkpoint (default: stage2.ckpt, falling back to stage1)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (optionally multi-scale)");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate")->required();
  eval_cmd->add_option("--mst", mst_csv, "comma-separated multi-scale testing factors");
  eval_cmd->add_option("--split", split, "source | target | target-eval (default)");
  eval_cmd->add_option("--out", out_dir, "optional directory for eval.json");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "cartesian ablation sweep over config axes");
  add_common(ablate_cmd, true);
  ablate_cmd->add_option("--axis", axis_specs, "axis key=v1,v2,... (repeatable)")
      ->take_all()
      ->required();

  CLI::App* report_cmd = app.add_subcommand("report", "regenerate report.md and plots for a run");
  report_cmd->add_option("--out", out_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error(kExitUnknownVerb, e.what());
    return kExitUnknownVerb;
  }

  try {
    if (gen->parsed()) {
      const PipelineConfig cfg = load_config_or_default(config_path, overrides);
      DataBundle data = prepare_data(cfg);
      const json spec_echo = scene_to_json(cfg.scene);
      write_dataset((fs::path(out_dir) / "source").string(), data.source.images,
                    &data.source.labels, spec_echo);
      write_dataset((fs::path(out_dir) / "target").string(), data.target.images,
                    &data.target.evaluation_labels(), spec_echo);
      write_dataset((fs::path(out_dir) / "target_eval").string(), data.eval_target.images,
                    &data.eval_target.evaluation_labels(), spec_echo);
      std::cout << "wrote datasets under " << out_dir << "\n";
      return kExitOk;
    }

    if (train->parsed()) {
      const PipelineConfig cfg = load_config_or_default(config_path, overrides);
      write_effective_config(cfg, out_dir);
      fs::create_directories(fs::path(out_dir) / "checkpoints");
      DataBundle data = prepare_data(cfg);
      SegModel<float> model = SegModel<float>::init(cfg.model, cfg.seed);
      auto metrics = open_metrics(out_dir, /*truncate=*/true);
      const StageSummary summary = stage1_source_only(cfg, data, model, &metrics);
      save_checkpoint((fs::path(out_dir) / "checkpoints" / "stage1.ckpt").string(),
                      model_to_checkpoint(model, cfg.stages.stage1_steps));
      update_run_summaries(out_dir, summary);
      render_report(out_dir);
      std::cout << "stage1 source mIoU " << summary.source_eval.miou << " target mIoU "
                << summary.target_eval.miou << "\n";
      return kExitOk;
    }

    if (adapt->parsed()) {
      const PipelineConfig cfg = load_config_or_default(config_path, overrides);
      write_effective_config(cfg, out_dir);
      const std::string ckpt = checkpoint_path.empty()
                                   ? (fs::path(out_dir) / "checkpoints" / "stage1.ckpt").string()
                                   : checkpoint_path;
      DataBundle data = prepare_data(cfg);
      SegModel<float> model = SegModel<float>::init(cfg.model, cfg.seed);
      model_from_checkpoint(model, load_checkpoint(ckpt));
      BankSet banks = initialize_banks(cfg, data, model);
      auto metrics = open_metrics(out_dir, /*truncate=*/false);
      const StageSummary summary = stage2_proca(cfg, data, model, banks, &metrics);
      Checkpoint out_ckpt = model_to_checkpoint(model, cfg.stages.stage2_steps);
      bank_to_checkpoint(out_ckpt, banks.feature, "proto_feat");
      bank_to_checkpoint(out_ckpt, banks.output, "proto_out");
      fs::create_directories(fs::path(out_dir) / "checkpoints");
      save_checkpoint((fs::path(out_dir) / "checkpoints" / "stage2.ckpt").string(), out_ckpt);
      update_run_summaries(out_dir, summary);
      render_report(out_dir);
      std::cout << "stage2 target mIoU " << summary.target_eval.miou << "\n";
      return kExitOk;
    }

    if (selftrain->parsed()) {
      const PipelineConfig cfg = load_config_or_default(config_path, overrides);
      write_effective_config(cfg, out_dir);
      std::string ckpt = checkpoint_path;
      if (ckpt.empty()) {
        const fs::path stage2 = fs::path(out_dir) / "checkpoints" / "stage2.ckpt";
        const fs::path stage1 = fs::path(out_dir) / "checkpoints" / "stage1.ckpt";
        ckpt = fs::exists(stage2) ? stage2.string() : stage1.string();
      }
      DataBundle data = prepare_data(cfg);
      SegModel<float> model = SegModel<float>::init(cfg.model, cfg.seed);
      model_from_checkpoint(model, load_checkpoint(ckpt));
      auto metrics = open_metrics(out_dir, /*truncate=*/false);
      const StageSummary summary = stage3_self_training(cfg, data, model, &metrics, out_dir);
      fs::create_directories(fs::path(out_dir) / "checkpoints");
      save_checkpoint((fs::path(out_dir) / "checkpoints" / "stage3.ckpt").string(),
                      model_to_checkpoint(model, cfg.stages.stage3_steps));
      update_run_summaries(out_dir, summary);
      render_report(out_dir);
      std::cout << "stage3 target mIoU " << summary.target_eval.miou << "\n";
      return kExitOk;
    }

    if (eval_cmd->parsed()) {
      const PipelineConfig cfg = load_config_or_default(config_path, overrides);
      SegModel<float> model = SegModel<float>::init(cfg.model, cfg.seed);
      model_from_checkpoint(model, load_checkpoint(checkpoint_path));
      DataBundle data = prepare_data(cfg);
      const std::vector<double> scales =
          mst_csv.empty() ? cfg.eval.mst_scales : parse_scale_list(mst_csv);

      EvalResult result;
      if (split == "source") {
        result = evaluate_model(model, data.source.images, data.source.labels, scales);
      } else if (split == "target") {
        result = evaluate_model(model, data.target.images, data.target.evaluation_labels(), scales);
      } else if (split == "target-eval") {
        result = evaluate_model(model, data.eval_target.images,
                                data.eval_target.evaluation_labels(), scales);
      } else {
        throw ConfigError("eval: unknown split '" + split + "'");
      }
      const json out = eval_result_json(result, split, scales);
      std::cout << out.dump(2) << "\n";
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream os(fs::path(out_dir) / "eval.json");
        os << out.dump(2) << "\n";
      }
      return kExitOk;
    }

    if (ablate_cmd->parsed()) {
      const PipelineConfig base = load_config_or_default(config_path, overrides);
      std::vector<AblationAxis> axes;
      for (const auto& spec : axis_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
          throw ConfigError("ablate: --axis expects key=v1,v2,..., got '" + spec + "'");
        AblationAxis axis;
        axis.key = spec.substr(0, eq);
        std::stringstream ss(spec.substr(eq + 1));
        std::string item;
        while (std::getline(ss, item, ',')) axis.values.push_back(item);
        axes.push_back(std::move(axis));
      }
      const auto cells =
          run_ablation_matrix(config_to_json(base), axes, out_dir, run_worker_count());
      int failed = 0;
      for (const auto& c : cells) failed += c.failed ? 1 : 0;
      std::cout << "ablation finished: " << cells.size() << " cells, " << failed << " failed; "
                << "table at " << (fs::path(out_dir) / "ablation.csv").string() << "\n";
      return failed == 0 ? kExitOk : kExitRuntime;
    }

    if (report_cmd->parsed()) {
      render_report(out_dir);
      std::cout << "report regenerated in " << out_dir << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    emit_error(kExitInvalidConfig, e.what());
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    emit_error(kExitRuntime, e.what());
    return kExitRuntime;
  }

  emit_error(kExitUnknownVerb, "no subcommand given");
  return kExitUnknownVerb;
}
