#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "proca/checkpoint.hpp"
#include "proca/config.hpp"
#include "proca/contrast.hpp"
#include "proca/datagen.hpp"
#include "proca/dataset_io.hpp"
#include "proca/evaluate.hpp"
#include "proca/metrics.hpp"
#include "proca/model.hpp"
#include "proca/optimizer.hpp"
#include "proca/prototypes.hpp"
#include "proca/pseudolabel.hpp"

namespace proca {

/// In-memory datasets for one run: labeled source, unlabeled target (training)
/// and a held-out target split used for all target-domain scoring.
struct DataBundle {
  LabeledBatch<float> source;
  UnlabeledBatch<float> target;
  UnlabeledBatch<float> eval_target;
};

inline constexpr std::uint64_t kEvalSeedOffset = 0x65766181u;

inline DataBundle prepare_data(const PipelineConfig& cfg) {
  DataBundle data;
  auto pair = generate_pair<float>(cfg.scene, cfg.data.n_source, cfg.data.n_target);
  data.source = std::move(pair.first);
  data.target = std::move(pair.second);
  SceneSpec eval_spec = cfg.scene;
  eval_spec.seed = splitmix64(cfg.scene.seed ^ kEvalSeedOffset);
  auto eval_pair = generate_pair<float>(eval_spec, 1, cfg.data.n_eval);
  data.eval_target = std::move(eval_pair.second);
  return data;
}

/// Final evaluations of one training stage.
struct StageSummary {
  int stage = 0;
  double wallclock_s = 0.0;
  EvalResult source_eval;
  EvalResult target_eval;
};

struct RunReport {
  PipelineConfig config;
  std::vector<StageSummary> stages;
  std::string run_dir;
};

namespace detail {

struct BatchDraw {
  Tensor4<float> images;
  LabelMap labels;
};

inline BatchDraw draw_batch(Rng& rng, const Tensor4<float>& images, const LabelMap* labels,
                            int batch_size) {
  BatchDraw out;
  out.images = Tensor4<float>(batch_size, images.c, images.h, images.w);
  if (labels) out.labels = LabelMap(batch_size, images.h, images.w);
  for (int i = 0; i < batch_size; ++i) {
    const int idx = rng.uniform_int(0, images.n - 1);
    out.images.image(i) = images.image(idx);
    if (labels) out.labels.image(i) = labels->image(idx);
  }
  return out;
}

inline void append_metrics(std::ostream* os, const MetricsRow& row) {
  if (os) *os << metrics_csv_line(row) << "\n";
}

inline MetricsRow eval_row(int stage, long step, const SegModel<float>& model,
                           const DataBundle& data) {
  MetricsRow row;
  row.stage = stage;
  row.step = step;
  row.miou_source = evaluate_model(model, data.source.images, data.source.labels).miou;
  row.miou_target =
      evaluate_model(model, data.eval_target.images, data.eval_target.evaluation_labels()).miou;
  return row;
}

inline std::uint32_t model_crc32(const SegModel<float>& model) {
  uLong crc = crc32(0L, Z_NULL, 0);
  model.for_each_param([&](const std::string&, const Mat<float>& t) {
    crc = crc32(crc, reinterpret_cast<const Bytef*>(t.data()),
                static_cast<uInt>(t.size() * sizeof(float)));
  });
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline Checkpoint model_to_checkpoint(const SegModel<float>& model, std::uint64_t step) {
  Checkpoint ckpt;
  ckpt.step = step;
  model.for_each_param(
      [&](const std::string& name, const Mat<float>& t) { ckpt.put_matrix(name, t); });
  return ckpt;
}

inline void model_from_checkpoint(SegModel<float>& model, const Checkpoint& ckpt) {
  model.for_each_param([&](const std::string& name, Mat<float>& t) {
    Mat<float> loaded = ckpt.get_matrix<float>(name);
    if (loaded.rows() != t.rows() || loaded.cols() != t.cols())
      throw InputError("checkpoint: shape mismatch for " + name +
                       " (configured model does not match file)");
    t = std::move(loaded);
  });
}

inline void bank_to_checkpoint(Checkpoint& ckpt, const PrototypeBank<float>& bank,
                               const std::string& prefix) {
  ckpt.put_matrix(prefix + ".vectors", bank.vectors);
  std::vector<std::int64_t> counts(bank.counts.data(), bank.counts.data() + bank.counts.size());
  ckpt.put_i64(prefix + ".counts", counts);
  std::vector<std::int64_t> mask(bank.initialized.size());
  for (Eigen::Index i = 0; i < bank.initialized.size(); ++i) mask[i] = bank.initialized[i] ? 1 : 0;
  ckpt.put_i64(prefix + ".mask", mask);
}

inline PrototypeBank<float> bank_from_checkpoint(const Checkpoint& ckpt, const std::string& prefix,
                                                 BankLevel level) {
  const Mat<float> vectors = ckpt.get_matrix<float>(prefix + ".vectors");
  PrototypeBank<float> bank =
      make_bank<float>(level, static_cast<int>(vectors.rows()), static_cast<int>(vectors.cols()));
  bank.vectors = vectors;
  const auto counts = ckpt.get_i64(prefix + ".counts");
  const auto mask = ckpt.get_i64(prefix + ".mask");
  for (int c = 0; c < bank.num_classes(); ++c) {
    bank.counts[c] = counts.at(c);
    bank.initialized[c] = mask.at(c) != 0;
  }
  return bank;
}

/// Stage 1: supervised training on the labeled source split.
inline StageSummary stage1_source_only(const PipelineConfig& cfg, const DataBundle& data,
                                       SegModel<float>& model, std::ostream* metrics) {
  const auto t0 = std::chrono::steady_clock::now();
  SgdPoly<float> opt(cfg.optim, cfg.stages.stage1_steps);
  Rng rng = Rng::derive(cfg.seed, {0x7331u, 1});
  for (long s = 0; s < cfg.stages.stage1_steps; ++s) {
    auto batch = detail::draw_batch(rng, data.source.images, &data.source.labels,
                                    cfg.stages.batch_size);
    auto fwd = forward(model, batch.images);
    const float loss = supervised_ce_loss(fwd.prob, batch.labels);
    auto grads = model.zero_grads();
    Mat<float> dlog = ce_grad_logits(fwd.prob, batch.labels);
    backward<float>(model, fwd, nullptr, &dlog, grads);
    const auto outcome = opt.step(model, grads, loss);
    if (!outcome.applied)
      throw std::runtime_error("stage1: aborted, " + outcome.diagnostic);

    MetricsRow row;
    row.stage = 1;
    row.step = s;
    row.lr = opt.lr_at(s);
    row.loss_ce = loss;
    row.loss_total = loss;
    detail::append_metrics(metrics, row);
    if ((s + 1) % cfg.stages.eval_interval == 0 && s + 1 < cfg.stages.stage1_steps)
      detail::append_metrics(metrics, detail::eval_row(1, s + 1, model, data));
  }
  StageSummary summary;
  summary.stage = 1;
  summary.source_eval = evaluate_model(model, data.source.images, data.source.labels);
  summary.target_eval =
      evaluate_model(model, data.eval_target.images, data.eval_target.evaluation_labels());
  MetricsRow final_row;
  final_row.stage = 1;
  final_row.step = cfg.stages.stage1_steps;
  final_row.miou_source = summary.source_eval.miou;
  final_row.miou_target = summary.target_eval.miou;
  detail::append_metrics(metrics, final_row);
  summary.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

/// Prototype banks for one adaptation run (feature level and output level).
struct BankSet {
  PrototypeBank<float> feature;
  PrototypeBank<float> output;
};

/// Initializes both banks with one pass over the full source split using the
/// current model. Labels travel to feature resolution by nearest neighbor.
inline BankSet initialize_banks(const PipelineConfig& cfg, const DataBundle& data,
                                const SegModel<float>& model) {
  const int C = cfg.scene.num_classes;
  BankSet banks;
  banks.feature = make_bank<float>(BankLevel::feature, cfg.model.feature_dim, C);
  banks.output = make_bank<float>(BankLevel::output, C, C);
  const int B = cfg.stages.batch_size;
  for (int start = 0; start < data.source.images.n; start += B) {
    const int count = std::min(B, data.source.images.n - start);
    Tensor4<float> chunk(count, 3, data.source.images.h, data.source.images.w);
    LabelMap labels(count, data.source.images.h, data.source.images.w);
    for (int i = 0; i < count; ++i) {
      chunk.image(i) = data.source.images.image(start + i);
      labels.image(i) = data.source.labels.image(start + i);
    }
    auto fwd = forward(model, chunk);
    const LabelMap labels_lr =
        nn_downsample_labels(labels, fwd.features().h, fwd.features().w);
    init_from_source(banks.feature, fwd.features().data, labels_lr);
    init_from_source(banks.output, fwd.prob.data, labels);
  }
  return banks;
}

/// Stage 2: prototypical contrast adaptation. Alternates supervised source
/// steps with feature/output-level contrastive terms against the prototype
/// banks, refreshing target pseudo-labels per batch at the contrast threshold
/// and updating the banks per the configured scheme.
inline StageSummary stage2_proca(const PipelineConfig& cfg, const DataBundle& data,
                                 SegModel<float>& model, BankSet& banks, std::ostream* metrics) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& ad = cfg.adaptation;
  const int C = cfg.scene.num_classes;

  {
    std::vector<int> missing = banks.feature.missing_classes();
    const auto missing_out = banks.output.missing_classes();
    missing.insert(missing.end(), missing_out.begin(), missing_out.end());
    if (!missing.empty()) {
      std::string msg = "stage2: prototype bank uninitialized for classes:";
      for (int c : missing) msg += " " + std::to_string(c);
      throw std::runtime_error(msg);
    }
  }
  if (ad.updating == UpdatingScheme::mixed) {
    seed_source_estimate(banks.feature);
    seed_source_estimate(banks.output);
  }

  SgdPoly<float> opt(cfg.optim, cfg.stages.stage2_steps);
  Rng rng = Rng::derive(cfg.seed, {0x7331u, 2});
  long skipped_t2s = 0;

  for (long s = 0; s < cfg.stages.stage2_steps; ++s) {
    auto src = detail::draw_batch(rng, data.source.images, &data.source.labels,
                                  cfg.stages.batch_size);
    auto tgt = detail::draw_batch(rng, data.target.images, nullptr, cfg.stages.batch_size);

    auto fs = forward(model, src.images);
    auto ft = forward(model, tgt.images);
    const auto pseudo_full = fixed_threshold_labels(ft.prob, ad.contrast_threshold);
    PseudoLabelMap<float> pseudo_lr;
    pseudo_lr.labels =
        nn_downsample_labels(pseudo_full.labels, ft.features().h, ft.features().w);
    const LabelMap src_labels_lr =
        nn_downsample_labels(src.labels, fs.features().h, fs.features().w);

    MetricsRow row;
    row.stage = 2;
    row.step = s;
    row.lr = opt.lr_at(s);

    double total = 0.0;
    Mat<float> dlog_s = Mat<float>::Zero(C, fs.prob.pixels());
    if (ad.keep_source_ce) {
      const float ce = supervised_ce_loss(fs.prob, src.labels);
      row.loss_ce = ce;
      total += ce;
      dlog_s += ce_grad_logits(fs.prob, src.labels);
    }

    const float lam = static_cast<float>(ad.lambda_contra);
    Mat<float> dfeat_s, dfeat_t, dprob_s, dprob_t;
    if (ad.level_feature) {
      dfeat_s = Mat<float>::Zero(cfg.model.feature_dim, fs.features().pixels());
      dfeat_t = Mat<float>::Zero(cfg.model.feature_dim, ft.features().pixels());
      double level_loss = 0.0;
      if (ad.domain_s2s)
        level_loss += contrast_ce(fs.features().data, banks.feature, src_labels_lr, ad.tau_feat,
                                  ad.normalize_similarity, &dfeat_s, lam)
                          .loss;
      if (ad.domain_t2s) {
        const auto term = contrast_ce(ft.features().data, banks.feature, pseudo_lr.labels,
                                      ad.tau_feat, ad.normalize_similarity, &dfeat_t, lam);
        if (term.valid == 0) ++skipped_t2s;
        level_loss += term.loss;
      }
      row.loss_contra_feat = level_loss;
      total += ad.lambda_contra * level_loss;
    }
    if (ad.level_output) {
      dprob_s = Mat<float>::Zero(C, fs.prob.pixels());
      dprob_t = Mat<float>::Zero(C, ft.prob.pixels());
      double level_loss = 0.0;
      if (ad.domain_s2s)
        level_loss += contrast_ce(fs.prob.data, banks.output, src.labels, ad.tau_out,
                                  ad.normalize_similarity, &dprob_s, lam)
                          .loss;
      if (ad.domain_t2s) {
        const auto term = contrast_ce(ft.prob.data, banks.output, pseudo_full.labels, ad.tau_out,
                                      ad.normalize_similarity, &dprob_t, lam);
        if (term.valid == 0) ++skipped_t2s;
        level_loss += term.loss;
      }
      row.loss_contra_out = level_loss;
      total += ad.lambda_contra * level_loss;
    }
    row.loss_total = total;

    if (ad.level_output) dlog_s += nn::softmax_backward(dprob_s, fs.prob.data);
    Mat<float> dlog_t;
    if (ad.level_output) dlog_t = nn::softmax_backward(dprob_t, ft.prob.data);

    auto grads = model.zero_grads();
    backward<float>(model, fs, ad.level_feature ? &dfeat_s : nullptr, &dlog_s, grads);
    const bool target_backward = ad.level_feature || ad.level_output;
    if (target_backward)
      backward<float>(model, ft, ad.level_feature ? &dfeat_t : nullptr,
                      ad.level_output ? &dlog_t : nullptr, grads);

    const auto outcome = opt.step(model, grads, total);
    if (!outcome.applied)
      throw std::runtime_error("stage2: aborted, " + outcome.diagnostic);

    // prototype updating (detached statistics of this step's batches)
    if (ad.updating == UpdatingScheme::statistical) {
      update_statistical(banks.feature, batch_stats(fs.features().data, src_labels_lr, C));
      update_statistical(banks.output, batch_stats(fs.prob.data, src.labels, C));
    } else if (ad.updating == UpdatingScheme::mixed) {
      update_mixed(banks.feature, batch_stats(fs.features().data, src_labels_lr, C),
                   batch_stats(ft.features().data, pseudo_lr.labels, C), ad.momentum_m);
      update_mixed(banks.output, batch_stats(fs.prob.data, src.labels, C),
                   batch_stats(ft.prob.data, pseudo_full.labels, C), ad.momentum_m);
    }

    detail::append_metrics(metrics, row);
    if ((s + 1) % cfg.stages.eval_interval == 0 && s + 1 < cfg.stages.stage2_steps)
      detail::append_metrics(metrics, detail::eval_row(2, s + 1, model, data));
  }
  if (skipped_t2s > 0)
    std::cerr << "stage2: " << skipped_t2s
              << " cross-domain terms skipped (no pixel cleared the confidence threshold)\n";

  StageSummary summary;
  summary.stage = 2;
  summary.source_eval = evaluate_model(model, data.source.images, data.source.labels);
  summary.target_eval =
      evaluate_model(model, data.eval_target.images, data.eval_target.evaluation_labels());
  MetricsRow final_row;
  final_row.stage = 2;
  final_row.step = cfg.stages.stage2_steps;
  final_row.miou_source = summary.source_eval.miou;
  final_row.miou_target = summary.target_eval.miou;
  detail::append_metrics(metrics, final_row);
  summary.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

/// Stage 3: self-training. Builds class-wise thresholds (adaptive) or a fixed
/// threshold (naive) from the current model, pseudo-labels the target split,
/// optionally persists it in the dataset format, then retrains on
/// source + pseudo-labeled target with the supervised objective.
inline StageSummary stage3_self_training(const PipelineConfig& cfg, const DataBundle& data,
                                         SegModel<float>& model, std::ostream* metrics,
                                         const std::string& run_dir = "") {
  namespace fs_ns = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.self_training.mode == SelfTrainingMode::off)
    throw ConfigError("stage3: self_training.mode is off");

  PseudoLabelMap<float> pseudo;
  nlohmann::json thresholds_json;
  thresholds_json["model_checksum"] = detail::model_crc32(model);
  if (cfg.self_training.mode == SelfTrainingMode::adaptive) {
    const auto sets = build_confidence_sets(model, data.target.images, cfg.stages.batch_size);
    const auto table = adaptive_thresholds<float>(sets, cfg.self_training.eta);
    pseudo = generate_pseudo_labels(model, data.target.images, table, cfg.stages.batch_size);
    thresholds_json["eta"] = table.eta;
    nlohmann::json by_class = nlohmann::json::object();
    for (std::size_t c = 0; c < table.thresholds.size(); ++c)
      if (table.thresholds[c]) by_class[std::to_string(c + 1)] = *table.thresholds[c];
    thresholds_json["thresholds"] = by_class;
  } else {
    pseudo.labels = LabelMap(data.target.images.n, data.target.images.h, data.target.images.w);
    pseudo.confidence = Arr<float>::Zero(pseudo.labels.pixels());
    const int B = cfg.stages.batch_size;
    for (int start = 0; start < data.target.images.n; start += B) {
      const int count = std::min(B, data.target.images.n - start);
      Tensor4<float> chunk(count, 3, data.target.images.h, data.target.images.w);
      for (int i = 0; i < count; ++i) chunk.image(i) = data.target.images.image(start + i);
      const auto part =
          fixed_threshold_labels(forward(model, chunk).prob, cfg.self_training.naive_threshold);
      const Eigen::Index offset = pseudo.labels.col_index(start, 0, 0);
      pseudo.labels.values.segment(offset, part.labels.values.size()) = part.labels.values;
      pseudo.confidence.segment(offset, part.confidence.size()) = part.confidence;
    }
    thresholds_json["fixed_threshold"] = cfg.self_training.naive_threshold;
  }

  const long labeled = (pseudo.labels.values != kIgnoreIndex).count();
  if (labeled == 0) throw std::runtime_error("stage3: empty pseudo-label set, aborting");

  if (!run_dir.empty()) {
    std::ofstream os(fs_ns::path(run_dir) / "thresholds.json");
    os << thresholds_json.dump(2) << "\n";
    write_dataset((fs_ns::path(run_dir) / "pseudo_labels").string(), data.target.images,
                  &pseudo.labels, scene_to_json(cfg.scene));
  }

  SgdPoly<float> opt(cfg.optim, cfg.stages.stage3_steps);
  Rng rng = Rng::derive(cfg.seed, {0x7331u, 3});
  const int B = cfg.stages.batch_size;
  const int n_src = (B + 1) / 2;

  for (long s = 0; s < cfg.stages.stage3_steps; ++s) {
    Tensor4<float> batch(B, 3, cfg.scene.height, cfg.scene.width);
    LabelMap labels(B, cfg.scene.height, cfg.scene.width);
    for (int i = 0; i < B; ++i) {
      if (i < n_src) {
        const int idx = rng.uniform_int(0, data.source.images.n - 1);
        batch.image(i) = data.source.images.image(idx);
        labels.image(i) = data.source.labels.image(idx);
      } else {
        const int idx = rng.uniform_int(0, data.target.images.n - 1);
        batch.image(i) = data.target.images.image(idx);
        labels.image(i) = pseudo.labels.image(idx);
      }
    }
    auto fwd = forward(model, batch);
    const float loss = supervised_ce_loss(fwd.prob, labels);
    auto grads = model.zero_grads();
    Mat<float> dlog = ce_grad_logits(fwd.prob, labels);
    backward<float>(model, fwd, nullptr, &dlog, grads);
    const auto outcome = opt.step(model, grads, loss);
    if (!outcome.applied)
      throw std::runtime_error("stage3: aborted, " + outcome.diagnostic);

    MetricsRow row;
    row.stage = 3;
    row.step = s;
    row.lr = opt.lr_at(s);
    row.loss_ce = loss;
    row.loss_total = loss;
    detail::append_metrics(metrics, row);
    if ((s + 1) % cfg.stages.eval_interval == 0 && s + 1 < cfg.stages.stage3_steps)
      detail::append_metrics(metrics, detail::eval_row(3, s + 1, model, data));
  }

  StageSummary summary;
  summary.stage = 3;
  summary.source_eval = evaluate_model(model, data.source.images, data.source.labels);
  summary.target_eval =
      evaluate_model(model, data.eval_target.images, data.eval_target.evaluation_labels());
  MetricsRow final_row;
  final_row.stage = 3;
  final_row.step = cfg.stages.stage3_steps;
  final_row.miou_source = summary.source_eval.miou;
  final_row.miou_target = summary.target_eval.miou;
  detail::append_metrics(metrics, final_row);
  summary.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

namespace detail {

inline nlohmann::json eval_to_json(const EvalResult& e) {
  nlohmann::json j;
  j["miou"] = e.miou;
  j["iou"] = std::vector<double>(e.iou.data(), e.iou.data() + e.iou.size());
  j["present"] = e.present;
  j["excluded"] = e.excluded;
  return j;
}

}  // namespace detail

/// Merges one stage's final evaluation into final_eval.json (and wall-clock
/// into timing.json); the report generator renders from these files.
inline void update_run_summaries(const std::string& run_dir, const StageSummary& summary) {
  namespace fs_ns = std::filesystem;
  const auto load = [](const fs_ns::path& path) {
    std::ifstream is(path);
    return is ? nlohmann::json::parse(is) : nlohmann::json::object();
  };
  const std::string key = "stage" + std::to_string(summary.stage);

  nlohmann::json evals = load(fs_ns::path(run_dir) / "final_eval.json");
  nlohmann::json entry;
  entry["source"] = detail::eval_to_json(summary.source_eval);
  entry["target"] = detail::eval_to_json(summary.target_eval);
  evals[key] = entry;
  std::ofstream eos(fs_ns::path(run_dir) / "final_eval.json");
  eos << evals.dump(2) << "\n";

  nlohmann::json timing = load(fs_ns::path(run_dir) / "timing.json");
  timing[key] = summary.wallclock_s;
  std::ofstream tos(fs_ns::path(run_dir) / "timing.json");
  tos << timing.dump(2) << "\n";
}

/// Runs stages 1..max_stage into run_dir: config echo, metrics.csv,
/// checkpoints/stageN.ckpt, thresholds/pseudo-labels (stage 3), final_eval and
/// timing summaries.
inline RunReport run_pipeline(const PipelineConfig& cfg, const std::string& run_dir,
                              int max_stage = 3) {
  namespace fs_ns = std::filesystem;
  fs_ns::create_directories(fs_ns::path(run_dir) / "checkpoints");

  {
    std::ofstream os(fs_ns::path(run_dir) / "config.json");
    os << config_to_json(cfg).dump(2) << "\n";
  }

  std::ofstream metrics(fs_ns::path(run_dir) / "metrics.csv");
  metrics << metrics_csv_header() << "\n";

  RunReport report;
  report.config = cfg;
  report.run_dir = run_dir;

  DataBundle data = prepare_data(cfg);
  SegModel<float> model = SegModel<float>::init(cfg.model, cfg.seed);

  report.stages.push_back(stage1_source_only(cfg, data, model, &metrics));
  save_checkpoint((fs_ns::path(run_dir) / "checkpoints" / "stage1.ckpt").string(),
                  model_to_checkpoint(model, cfg.stages.stage1_steps));

  if (max_stage >= 2 && cfg.stages.stage2_steps > 0) {
    BankSet banks = initialize_banks(cfg, data, model);
    report.stages.push_back(stage2_proca(cfg, data, model, banks, &metrics));
    Checkpoint ckpt = model_to_checkpoint(model, cfg.stages.stage2_steps);
    bank_to_checkpoint(ckpt, banks.feature, "proto_feat");
    bank_to_checkpoint(ckpt, banks.output, "proto_out");
    save_checkpoint((fs_ns::path(run_dir) / "checkpoints" / "stage2.ckpt").string(), ckpt);
  }

  if (max_stage >= 3 && cfg.self_training.mode != SelfTrainingMode::off &&
      cfg.stages.stage3_steps > 0) {
    report.stages.push_back(stage3_self_training(cfg, data, model, &metrics, run_dir));
    save_checkpoint((fs_ns::path(run_dir) / "checkpoints" / "stage3.ckpt").string(),
                    model_to_checkpoint(model, cfg.stages.stage3_steps));
  }

  metrics.close();
  for (const auto& summary : report.stages) update_run_summaries(run_dir, summary);
  return report;
}

}  // namespace proca
