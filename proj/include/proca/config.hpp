#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "proca/datagen.hpp"
#include "proca/model.hpp"
#include "proca/optimizer.hpp"

namespace proca {

enum class UpdatingScheme { fixed, statistical, mixed };
enum class SelfTrainingMode { off, naive, adaptive };

struct StageBudgets {
  long stage1_steps = 2000;
  long stage2_steps = 2000;
  long stage3_steps = 2000;
  int batch_size = 8;
  long eval_interval = 500;
};

struct DatasetSizes {
  int n_source = 100;
  int n_target = 100;
  int n_eval = 64;
};

struct AdaptationConfig {
  UpdatingScheme updating = UpdatingScheme::mixed;
  bool level_feature = true;
  bool level_output = true;
  bool domain_s2s = true;
  bool domain_t2s = true;
  double tau_feat = 0.1;
  double tau_out = 0.1;
  double lambda_contra = 1.0;
  double momentum_m = 0.9;
  double contrast_threshold = 0.9;
  bool normalize_similarity = false;
  bool keep_source_ce = true;  // supervised source loss stays on during adaptation
};

struct SelfTrainingConfig {
  SelfTrainingMode mode = SelfTrainingMode::adaptive;
  double eta = 0.6;
  double naive_threshold = 0.9;
};

struct EvalConfig {
  std::vector<double> mst_scales;  // empty = plain single-scale testing
};

/// Whole-experiment configuration. The JSON schema is versioned and strict:
/// unknown keys are hard errors so a typo cannot silently skew an ablation.
struct PipelineConfig {
  int version = 1;
  std::uint64_t seed = 0;
  SceneSpec scene;
  ModelConfig model;  // num_classes is derived from scene.num_classes
  OptimConfig optim;
  StageBudgets stages;
  DatasetSizes data;
  AdaptationConfig adaptation;
  SelfTrainingConfig self_training;
  EvalConfig eval;
};

PipelineConfig default_config();

/// Strict parse + range validation; throws ConfigError with the offending key.
PipelineConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);

/// Applies one dotted override ("adaptation.tau_feat=0.2") onto a config JSON
/// document. Bare aliases for common ablation axes (eta, updating, ...) are
/// accepted. The path must already exist: overriding an unknown key is an
/// error, consistent with strict parsing.
void apply_override(nlohmann::json& doc, const std::string& dotted_key,
                    const std::string& value);

PipelineConfig load_config_file(const std::string& path,
                                const std::vector<std::string>& overrides = {});

std::string to_string(UpdatingScheme s);
std::string to_string(SelfTrainingMode m);

}  // namespace proca
