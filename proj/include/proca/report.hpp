#pragma once

#include <string>

namespace proca {

/// Regenerates report.md and plots/ from the artifacts persisted in a run
/// directory (config.json, metrics.csv, final_eval.json, timing.json,
/// thresholds.json). Reads only stored values, so repeated invocations emit
/// byte-identical output.
void render_report(const std::string& run_dir);

}  // namespace proca
