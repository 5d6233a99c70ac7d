#pragma once

#include <string>
#include <vector>

#include "stefan/config.hpp"

namespace stefan {

struct StageResult {
  std::string name;
  bool ran = false;
  bool pass = false;
  double seconds = 0.0;
  std::vector<std::string> files;  // written outputs, relative to the run directory
  std::string notes;               // one line of key numbers
};

struct RunManifest {
  std::string config_hash;
  std::string out_dir;
  std::vector<StageResult> stages;
  bool all_pass = false;
};

// Stage names in execution order: homogenize, greens, solve, barriers,
// nearfield, selfsim, sweep, report.
const std::vector<std::string>& pipeline_stage_names();

// Runs the requested stages plus their prerequisites, writes per-stage CSV
// tables, report.md, and manifest.json under out_dir. Unknown stage names and
// box-too-small situations raise ConfigError; solver breakdowns propagate as
// runtime_error.
RunManifest run_pipeline(const ExperimentConfig& cfg, const std::vector<std::string>& requested,
                         const std::string& out_dir);

}  // namespace stefan
