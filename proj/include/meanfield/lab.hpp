#pragma once

// Experiment runner behind the meanfield-lab tool.

#include <cstdint>
#include <string>
#include <vector>

#include "meanfield/config.hpp"

namespace meanfield::lab {

struct OutputFile {
  std::string path;  // relative to the output directory
  std::string seed;  // seed label, or "all"
  std::string kind;
};

struct RunManifest {
  std::string experiment;
  std::string config_hash;  // 16 hex digits
  std::string tool_version;
  double wall_time_s = 0.0;
  std::string out_dir;
  std::vector<OutputFile> files;
  std::vector<std::string> flags;  // e.g. "did_not_converge:seed=1", "partial"
  std::string status = "ok";
  std::string error;
};

const char* version();

// Validates, dispatches, and writes every output plus manifest.json into
// cfg.out_dir. On failure the manifest is still written (status "error") and
// the exception propagates.
RunManifest run(const config::ExperimentConfig& cfg);

std::string manifest_json(const RunManifest& m);

}  // namespace meanfield::lab
