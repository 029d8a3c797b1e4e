#pragma once

// Experiment configuration: flat key = value lines grouped under optional
// [model], [numeric], [output] sections. Unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "meanfield/kernel.hpp"
#include "meanfield/model.hpp"
#include "meanfield/nn.hpp"
#include "meanfield/popdyn.hpp"

namespace meanfield::config {

enum class Experiment { Validate, Popdyn, Train, Couple, Kernel, Separation };

const char* to_string(Experiment e);
std::optional<Experiment> experiment_from_string(std::string_view s);

enum class TrainMethod { Gd, Flow };

struct ExperimentConfig {
  std::optional<Experiment> experiment;

  // [model]
  int d = 30;
  Coeffs sigma{0.0, 0.0, 1.0, 0.0, 1.0};
  double gamma2 = 0.05;
  double gamma4 = 0.005;
  double h0 = 0.0, h1 = 0.0, h3 = 0.0;
  std::optional<double> h2, h4;
  double c1 = 4.0, c2 = 0.1;

  // [numeric]
  int particles = legendre::kDefaultNodes;
  popdyn::InitMode init = popdyn::InitMode::Quadrature;
  int width = 64;
  int samples = 2000;
  double eta = 1e-4;
  double dt = 0.01;
  double t_max = 1e4;
  double eps = 0.05;
  std::vector<std::uint64_t> seeds{1};
  int steps = 10000;
  double horizon = 5.0;
  nn::GradientKind gradient = nn::GradientKind::Empirical;
  TrainMethod method = TrainMethod::Gd;
  Coeffs kernel_c{0.0, 0.0, 1.0, 0.0, 1.0};
  double ridge = 1e-8;
  std::vector<int> n_grid{250, 500, 1000, 2000, 4000, 8000};
  int sep_width = 256;
  double sep_eta = 0.5;
  int sep_steps = 2000;
  bool minnorm = true;
  int minnorm_max_n = 2000;
  double max_wall_seconds = 0.0;
  int threads = 1;

  // [output]
  std::string out_dir = "out";
  int log_interval = 10;
  bool dat = false;
  bool record_wall_time = false;

  ModelSpec model_spec() const;
  AssumptionConstants constants() const { return {c1, c2}; }
  kernel::KernelSpec kernel_spec() const;
  kernel::SeparationOptions separation_options() const;
};

// Throws ConfigError naming the offending key or line. The result passes
// validate_values; the experiment may still be unset.
ExperimentConfig parse_config_string(std::string_view text, std::string_view origin = "<string>");
ExperimentConfig parse_config_file(const std::string& path);

// Sets one key as if it appeared in the file (last write wins).
void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// Checks cross-field invariants: counts positive, eps in (0, 1), seeds
// non-empty, experiment chosen, model well-formed.
void validate(const ExperimentConfig& cfg);
// Same checks without requiring the experiment.
void validate_values(const ExperimentConfig& cfg);

// Deterministic key = value dump of every field; the manifest hashes it.
std::string canonical(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::vector<std::string> known_keys();

}  // namespace meanfield::config
