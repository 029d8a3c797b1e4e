#pragma once

// Inner-product kernel regression K(x, z) = sum_k c_k P_k(x . z) and its
// exact population error against the single-index target.

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "meanfield/model.hpp"
#include "meanfield/nn.hpp"

namespace meanfield::kernel {

inline constexpr int kMaxSamples = 20000;

struct KernelSpec {
  Coeffs c{0.0, 0.0, 1.0, 0.0, 1.0};
  double ridge = 1e-8;

  // Throws ConfigError for negative coefficients, a negative ridge, or
  // c_2 = c_4 = 0.
  void validate() const;
  double at_one() const;
};

// K_ij = kappa(x_i . x_j), exactly symmetric with diagonal kappa(1).
Eigen::MatrixXd gram(const nn::Dataset& data, const KernelSpec& ks);

struct KernelFit {
  Eigen::VectorXd beta;
  double rcond = 1.0;
  bool pseudo_inverse = false;
};

// Solves (K + ridge * n * I) beta = y by Cholesky; ridge 0 uses the
// eigen-pseudo-inverse with cutoff 1e-10 |K|. Throws NumericalError when the
// factorization fails.
KernelFit fit(const nn::Dataset& data, const KernelSpec& ks);
// Same, consuming a precomputed Gram matrix (overwritten).
KernelFit fit_gram(Eigen::MatrixXd&& K, const Eigen::VectorXd& y, const KernelSpec& ks);

// E_x (f - y)^2 for f = sum_i beta_i K(x_i, .), evaluated blockwise from
// Legendre Gram blocks without Monte Carlo.
double exact_kernel_population_loss(const KernelFit& f, const nn::Dataset& data,
                                    const KernelSpec& ks, const ModelSpec& spec);

struct SeparationOptions {
  std::vector<int> n_grid{250, 500, 1000, 2000, 4000, 8000};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int width = 256;
  double eta = 0.5;
  int steps = 2000;
  // Min-norm interpolation costs a dense eigendecomposition; skipped above
  // this n.
  bool include_minnorm = true;
  int minnorm_max_n = 2000;
  int threads = 1;
  double max_wall_seconds = 0.0;  // 0: unlimited
  bool record_wall_time = false;
};

struct SeparationRow {
  int d;
  int n;
  std::uint64_t seed;
  std::string method;
  double population_loss;
  double wall_time_s;
};

struct MedianRow {
  int n;
  std::string method;
  double median_loss;
};

struct SeparationTable {
  std::vector<SeparationRow> rows;
  std::vector<MedianRow> medians;
  double tau = 0.0;
  std::optional<int> nn_crossing;
  std::optional<int> kernel_crossing;
  std::optional<int> minnorm_crossing;
  bool partial = false;
  int d = 0;

  // NN crossing strictly before the ridge kernel's, or the kernel never
  // crosses within the grid.
  bool separated() const;
};

// Population losses on the E (f - y)^2 scale, so the NN value is twice
// exact_population_loss. Threshold tau = 3/4 h_4^2.
SeparationTable separation_experiment(const ModelSpec& spec, const KernelSpec& ks,
                                      const SeparationOptions& opts);

// Cell rows, then per-(n, method) medians (seed column "median"), then one
// crossing row per method (seed column "crossing", n "none" if never).
void write_separation_csv(std::ostream& out, const SeparationTable& table);

}  // namespace meanfield::kernel
