#include "meanfield/kernel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

#include "meanfield/csv.hpp"
#include "meanfield/error.hpp"
#include "meanfield/rng.hpp"

namespace meanfield::kernel {
namespace {

constexpr Eigen::Index kBlock = 256;

nn::Dataset prefix(const nn::Dataset& full, int n) {
  nn::Dataset d;
  d.X = full.X.topRows(n);
  d.y = full.y.head(n);
  d.seed = full.seed;
  return d;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  if (k == 0) return std::nan("");
  return (k % 2 == 1) ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

}  // namespace

void KernelSpec::validate() const {
  for (double x : c) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("kernel coefficients must be >= 0");
  }
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("ridge must be >= 0");
  if (c[2] == 0.0 && c[4] == 0.0) throw ConfigError("kernel needs c_2 > 0 or c_4 > 0");
}

double KernelSpec::at_one() const {
  double s = 0.0;
  for (double x : c) s += x;
  return s;
}

Eigen::MatrixXd gram(const nn::Dataset& data, const KernelSpec& ks) {
  ks.validate();
  const Eigen::Index n = data.X.rows();
  if (n > kMaxSamples) throw ConfigError("kernel supports n <= 20000");
  const nn::Quartic kappa(static_cast<int>(data.X.cols()), ks.c, false);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  K.selfadjointView<Eigen::Lower>().rankUpdate(Eigen::MatrixXd(data.X));
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = ks.at_one();
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = kappa.value(K(i, j));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

KernelFit fit(const nn::Dataset& data, const KernelSpec& ks) {
  return fit_gram(gram(data, ks), data.y, ks);
}

KernelFit fit_gram(Eigen::MatrixXd&& K, const Eigen::VectorXd& y, const KernelSpec& ks) {
  ks.validate();
  const Eigen::Index n = K.rows();
  if (K.cols() != n || y.size() != n) throw ConfigError("Gram matrix and labels disagree in size");
  KernelFit out;
  if (n == 0) {
    out.beta = Eigen::VectorXd(0);
    return out;
  }
  if (ks.ridge == 0.0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    if (es.info() != Eigen::Success) throw NumericalError("kernel eigendecomposition failed");
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    const double cut = 1e-10 * top;
    Eigen::VectorXd coef = es.eigenvectors().transpose() * y;
    double smallest_kept = top;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (ev[i] > cut) {
        coef[i] /= ev[i];
        smallest_kept = std::min(smallest_kept, ev[i]);
      } else {
        coef[i] = 0.0;
      }
    }
    out.beta = es.eigenvectors() * coef;
    out.rcond = top > 0.0 ? smallest_kept / top : 0.0;
    out.pseudo_inverse = true;
    return out;
  }
  K.diagonal().array() += ks.ridge * static_cast<double>(n);
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(K);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "kernel Cholesky failed (n=" << n << ", ridge=" << ks.ridge << ")";
    throw NumericalError(msg.str());
  }
  out.rcond = llt.rcond();
  out.beta = llt.solve(y);
  if (!out.beta.allFinite()) throw NumericalError("kernel solve produced non-finite coefficients");
  return out;
}

double exact_kernel_population_loss(const KernelFit& f, const nn::Dataset& data,
                                    const KernelSpec& ks, const ModelSpec& spec) {
  const Eigen::Index n = data.X.rows();
  if (f.beta.size() != n) throw ConfigError("fit does not match dataset");
  const int d = spec.d();
  double energy = 0.0;
  for (int k = 0; k < kCoeffs; ++k) energy += spec.h_hat(k) * spec.h_hat(k);
  if (n == 0) return energy;

  std::array<std::vector<double>, kCoeffs> mono;
  std::array<double, kCoeffs> dim{};
  for (int k = 0; k < kCoeffs; ++k) {
    mono[k] = legendre::monomial_coefficients(k, d);
    dim[k] = static_cast<double>(legendre::harmonic_dim(k, d));
  }
  auto P = [&](int k, double t) {
    double acc = 0.0;
    for (auto it = mono[k].rbegin(); it != mono[k].rend(); ++it) acc = acc * t + *it;
    return acc;
  };

  // beta^T G_k beta by row blocks of X X^T.
  std::array<double, kCoeffs> quad{};
  for (Eigen::Index i0 = 0; i0 < n; i0 += kBlock) {
    const Eigen::Index b = std::min(kBlock, n - i0);
    const Eigen::MatrixXd T = data.X.middleRows(i0, b) * data.X.transpose();
    for (int k = 0; k < kCoeffs; ++k) {
      if (ks.c[k] == 0.0) continue;
      const Eigen::MatrixXd Pk = T.unaryExpr([&](double t) { return P(k, t); });
      quad[k] += f.beta.segment(i0, b).dot(Pk * f.beta);
    }
  }
  const Eigen::VectorXd w = data.X * spec.q_star();
  double loss = energy;
  for (int k = 0; k < kCoeffs; ++k) {
    if (ks.c[k] == 0.0) continue;
    double lin = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) lin += f.beta[i] * P(k, w[i]);
    loss += ks.c[k] * ks.c[k] / dim[k] * quad[k] - 2.0 * ks.c[k] * spec.h_hat(k) / std::sqrt(dim[k]) * lin;
  }
  return loss;
}

bool SeparationTable::separated() const {
  if (!kernel_crossing) return true;
  return nn_crossing && *nn_crossing < *kernel_crossing;
}

SeparationTable separation_experiment(const ModelSpec& spec, const KernelSpec& ks,
                                      const SeparationOptions& opts) {
  ks.validate();
  if (opts.n_grid.empty() || opts.seeds.empty()) throw ConfigError("separation needs n_grid and seeds");
  for (int n : opts.n_grid) {
    if (n < 0 || n > kMaxSamples) throw ConfigError("n_grid values must lie in [0, 20000]");
  }
  if (opts.width < 1 || opts.steps < 0 || !(opts.eta > 0.0)) {
    throw ConfigError("separation needs width >= 1, steps >= 0, eta > 0");
  }
  const int d = spec.d();
  const int n_max = *std::max_element(opts.n_grid.begin(), opts.n_grid.end());

  std::vector<nn::Dataset> datasets;
  for (auto seed : opts.seeds) {
    auto rng = substream(seed, "separation", "data");
    datasets.push_back(nn::make_dataset(spec, n_max, rng, seed));
  }

  struct Cell {
    int n;
    std::size_t seed_idx;
    std::string method;
  };
  std::vector<Cell> cells;
  for (int n : opts.n_grid) {
    for (std::size_t s = 0; s < opts.seeds.size(); ++s) {
      cells.push_back({n, s, "nn"});
      cells.push_back({n, s, "kernel_ridge"});
      if (opts.include_minnorm && n <= opts.minnorm_max_n) cells.push_back({n, s, "kernel_minnorm"});
    }
  }

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::vector<std::optional<SeparationRow>> results(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> out_of_budget{false};

  auto run_cell = [&](const Cell& c) {
    const auto t0 = clock::now();
    const nn::Dataset data = prefix(datasets[c.seed_idx], c.n);
    const std::uint64_t seed = opts.seeds[c.seed_idx];
    double loss = 0.0;
    if (c.method == "nn") {
      auto rng = substream(seed, "separation", "init");
      nn::NetworkState s = nn::init_network(d, opts.width, rng);
      if (c.n > 0) {
        for (int it = 0; it < opts.steps; ++it) nn::gd_step(s, spec, data, opts.eta);
      }
      loss = 2.0 * nn::exact_population_loss(s, spec);
    } else {
      KernelSpec k = ks;
      if (c.method == "kernel_minnorm") k.ridge = 0.0;
      const KernelFit f = fit(data, k);
      loss = exact_kernel_population_loss(f, data, k, spec);
    }
    const double wall = std::chrono::duration<double>(clock::now() - t0).count();
    return SeparationRow{d, c.n, seed, c.method, loss, opts.record_wall_time ? wall : 0.0};
  };

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      if (opts.max_wall_seconds > 0.0 &&
          std::chrono::duration<double>(clock::now() - start).count() > opts.max_wall_seconds) {
        out_of_budget = true;
        continue;
      }
      try {
        results[i] = run_cell(cells[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw NumericalError("separation cell failed: " + e);
  }

  SeparationTable table;
  table.d = d;
  table.tau = 0.75 * spec.h_hat(4) * spec.h_hat(4);
  table.partial = out_of_budget.load();
  std::map<std::pair<int, std::string>, std::vector<double>> by_cell;
  for (const auto& r : results) {
    if (!r) continue;
    table.rows.push_back(*r);
    by_cell[{r->n, r->method}].push_back(r->population_loss);
  }
  auto crossing = [&](const std::string& method) -> std::optional<int> {
    std::vector<int> grid = opts.n_grid;
    std::sort(grid.begin(), grid.end());
    for (int n : grid) {
      auto it = by_cell.find({n, method});
      if (it != by_cell.end() && median(it->second) < table.tau) return n;
    }
    return std::nullopt;
  };
  for (int n : opts.n_grid) {
    for (const char* m : {"nn", "kernel_ridge", "kernel_minnorm"}) {
      auto it = by_cell.find({n, m});
      if (it != by_cell.end()) table.medians.push_back({n, m, median(it->second)});
    }
  }
  table.nn_crossing = crossing("nn");
  table.kernel_crossing = crossing("kernel_ridge");
  table.minnorm_crossing = crossing("kernel_minnorm");
  return table;
}

void write_separation_csv(std::ostream& out, const SeparationTable& t) {
  csv::header(out, {"d", "n", "seed", "method", "population_loss", "wall_time_s"});
  for (const auto& r : t.rows) {
    out << r.d << ',' << r.n << ',' << r.seed << ',' << r.method << ',' << csv::num(r.population_loss)
        << ',' << csv::num(r.wall_time_s) << '\n';
  }
  for (const auto& m : t.medians) {
    out << t.d << ',' << m.n << ",median," << m.method << ',' << csv::num(m.median_loss) << ",0\n";
  }
  auto crossing_row = [&](const char* method, const std::optional<int>& c) {
    out << t.d << ',' << (c ? std::to_string(*c) : std::string("none")) << ",crossing," << method
        << ',' << csv::num(t.tau) << ",0\n";
  };
  crossing_row("nn", t.nn_crossing);
  crossing_row("kernel_ridge", t.kernel_crossing);
  crossing_row("kernel_minnorm", t.minnorm_crossing);
}

}  // namespace meanfield::kernel
