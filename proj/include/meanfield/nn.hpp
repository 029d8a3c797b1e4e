#pragma once

// Finite-width two-layer network f(x) = sum_i a_i sigma(u_i . x) with unit
// neurons u_i, fixed output masses a_i (uniform 1/m unless set), and its
// projected gradient dynamics.

#include <Eigen/Core>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <vector>

#include "meanfield/legendre.hpp"
#include "meanfield/model.hpp"
#include "meanfield/popdyn.hpp"

namespace meanfield::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMaxWidth = 4096;

// Degree-4 polynomial sum_k c_k Pbar_k(s) (or sum_k c_k P_k(s) when
// normalized is false) in monomial form.
class Quartic {
 public:
  Quartic(int d, const Coeffs& legendre_coeffs, bool normalized = true);

  double value(double s) const {
    return (((c_[4] * s + c_[3]) * s + c_[2]) * s + c_[1]) * s + c_[0];
  }
  double derivative(double s) const {
    return ((4.0 * c_[4] * s + 3.0 * c_[3]) * s + 2.0 * c_[2]) * s + c_[1];
  }
  const Coeffs& monomials() const { return c_; }

 private:
  Coeffs c_{};
};

struct NetworkState {
  Matrix U;           // m x d, unit rows
  Eigen::VectorXd a;  // output masses, sum 1
  double t = 0.0;

  int width() const { return static_cast<int>(U.rows()); }
  int dim() const { return static_cast<int>(U.cols()); }

  // Uniform masses. Throws ConfigError for m > 4096 or rows that are not
  // unit norm within 1e-10.
  static NetworkState from_weights(Matrix U);
  static NetworkState from_weights(Matrix U, Eigen::VectorXd a);
};

NetworkState init_network(int d, int m, std::mt19937_64& rng);

// Largest |norm - 1| before rescaling every row to unit norm.
double renormalize(Matrix& U);

struct Dataset {
  Matrix X;  // n x d, unit rows
  Eigen::VectorXd y;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(X.rows()); }
};

double target(const ModelSpec& spec, const Eigen::VectorXd& x);
Dataset make_dataset(const ModelSpec& spec, int n, std::mt19937_64& rng, std::uint64_t seed = 0);

double forward(const NetworkState& s, const ModelSpec& spec, const Eigen::VectorXd& x);
Eigen::VectorXd forward_batch(const NetworkState& s, const ModelSpec& spec, const Matrix& X);

// 1/(2n) sum_j (f(x_j) - y_j)^2.
double empirical_loss(const NetworkState& s, const ModelSpec& spec, const Dataset& data);

// Per-particle Riemannian gradients (rows), i.e. derivative of the loss with
// respect to u_i divided by a_i, projected onto the tangent space of u_i.
Matrix empirical_grads(const NetworkState& s, const ModelSpec& spec, const Dataset& data);
Eigen::VectorXd empirical_grad(const NetworkState& s, int i, const ModelSpec& spec,
                               const Dataset& data);

// Same quantity for the population loss, in closed form: a combination of
// q*, the other neurons u_j, and u_i itself.
Matrix population_grads(const NetworkState& s, const ModelSpec& spec);
Eigen::VectorXd population_grad(const NetworkState& s, int i, const ModelSpec& spec);

// 1/2 E_x (f - y)^2 computed through Legendre inner products, O(m^2 d).
double exact_population_loss(const NetworkState& s, const ModelSpec& spec);

// Gradient field of a rotationally invariant law with the given w-marginal:
// grad(u) = c(w) (q* - w u), w = q* . u. The 1-D velocity is -(1 - w^2) c(w).
class ContinuumField {
 public:
  ContinuumField(const popdyn::Ensemble1D& e, const ModelSpec& spec,
                 const legendre::LegendreBasis& basis);

  double coefficient(double w) const;
  Eigen::VectorXd grad(const Eigen::VectorXd& u) const;
  Matrix grads(const Matrix& U) const;

 private:
  const ModelSpec* spec_;
  const legendre::LegendreBasis* basis_;
  bool symmetric_;
  popdyn::VelocityTerms terms_{};
  Coeffs moments_{};
};

enum class GradientKind { Empirical, Population, Continuum };

struct FlowStepResult {
  bool accepted;
  double max_correction;
};

inline constexpr double kMaxRenormCorrection = 1e-3;

// One joint RK4 step. Continuum kind co-evolves `continuum` (its particles
// and tracers) and drives the neurons with its field; the other kinds ignore
// it. On rejection the state is left untouched.
FlowStepResult flow_step(NetworkState& s, const ModelSpec& spec, GradientKind kind, double dt,
                         const Dataset* data, popdyn::Ensemble1D* continuum = nullptr);

// u <- (u - eta grad) / |u - eta grad| for every neuron; t advances by eta.
void gd_step(NetworkState& s, const ModelSpec& spec, const Dataset& data, double eta,
             GradientKind kind = GradientKind::Empirical);

struct Growth {
  Eigen::VectorXd A;
  Eigen::VectorXd B;
  Eigen::VectorXd C;
};

// Per-neuron split of d/dt |u_hat - u_bar|^2 into continuum-field (A),
// finite-width (B), and finite-sample (C) parts. Population kind makes C
// exactly zero.
Growth decompose_growth(const Matrix& U_hat, const Matrix& U_bar, const NetworkState& state_hat,
                        const ContinuumField& field, const Dataset* data, const ModelSpec& spec,
                        GradientKind kind);

// u_bar = w q* + sqrt(1 - w^2) / sqrt(1 - w0^2) (chi - w0 q*).
Matrix bar_positions(const Matrix& chi, const std::vector<double>& w0, const std::vector<double>& w,
                     const Eigen::VectorXd& q);

struct CouplingOptions {
  double dt = 0.01;
  double horizon = 5.0;
  int log_interval = 1;
  GradientKind kind = GradientKind::Empirical;
  int quadrature_nodes = legendre::kDefaultNodes;
};

struct CouplingRow {
  double t;
  double delta_avg;
  double delta_max;
  double A_avg;
  double B_avg;
  double C_avg;
  double loss_hat;
  double loss_bar;
};

struct CouplingLog {
  std::vector<CouplingRow> rows;
  NetworkState final_hat;
};

// Shared initialization chi: u_hat follows the empirical (or population) flow
// of the width-m network, u_bar the continuum flow from the same chi.
CouplingLog coupling_run(const ModelSpec& spec, NetworkState init, const Dataset* data,
                         const CouplingOptions& opts);
CouplingLog coupling_run(std::uint64_t seed, int d, int m, int n, const ModelSpec& spec,
                         const CouplingOptions& opts);

void write_coupling_csv(std::ostream& out, const std::vector<CouplingRow>& rows);

// Text checkpoint: "d m t" header, m rows of u, one row of masses.
void write_checkpoint(std::ostream& out, const NetworkState& s);
NetworkState read_checkpoint(std::istream& in);

}  // namespace meanfield::nn
