#pragma once

// One-dimensional reduction of the infinite-width population flow for
// rotationally invariant weight laws: only the marginal of w = <q*, u> moves.

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "meanfield/legendre.hpp"
#include "meanfield/model.hpp"

namespace meanfield::popdyn {

// Weighted particles for the law of w. Tracers ride the same velocity field
// with zero mass and never enter the moments.
struct Ensemble1D {
  std::vector<double> w;
  std::vector<double> mass;
  bool symmetric = false;
  std::vector<double> tracers;

  std::size_t size() const { return w.size(); }
};

enum class InitMode { Quadrature, Sampled };

// Quadrature: Gauss nodes of mu_d with their weights (exactly symmetric).
// Sampled: M first coordinates of uniform sphere vectors, mass 1/M.
// Throws ConfigError if M < 16.
Ensemble1D init_ensemble(int d, int M, InitMode mode, std::uint64_t seed = 0);
Ensemble1D init_sampled(int d, int M, std::mt19937_64& rng);

// Symmetric lift of a law on [0, 1]: w and -w each carry p/2, an atom at 0
// stays single.
Ensemble1D from_fitting_measure(const FittingMeasure& mu);

// True when particles pair as (w, -w) with equal mass, or sit at 0.
bool check_symmetric(const Ensemble1D& e);

// sum_i m_i P_k(w_i) for k = 0..4, summed in particle order.
Coeffs legendre_moments(const Ensemble1D& e, const legendre::LegendreBasis& basis);

struct DPair {
  double D2;
  double D4;
};

DPair compute_D(const Ensemble1D& e, const ModelSpec& spec);
DPair compute_D(const Ensemble1D& e, const ModelSpec& spec, const legendre::LegendreBasis& basis);

struct VelocityTerms {
  double D2;
  double D4;
  double lambda1;
  double lambda3;

  static VelocityTerms from_D(DPair D, const ModelSpec& spec);
};

// -(1 - w^2)(2 s2^2 D2 w + 4 s4^2 D4 w^3 + lambda1 w + lambda3 w^3).
double velocity(double w, const VelocityTerms& terms, const ModelSpec& spec);

// -(1 - w^2) sum_k s_k (s_k M_k - h_k) P_k'(w), valid for any rotationally
// invariant law including odd-degree content.
double velocity_general(double w, const Coeffs& moments, const ModelSpec& spec,
                        const legendre::LegendreBasis& basis);

// (s2^2/2) D2^2 + (s4^2/2) D4^2. Throws DomainError on a non-symmetric
// ensemble.
double loss_1d(const Ensemble1D& e, const ModelSpec& spec);

// 1/2 sum_k (s_k M_k - h_k)^2 over k = 0..4.
double loss_from_moments(const Coeffs& moments, const ModelSpec& spec);

struct StepOutcome {
  bool accepted;
  double max_dw;
  Ensemble1D next;
};

// One RK4 step with D recomputed at every stage. Rejected when any particle
// or tracer moves by more than 0.01.
StepOutcome step(const Ensemble1D& e, const ModelSpec& spec, double dt);

inline constexpr double kMaxStepMove = 0.01;
inline constexpr double kClamp = 1.0 - 1e-12;

struct PhaseParams {
  double w_max;
  double iota_U;
  double iota_L;
  double iota_R;
  double kappa;
  double xi;
  // kappa and xi are O(1) below roughly d = 1e6; thresholds then blur.
  bool asymptotic;
};

PhaseParams phase_params(int d);

enum class T2Case { None, Case1, Case2 };
const char* to_string(T2Case c);

struct PhaseReport {
  std::optional<double> T1;
  std::optional<double> T2;
  T2Case T2_case = T2Case::None;
  std::optional<double> T_star;
  PhaseParams params{};
  bool phase1_empty = false;
  // Tracer values at T1 for the iota_L and iota_R tracers.
  std::optional<double> w_T1_L;
  std::optional<double> w_T1_R;
};

struct TrajectoryRow {
  double t;
  double loss;
  double D2;
  double D4;
  double w_q10;
  double w_q50;
  double w_q90;
  int phase;
};

struct StepRecord {
  double t;
  double dt;
  double loss;
  double D2;
  double D4;
  double odd_moment;
  bool order_preserved;
  std::vector<double> tracers;
};

struct FlowOptions {
  double eps = 0.05;
  double t_max = 1e4;
  int log_interval = 10;
  double dt0 = 0.0;  // 0 picks 0.05 / (s2^2 + s4^2)
  double tol = 1e-10;
  bool record_history = false;
  std::vector<double> extra_tracers;
  std::uint64_t max_steps = 50'000'000;
};

// Tracer slots filled by run_flow ahead of any tracers already present.
inline constexpr int kTracerU = 0;
inline constexpr int kTracerL = 1;
inline constexpr int kTracerR = 2;

struct FlowResult {
  std::vector<TrajectoryRow> log;
  std::vector<StepRecord> history;
  PhaseReport report;
  Ensemble1D final_state;
  std::vector<double> tracer_init;
  bool converged = false;
  double loss_threshold = 0.0;
  std::uint64_t accepted_steps = 0;
  std::uint64_t rejected_steps = 0;
};

// Integrates with step-doubling RK4 until loss <= (s2^2 + s4^2) eps^2 / 2 or
// t_max.
FlowResult run_flow(Ensemble1D e, const ModelSpec& spec, const FlowOptions& opts);

// Mass-weighted quantile of |w|.
double abs_quantile(const Ensemble1D& e, double q);

// log(w / sqrt(1 - w^2)), w in (0, 1).
double potential(double w);
double potential_derivative(double w);

struct GapSample {
  double t;
  double D4;
  double w;
  double w_prime;
};

struct GapVerdict {
  bool void_monitor = false;
  bool increasing_ok = true;  // steps with D4 <= 0
  bool decreasing_ok = true;  // steps with D4 >= 0
  std::size_t increasing_steps = 0;
  std::size_t decreasing_steps = 0;
  double worst_violation = 0.0;
};

// Per-step check that |Phi(w) - Phi(w')| does not shrink while D4 <= 0 and
// does not grow while D4 >= 0. Steps where D4 changes sign are skipped.
GapVerdict potential_gap_monitor(const std::vector<GapSample>& samples, double tol = 1e-6);

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows);

}  // namespace meanfield::popdyn
