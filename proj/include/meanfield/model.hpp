#pragma once

// Problem definition: quartic activation sigma = sum_k sigma_hat_k Pbar_k,
// single-index target y(x) = sum_k h_hat_k Pbar_k(q . x), and the moment
// machinery behind expressivity.

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

namespace meanfield {

inline constexpr int kCoeffs = 5;  // degrees 0..4
using Coeffs = std::array<double, kCoeffs>;

class ModelSpec {
 public:
  // Throws ConfigError for d < 3, sigma_hat[2] == 0 or sigma_hat[4] == 0, or
  // a q_star that is not unit norm within 1e-12. An empty q_star means e_1.
  ModelSpec(int d, const Coeffs& sigma_hat, const Coeffs& h_hat,
            Eigen::VectorXd q_star = Eigen::VectorXd());

  // h_hat_k = gamma_k * sigma_hat_k for k in {2, 4}; all other coefficients 0.
  static ModelSpec from_gammas(int d, double sigma2, double sigma4, double gamma2,
                               double gamma4);

  int d() const { return d_; }
  const Coeffs& sigma_hat() const { return sigma_hat_; }
  const Coeffs& h_hat() const { return h_hat_; }
  double sigma_hat(int k) const { return sigma_hat_.at(k); }
  double h_hat(int k) const { return h_hat_.at(k); }
  const Eigen::VectorXd& q_star() const { return q_star_; }

  double gamma2() const { return h_hat_[2] / sigma_hat_[2]; }
  double gamma4() const { return h_hat_[4] / sigma_hat_[4]; }
  double sigma_sq_sum() const { return sigma_hat_[2] * sigma_hat_[2] + sigma_hat_[4] * sigma_hat_[4]; }

  // True when the odd and constant coefficients vanish, i.e. the reduced
  // even-degree formulas apply.
  bool is_even_quartic() const;

 private:
  int d_;
  Coeffs sigma_hat_;
  Coeffs h_hat_;
  Eigen::VectorXd q_star_;
};

struct AssumptionConstants {
  double c1 = 4.0;
  double c2 = 0.1;
};

struct AssumptionClause {
  std::string name;
  bool passed;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionClause> clauses;
  AssumptionConstants constants;

  bool all_passed() const;
};

// Per-clause check; never throws on a violated clause.
AssumptionReport validate_assumptions(const ModelSpec& spec, AssumptionConstants c = {});

enum class Expressivity { Strict, Boundary, Violates };

const char* to_string(Expressivity e);

// Classifies (gamma2, gamma4) against 0 <= gamma2^2 <= gamma4 <= gamma2 <= 1.
Expressivity expressivity_check(double gamma2, double gamma4, double tol = 1e-9);

struct Atom {
  double w;
  double p;
};

struct FittingMeasure {
  std::vector<Atom> atoms;

  double moment(int j) const;
};

// Two-point law on [0, 1] with second moment beta2 and fourth moment beta4.
// Throws DomainError unless 0 <= beta2^2 <= beta4 <= beta2 <= 1 (1e-12 slack).
FittingMeasure construct_fitting_measure(double beta2, double beta4);

struct TargetMoments {
  double beta2;
  double beta4;
};

// Moments of w whose P_2 and P_4 expectations equal gamma2 and gamma4.
TargetMoments target_moments(const ModelSpec& spec);

}  // namespace meanfield
