#include "meanfield/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "meanfield/error.hpp"

namespace meanfield {
namespace {

std::string fmt(const char* format, double a, double b) {
  char buf[128];
  std::snprintf(buf, sizeof buf, format, a, b);
  return buf;
}

}  // namespace

ModelSpec::ModelSpec(int d, const Coeffs& sigma_hat, const Coeffs& h_hat, Eigen::VectorXd q_star)
    : d_(d), sigma_hat_(sigma_hat), h_hat_(h_hat), q_star_(std::move(q_star)) {
  if (d < 3) throw ConfigError("model dimension d must be >= 3");
  for (int k = 0; k < kCoeffs; ++k) {
    if (!std::isfinite(sigma_hat_[k]) || !std::isfinite(h_hat_[k])) {
      throw ConfigError("model coefficients must be finite");
    }
  }
  if (sigma_hat_[2] == 0.0 || sigma_hat_[4] == 0.0) {
    throw ConfigError("sigma_hat_2 and sigma_hat_4 must be nonzero");
  }
  if (q_star_.size() == 0) {
    q_star_ = Eigen::VectorXd::Zero(d);
    q_star_[0] = 1.0;
  }
  if (q_star_.size() != d) throw ConfigError("q_star length does not match d");
  if (std::abs(q_star_.norm() - 1.0) > 1e-12) throw ConfigError("q_star must have unit norm");
}

ModelSpec ModelSpec::from_gammas(int d, double sigma2, double sigma4, double gamma2,
                                 double gamma4) {
  Coeffs s{0.0, 0.0, sigma2, 0.0, sigma4};
  Coeffs h{0.0, 0.0, gamma2 * sigma2, 0.0, gamma4 * sigma4};
  return ModelSpec(d, s, h);
}

bool ModelSpec::is_even_quartic() const {
  return sigma_hat_[0] == 0.0 && h_hat_[0] == 0.0 && sigma_hat_[1] == 0.0 && h_hat_[1] == 0.0 &&
         sigma_hat_[3] == 0.0 && h_hat_[3] == 0.0;
}

bool AssumptionReport::all_passed() const {
  for (const auto& c : clauses) {
    if (!c.passed) return false;
  }
  return true;
}

AssumptionReport validate_assumptions(const ModelSpec& spec, AssumptionConstants c) {
  const double g2 = spec.gamma2(), g4 = spec.gamma4();
  const double s2 = spec.sigma_hat(2) * spec.sigma_hat(2);
  const double s4 = spec.sigma_hat(4) * spec.sigma_hat(4);
  AssumptionReport r;
  r.constants = c;
  r.clauses.push_back({"gamma4_ge_1.1_gamma2_sq", g4 >= 1.1 * g2 * g2,
                       fmt("gamma4=%.6g, 1.1*gamma2^2=%.6g", g4, 1.1 * g2 * g2)});
  r.clauses.push_back({"sigma_ratio_bounded", s2 / c.c1 <= s4 && s4 <= c.c1 * s2,
                       fmt("sigma4^2=%.6g, sigma2^2=%.6g", s4, s2)});
  r.clauses.push_back({"gamma4_le_c1_gamma2_sq", g4 <= c.c1 * g2 * g2,
                       fmt("gamma4=%.6g, c1*gamma2^2=%.6g", g4, c.c1 * g2 * g2)});
  r.clauses.push_back({"gamma2_in_0_c2", 0.0 <= g2 && g2 <= c.c2,
                       fmt("gamma2=%.6g, c2=%.6g", g2, c.c2)});
  r.clauses.push_back({"zero_constant_terms", spec.h_hat(0) == 0.0 && spec.sigma_hat(0) == 0.0,
                       fmt("h0=%.6g, sigma0=%.6g", spec.h_hat(0), spec.sigma_hat(0))});
  r.clauses.push_back({"zero_odd_target_terms", spec.h_hat(1) == 0.0 && spec.h_hat(3) == 0.0,
                       fmt("h1=%.6g, h3=%.6g", spec.h_hat(1), spec.h_hat(3))});
  return r;
}

const char* to_string(Expressivity e) {
  switch (e) {
    case Expressivity::Strict: return "strict";
    case Expressivity::Boundary: return "boundary";
    case Expressivity::Violates: return "violates";
  }
  return "unknown";
}

Expressivity expressivity_check(double gamma2, double gamma4, double tol) {
  if (!std::isfinite(gamma2) || !std::isfinite(gamma4)) return Expressivity::Violates;
  const double margins[] = {gamma4 - gamma2 * gamma2, gamma2 - gamma4, 1.0 - gamma2};
  bool boundary = false;
  for (double m : margins) {
    if (m < -tol) return Expressivity::Violates;
    if (m <= tol) boundary = true;
  }
  return boundary ? Expressivity::Boundary : Expressivity::Strict;
}

double FittingMeasure::moment(int j) const {
  double acc = 0.0;
  for (const auto& a : atoms) acc += a.p * std::pow(a.w, j);
  return acc;
}

FittingMeasure construct_fitting_measure(double beta2, double beta4) {
  constexpr double slack = 1e-12;
  if (!(beta2 >= -slack && beta2 * beta2 <= beta4 + slack && beta4 <= beta2 + slack &&
        beta2 <= 1.0 + slack)) {
    throw DomainError(fmt("need 0 <= beta2^2 <= beta4 <= beta2 <= 1, got beta2=%.17g beta4=%.17g",
                          beta2, beta4));
  }
  if (beta4 <= 0.0) return {{{0.0, 1.0}}};
  const double p = std::min(1.0, beta2 * beta2 / beta4);
  const double x = std::min(1.0, std::sqrt(beta4 / beta2));
  if (p >= 1.0) return {{{x, 1.0}}};
  return {{{x, p}, {0.0, 1.0 - p}}};
}

TargetMoments target_moments(const ModelSpec& spec) {
  const double d = spec.d();
  const double beta2 = ((d - 1.0) / d) * spec.gamma2() + 1.0 / d;
  const double den = (d + 2.0) * (d + 4.0);
  const double beta4 =
      ((d * d - 1.0) / den) * spec.gamma4() + ((6.0 * d + 12.0) / den) * beta2 - 3.0 / den;
  return {beta2, beta4};
}

}  // namespace meanfield
