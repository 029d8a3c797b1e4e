#include "meanfield/legendre.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "meanfield/error.hpp"

namespace meanfield::legendre {
namespace {

using u128 = unsigned __int128;

constexpr int kMaxDimension = 10000;

void check_dimension(int d) {
  if (d < 3) throw DomainError("dimension must be >= 3, got " + std::to_string(d));
}

// C(n, r) with an overflow check at every multiply. The running product
// C(n-r+i, i) is always an integer, so the division is exact.
u128 binomial(long n, long r) {
  if (r < 0 || n < 0 || r > n) return 0;
  r = std::min(r, n - r);
  u128 acc = 1;
  const u128 limit = ~u128{0};
  for (long i = 1; i <= r; ++i) {
    const u128 f = static_cast<u128>(n - r + i);
    if (acc > limit / f) throw ConfigError("binomial overflow in harmonic_dim");
    acc = acc * f / static_cast<u128>(i);
  }
  return acc;
}

// Monic recurrence coefficient b_k for the weight (1 - t^2)^{lambda - 1/2}.
double gegenbauer_b(int k, double lambda) {
  const double kk = k;
  return kk * (kk + 2.0 * lambda - 1.0) / (4.0 * (kk + lambda) * (kk + lambda - 1.0));
}

QuadratureRule gauss_rule(double lambda, int M) {
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(M);
  Eigen::VectorXd sub(M - 1);
  std::vector<double> sqrt_b(M);
  for (int k = 1; k < M; ++k) {
    sqrt_b[k] = std::sqrt(gegenbauer_b(k, lambda));
    sub[k - 1] = sqrt_b[k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("Jacobi eigenproblem did not converge");

  std::vector<double> t(solver.eigenvalues().data(), solver.eigenvalues().data() + M);
  std::sort(t.begin(), t.end());
  for (int i = 0; i < M / 2; ++i) {
    const double s = 0.5 * (t[M - 1 - i] - t[i]);
    t[i] = -s;
    t[M - 1 - i] = s;
  }
  if (M % 2 == 1) t[M / 2] = 0.0;

  // Christoffel weights 1 / sum_k ptilde_k(t)^2 with orthonormal ptilde.
  std::vector<double> w(M);
  for (int i = 0; i < M; ++i) {
    double prev = 0.0, cur = 1.0, sum = 1.0;
    for (int k = 1; k < M; ++k) {
      const double back = (k >= 2) ? sqrt_b[k - 1] : 0.0;
      const double next = (t[i] * cur - back * prev) / sqrt_b[k];
      prev = cur;
      cur = next;
      sum += cur * cur;
    }
    w[i] = 1.0 / sum;
  }
  for (int i = 0; i < M / 2; ++i) {
    const double s = 0.5 * (w[i] + w[M - 1 - i]);
    w[i] = s;
    w[M - 1 - i] = s;
  }
  double total = 0.0;
  for (double x : w) total += x;
  for (double& x : w) x /= total;
  return {std::move(t), std::move(w)};
}

double horner(const std::vector<double>& c, double t) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
  return acc;
}

}  // namespace

std::uint64_t harmonic_dim(int k, int d) {
  if (k < 0) throw DomainError("degree must be >= 0");
  check_dimension(d);
  if (d > kMaxDimension) throw ConfigError("harmonic_dim supports d <= 10000");
  // C(d+k-1, d-1) = C(d+k-1, k) and C(d+k-3, d-1) = C(d+k-3, k-2).
  const u128 a = binomial(static_cast<long>(d) + k - 1, k);
  const u128 b = (k >= 2) ? binomial(static_cast<long>(d) + k - 3, k - 2) : 0;
  const u128 n = a - b;
  if (n > static_cast<u128>(UINT64_MAX)) throw ConfigError("harmonic_dim exceeds 64 bits");
  return static_cast<std::uint64_t>(n);
}

double eval(int k, int d, double t, int kmax) {
  check_dimension(d);
  if (kmax > kHardMaxDegree) throw DomainError("kmax above supported maximum 8");
  if (k < 0 || k > kmax) throw DomainError("degree " + std::to_string(k) + " outside [0, kmax]");
  if (!(std::abs(t) <= 1.0)) throw DomainError("Legendre argument outside [-1, 1]");
  if (k == 0) return 1.0;
  double prev = 1.0, cur = t;
  for (int j = 2; j <= k; ++j) {
    const double den = j + d - 3.0;
    const double next = ((2.0 * j + d - 4.0) / den) * t * cur - ((j - 1.0) / den) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double eval_normalized(int k, int d, double t, int kmax) {
  const double p = eval(k, d, t, kmax);
  return std::sqrt(static_cast<double>(harmonic_dim(k, d))) * p;
}

std::vector<double> monomial_coefficients(int k, int d) {
  check_dimension(d);
  if (k < 0 || k > kHardMaxDegree) throw DomainError("degree outside [0, 8]");
  std::vector<double> prev{1.0};
  if (k == 0) return prev;
  std::vector<double> cur{0.0, 1.0};
  for (int j = 2; j <= k; ++j) {
    const double den = j + d - 3.0;
    const double a = (2.0 * j + d - 4.0) / den;
    const double b = (j - 1.0) / den;
    std::vector<double> next(j + 1, 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] += a * cur[i];
    for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= b * prev[i];
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

LegendreBasis::LegendreBasis(int d, int kmax) : d_(d), kmax_(kmax) {
  check_dimension(d);
  if (kmax < 4 || kmax > kHardMaxDegree) throw ConfigError("kmax must lie in [4, 8]");
  for (int k = 0; k <= kmax; ++k) {
    const double n = static_cast<double>(legendre::harmonic_dim(k, d));
    dims_.push_back(n);
    sqrt_dims_.push_back(std::sqrt(n));
    coeffs_.push_back(monomial_coefficients(k, d));
  }
}

int LegendreBasis::check(int k) const {
  if (k < 0 || k > kmax_) throw DomainError("degree " + std::to_string(k) + " outside [0, kmax]");
  return k;
}

double LegendreBasis::operator()(int k, double t) const { return horner(coeffs_[check(k)], t); }

double LegendreBasis::normalized(int k, double t) const {
  return sqrt_dims_[check(k)] * horner(coeffs_[k], t);
}

double LegendreBasis::derivative(int k, double t) const {
  const auto& c = coeffs_[check(k)];
  double acc = 0.0;
  for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) acc = acc * t + j * c[j];
  return acc;
}

double QuadratureRule::integrate(const std::function<double(double)>& f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
  return acc;
}

QuadratureRule mu_quadrature(int d, int M, int kmax) {
  check_dimension(d);
  if (M < 8 || M < 4 * kmax) {
    throw ConfigError("quadrature needs M >= max(8, 4*kmax); got M=" + std::to_string(M));
  }
  return gauss_rule(0.5 * (d - 2), M);
}

QuadratureRule gauss_legendre(int M) {
  if (M < 1) throw ConfigError("Gauss-Legendre rule needs M >= 1");
  if (M == 1) return {{0.0}, {2.0}};
  QuadratureRule r = gauss_rule(0.5, M);
  for (double& w : r.weights) w *= 2.0;
  return r;
}

double coefficient(const std::function<double(double)>& f, int k, int d,
                   const QuadratureRule& rule) {
  const double s = std::sqrt(static_cast<double>(harmonic_dim(k, d)));
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    acc += rule.weights[i] * f(rule.nodes[i]) * eval(k, d, rule.nodes[i], kHardMaxDegree);
  }
  return s * acc;
}

double coefficient_split(const std::function<double(double)>& f, int k, int d,
                         int nodes_per_half) {
  check_dimension(d);
  const QuadratureRule gl = gauss_legendre(nodes_per_half);
  const double a = 0.5 * (d - 3);
  const double s = std::sqrt(static_cast<double>(harmonic_dim(k, d)));
  double num = 0.0, mass = 0.0;
  for (double lo : {-1.0, 0.0}) {
    for (std::size_t i = 0; i < gl.size(); ++i) {
      const double t = lo + 0.5 * (gl.nodes[i] + 1.0);
      const double w = 0.5 * gl.weights[i] * std::exp(a * std::log1p(-t * t));
      mass += w;
      num += w * f(t) * eval(k, d, t, kHardMaxDegree);
    }
  }
  return s * num / mass;
}

double relu_coefficient(int k, int d) {
  return coefficient_split([](double t) { return t > 0.0 ? t : 0.0; }, k, d);
}

}  // namespace meanfield::legendre
