#pragma once

// Legendre (Gegenbauer) polynomials P_{k,d} adapted to the sphere S^{d-1}:
// orthogonal under mu_d, the law of one coordinate of a uniform point on the
// sphere, normalized so that P_{k,d}(1) = 1.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace meanfield::legendre {

inline constexpr int kDefaultMaxDegree = 6;
inline constexpr int kHardMaxDegree = 8;
inline constexpr int kDefaultNodes = 512;

// Dimension N_{k,d} of the degree-k spherical harmonics on S^{d-1}:
// C(d+k-1, d-1) - C(d+k-3, d-1). Exact integer arithmetic; throws ConfigError
// when the value does not fit in 64 bits or d > 10^4.
std::uint64_t harmonic_dim(int k, int d);

// P_{k,d}(t) by the three-term recursion. Throws DomainError for k outside
// [0, kmax], d < 3, or |t| > 1.
double eval(int k, int d, double t, int kmax = kDefaultMaxDegree);

// sqrt(N_{k,d}) * P_{k,d}(t).
double eval_normalized(int k, int d, double t, int kmax = kDefaultMaxDegree);

// Coefficients c_0..c_k of P_{k,d}(t) = sum_j c_j t^j.
std::vector<double> monomial_coefficients(int k, int d);

// Cached evaluation for one dimension. Evaluation through the monomial form
// does not range-check t, so it can be used on dot products that drift a few
// ulps past +-1.
class LegendreBasis {
 public:
  explicit LegendreBasis(int d, int kmax = kDefaultMaxDegree);

  int dimension() const { return d_; }
  int max_degree() const { return kmax_; }

  double operator()(int k, double t) const;
  double normalized(int k, double t) const;
  double derivative(int k, double t) const;

  double harmonic_dim(int k) const { return dims_[check(k)]; }
  double sqrt_dim(int k) const { return sqrt_dims_[check(k)]; }
  const std::vector<double>& coefficients(int k) const { return coeffs_[check(k)]; }

 private:
  int check(int k) const;

  int d_;
  int kmax_;
  std::vector<double> dims_;
  std::vector<double> sqrt_dims_;
  std::vector<std::vector<double>> coeffs_;
};

// Nodes strictly increasing and symmetric about 0, positive weights summing
// to 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
  double integrate(const std::function<double(double)>& f) const;
};

// Gauss rule for the weight (1 - t^2)^{(d-3)/2} on (-1, 1), i.e. for mu_d.
// Nodes from the Golub-Welsch eigenproblem of the Jacobi matrix; weights from
// the Christoffel function (relative accuracy survives the tiny tail
// weights at large d). Exact for polynomials of degree <= 2M - 1.
// Throws ConfigError if M < 8 or M < 4 * kmax.
QuadratureRule mu_quadrature(int d, int M = kDefaultNodes, int kmax = kDefaultMaxDegree);

// Gauss-Legendre rule on [-1, 1] with weights summing to 2 (plain
// Lebesgue measure).
QuadratureRule gauss_legendre(int M);

// E_{t~mu_d}[f(t) Pbar_{k,d}(t)] by the given rule.
double coefficient(const std::function<double(double)>& f, int k, int d,
                   const QuadratureRule& rule);

// Same coefficient for f with a kink at 0: Gauss-Legendre on [-1, 0] and
// [0, 1] separately, against the mu_d density evaluated pointwise and
// normalized with the same split rule.
double coefficient_split(const std::function<double(double)>& f, int k, int d,
                         int nodes_per_half = 256);

// Legendre coefficient of relu(t) = max(t, 0).
double relu_coefficient(int k, int d);

}  // namespace meanfield::legendre
