#include "meanfield/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "meanfield/csv.hpp"
#include "meanfield/error.hpp"
#include "meanfield/rng.hpp"

namespace meanfield::nn {
namespace {

void project_rows(Matrix& G, const Matrix& U) {
  for (Eigen::Index i = 0; i < G.rows(); ++i) G.row(i) -= G.row(i).dot(U.row(i)) * U.row(i);
}

Coeffs squares(const ModelSpec& spec) {
  Coeffs c{};
  for (int k = 0; k < kCoeffs; ++k) c[k] = spec.sigma_hat(k) * spec.sigma_hat(k);
  return c;
}

Coeffs cross(const ModelSpec& spec) {
  Coeffs c{};
  for (int k = 0; k < kCoeffs; ++k) c[k] = spec.sigma_hat(k) * spec.h_hat(k);
  return c;
}

double h_energy(const ModelSpec& spec) {
  double acc = 0.0;
  for (int k = 0; k < kCoeffs; ++k) acc += spec.h_hat(k) * spec.h_hat(k);
  return acc;
}

// n x m scratch reused across calls; large per-step temporaries otherwise go
// through mmap/munmap on every gradient evaluation.
struct EmpWorkspace {
  Eigen::MatrixXd S, R;
  Eigen::VectorXd r;
};

Matrix emp_grads(const Matrix& U, const Quartic& sigma, const Eigen::VectorXd& a,
                 const Dataset& data) {
  thread_local EmpWorkspace ws;
  ws.S.resize(data.n(), U.rows());
  ws.S.noalias() = data.X * U.transpose();
  ws.R.resize(ws.S.rows(), ws.S.cols());
  ws.R = ws.S.unaryExpr([&](double s) { return sigma.value(s); });
  ws.r.resize(data.n());
  ws.r.noalias() = ws.R * a;
  ws.r -= data.y;
  ws.R = ws.S.unaryExpr([&](double s) { return sigma.derivative(s); });
  ws.R.array().colwise() *= ws.r.array();
  Matrix G(U.rows(), U.cols());
  G.noalias() = ws.R.transpose() * data.X;
  G /= static_cast<double>(data.n());
  project_rows(G, U);
  return G;
}

Matrix pop_grads(const Matrix& U, const Eigen::VectorXd& a, const ModelSpec& spec) {
  const int d = static_cast<int>(U.cols());
  const Quartic Q(d, squares(spec), false);
  const Quartic Rq(d, cross(spec), false);
  const Eigen::MatrixXd T = U * U.transpose();
  Eigen::MatrixXd C = T.unaryExpr([&](double t) { return Q.derivative(t); });
  C.array().rowwise() *= a.transpose().array();
  const Eigen::VectorXd w = U * spec.q_star();
  const Eigen::VectorXd rq = w.unaryExpr([&](double t) { return Rq.derivative(t); });
  Matrix G = C * U;
  G.noalias() -= rq * spec.q_star().transpose();
  project_rows(G, U);
  return G;
}

void check_state(const NetworkState& s, const ModelSpec& spec) {
  if (s.dim() != spec.d()) throw ConfigError("network dimension does not match the model");
}

void check_data(const NetworkState& s, const Dataset& data) {
  if (data.X.cols() != s.dim()) throw ConfigError("dataset dimension does not match the network");
  if (data.n() < 1) throw ConfigError("empty dataset");
}

}  // namespace

Quartic::Quartic(int d, const Coeffs& legendre_coeffs, bool normalized) {
  for (int k = 0; k < kCoeffs; ++k) {
    if (legendre_coeffs[k] == 0.0) continue;
    const double scale =
        normalized ? std::sqrt(static_cast<double>(legendre::harmonic_dim(k, d))) : 1.0;
    const auto mono = legendre::monomial_coefficients(k, d);
    for (std::size_t j = 0; j < mono.size(); ++j) c_[j] += legendre_coeffs[k] * scale * mono[j];
  }
}

NetworkState NetworkState::from_weights(Matrix U) {
  const auto m = U.rows();
  return from_weights(std::move(U), Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)));
}

NetworkState NetworkState::from_weights(Matrix U, Eigen::VectorXd a) {
  if (U.rows() < 1 || U.rows() > kMaxWidth) throw ConfigError("network width must lie in [1, 4096]");
  if (a.size() != U.rows()) throw ConfigError("mass vector length does not match width");
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    if (std::abs(U.row(i).norm() - 1.0) > 1e-10) throw ConfigError("neuron rows must be unit norm");
  }
  if (std::abs(a.sum() - 1.0) > 1e-12) throw ConfigError("output masses must sum to 1");
  NetworkState s;
  s.U = std::move(U);
  s.a = std::move(a);
  return s;
}

NetworkState init_network(int d, int m, std::mt19937_64& rng) {
  if (m < 1 || m > kMaxWidth) throw ConfigError("network width must lie in [1, 4096]");
  Matrix U(m, d);
  for (int i = 0; i < m; ++i) U.row(i) = sample_sphere(d, rng).transpose();
  return NetworkState::from_weights(std::move(U));
}

double renormalize(Matrix& U) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const double n = U.row(i).norm();
    const double c = std::abs(n - 1.0);
    if (!(c <= worst)) worst = std::isnan(c) ? std::numeric_limits<double>::infinity() : c;
    U.row(i) /= n;
  }
  return worst;
}

double target(const ModelSpec& spec, const Eigen::VectorXd& x) {
  return Quartic(spec.d(), spec.h_hat()).value(spec.q_star().dot(x));
}

Dataset make_dataset(const ModelSpec& spec, int n, std::mt19937_64& rng, std::uint64_t seed) {
  if (n < 0) throw ConfigError("sample count must be non-negative");
  const Quartic h(spec.d(), spec.h_hat());
  Dataset data;
  data.seed = seed;
  data.X.resize(n, spec.d());
  data.y.resize(n);
  for (int j = 0; j < n; ++j) {
    data.X.row(j) = sample_sphere(spec.d(), rng).transpose();
    data.y[j] = h.value(data.X.row(j).dot(spec.q_star()));
  }
  return data;
}

double forward(const NetworkState& s, const ModelSpec& spec, const Eigen::VectorXd& x) {
  check_state(s, spec);
  const Quartic sigma(spec.d(), spec.sigma_hat());
  const Eigen::VectorXd z = s.U * x;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) acc += s.a[i] * sigma.value(z[i]);
  return acc;
}

Eigen::VectorXd forward_batch(const NetworkState& s, const ModelSpec& spec, const Matrix& X) {
  check_state(s, spec);
  const Quartic sigma(spec.d(), spec.sigma_hat());
  const Eigen::MatrixXd S = X * s.U.transpose();
  return S.unaryExpr([&](double v) { return sigma.value(v); }) * s.a;
}

double empirical_loss(const NetworkState& s, const ModelSpec& spec, const Dataset& data) {
  check_data(s, data);
  const Eigen::VectorXd r = forward_batch(s, spec, data.X) - data.y;
  return 0.5 * r.squaredNorm() / static_cast<double>(data.n());
}

Matrix empirical_grads(const NetworkState& s, const ModelSpec& spec, const Dataset& data) {
  check_state(s, spec);
  check_data(s, data);
  return emp_grads(s.U, Quartic(spec.d(), spec.sigma_hat()), s.a, data);
}

Eigen::VectorXd empirical_grad(const NetworkState& s, int i, const ModelSpec& spec,
                               const Dataset& data) {
  if (i < 0 || i >= s.width()) throw ConfigError("neuron index out of range");
  check_state(s, spec);
  check_data(s, data);
  const Quartic sigma(spec.d(), spec.sigma_hat());
  const Eigen::VectorXd r = forward_batch(s, spec, data.X) - data.y;
  const Eigen::VectorXd u = s.U.row(i).transpose();
  const Eigen::VectorXd z = data.X * u;
  Eigen::VectorXd coef(z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) coef[j] = r[j] * sigma.derivative(z[j]);
  Eigen::VectorXd g = data.X.transpose() * coef / static_cast<double>(data.n());
  g -= g.dot(u) * u;
  return g;
}

Matrix population_grads(const NetworkState& s, const ModelSpec& spec) {
  check_state(s, spec);
  return pop_grads(s.U, s.a, spec);
}

Eigen::VectorXd population_grad(const NetworkState& s, int i, const ModelSpec& spec) {
  if (i < 0 || i >= s.width()) throw ConfigError("neuron index out of range");
  check_state(s, spec);
  const Quartic Q(spec.d(), squares(spec), false);
  const Quartic Rq(spec.d(), cross(spec), false);
  const Eigen::VectorXd u = s.U.row(i).transpose();
  const Eigen::VectorXd t = s.U * u;
  Eigen::VectorXd coef(t.size());
  for (Eigen::Index j = 0; j < t.size(); ++j) coef[j] = s.a[j] * Q.derivative(t[j]);
  Eigen::VectorXd g = s.U.transpose() * coef;
  g -= Rq.derivative(spec.q_star().dot(u)) * spec.q_star();
  g -= g.dot(u) * u;
  return g;
}

double exact_population_loss(const NetworkState& s, const ModelSpec& spec) {
  check_state(s, spec);
  const Quartic Q(spec.d(), squares(spec), false);
  const Quartic Rq(spec.d(), cross(spec), false);
  const Eigen::MatrixXd T = s.U * s.U.transpose();
  const Eigen::VectorXd Pa = T.unaryExpr([&](double t) { return Q.value(t); }) * s.a;
  const Eigen::VectorXd w = s.U * spec.q_star();
  double cross_term = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) cross_term += s.a[i] * Rq.value(w[i]);
  return 0.5 * (s.a.dot(Pa) - 2.0 * cross_term + h_energy(spec));
}

ContinuumField::ContinuumField(const popdyn::Ensemble1D& e, const ModelSpec& spec,
                               const legendre::LegendreBasis& basis)
    : spec_(&spec), basis_(&basis), symmetric_(e.symmetric) {
  if (symmetric_) {
    terms_ = popdyn::VelocityTerms::from_D(popdyn::compute_D(e, spec, basis), spec);
  } else {
    moments_ = popdyn::legendre_moments(e, basis);
  }
}

double ContinuumField::coefficient(double w) const {
  if (symmetric_) {
    const double s2 = spec_->sigma_hat(2) * spec_->sigma_hat(2);
    const double s4 = spec_->sigma_hat(4) * spec_->sigma_hat(4);
    const double w3 = w * w * w;
    return 2.0 * s2 * terms_.D2 * w + 4.0 * s4 * terms_.D4 * w3 + terms_.lambda1 * w +
           terms_.lambda3 * w3;
  }
  double c = 0.0;
  for (int k = 1; k < kCoeffs; ++k) {
    const double s = spec_->sigma_hat(k);
    c += s * (s * moments_[k] - spec_->h_hat(k)) * basis_->derivative(k, w);
  }
  return c;
}

Eigen::VectorXd ContinuumField::grad(const Eigen::VectorXd& u) const {
  const Eigen::VectorXd& q = spec_->q_star();
  const double w = q.dot(u);
  return coefficient(w) * (q - w * u);
}

Matrix ContinuumField::grads(const Matrix& U) const {
  const Eigen::VectorXd& q = spec_->q_star();
  Matrix G(U.rows(), U.cols());
  for (Eigen::Index i = 0; i < U.rows(); ++i) {
    const double w = U.row(i).dot(q);
    G.row(i) = coefficient(w) * (q.transpose() - w * U.row(i));
  }
  return G;
}

FlowStepResult flow_step(NetworkState& s, const ModelSpec& spec, GradientKind kind, double dt,
                         const Dataset* data, popdyn::Ensemble1D* continuum) {
  if (!(dt > 0.0)) throw DomainError("flow_step needs dt > 0");
  check_state(s, spec);
  if (kind == GradientKind::Empirical) {
    if (data == nullptr) throw ConfigError("empirical flow needs a dataset");
    check_data(s, *data);
  }
  if (kind == GradientKind::Continuum && continuum == nullptr) {
    throw ConfigError("continuum flow needs an ensemble");
  }

  const legendre::LegendreBasis basis(spec.d());
  const Quartic sigma(spec.d(), spec.sigma_hat());
  const bool joint = kind == GradientKind::Continuum;
  const std::size_t ne = joint ? continuum->size() : 0;

  // Stage buffers: neurons and, for the joint system, the 1-D particles
  // followed by tracers.
  popdyn::Ensemble1D ens = joint ? *continuum : popdyn::Ensemble1D{};
  auto stack = [&](const popdyn::Ensemble1D& e) {
    std::vector<double> x(e.w);
    x.insert(x.end(), e.tracers.begin(), e.tracers.end());
    return x;
  };
  auto unstack = [&](const std::vector<double>& x, popdyn::Ensemble1D& e) {
    std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(ne), e.w.begin());
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(ne), x.end(), e.tracers.begin());
  };
  auto rates = [&](const Matrix& U, const std::vector<double>& x, Matrix& dU,
                   std::vector<double>& dx) {
    switch (kind) {
      case GradientKind::Empirical: dU = -emp_grads(U, sigma, s.a, *data); break;
      case GradientKind::Population: dU = -pop_grads(U, s.a, spec); break;
      case GradientKind::Continuum: {
        unstack(x, ens);
        const ContinuumField field(ens, spec, basis);
        dU = -field.grads(U);
        dx.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          dx[i] = -(1.0 - x[i] * x[i]) * field.coefficient(x[i]);
        }
        break;
      }
    }
  };

  const std::vector<double> x0 = joint ? stack(*continuum) : std::vector<double>{};
  Matrix k1, k2, k3, k4;
  std::vector<double> e1, e2, e3, e4, y(x0.size());
  rates(s.U, x0, k1, e1);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x0[i] + 0.5 * dt * e1[i];
  rates(s.U + 0.5 * dt * k1, y, k2, e2);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x0[i] + 0.5 * dt * e2[i];
  rates(s.U + 0.5 * dt * k2, y, k3, e3);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x0[i] + dt * e3[i];
  rates(s.U + dt * k3, y, k4, e4);

  Matrix U = s.U + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  const double corr = renormalize(U);
  FlowStepResult res{corr <= kMaxRenormCorrection && std::isfinite(corr), corr};
  std::vector<double> x1(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    x1[i] = std::clamp(x0[i] + (dt / 6.0) * (e1[i] + 2.0 * e2[i] + 2.0 * e3[i] + e4[i]),
                       -popdyn::kClamp, popdyn::kClamp);
    if (!(std::abs(x1[i] - x0[i]) <= popdyn::kMaxStepMove)) res.accepted = false;
  }
  if (!res.accepted) return res;
  s.U = std::move(U);
  s.t += dt;
  if (joint) unstack(x1, *continuum);
  return res;
}

void gd_step(NetworkState& s, const ModelSpec& spec, const Dataset& data, double eta,
             GradientKind kind) {
  if (!(eta > 0.0)) throw DomainError("gd_step needs eta > 0");
  Matrix G;
  switch (kind) {
    case GradientKind::Empirical: G = empirical_grads(s, spec, data); break;
    case GradientKind::Population: G = population_grads(s, spec); break;
    case GradientKind::Continuum: throw ConfigError("gradient descent supports empirical or population gradients");
  }
  s.U -= eta * G;
  renormalize(s.U);
  s.t += eta;
}

Growth decompose_growth(const Matrix& U_hat, const Matrix& U_bar, const NetworkState& state_hat,
                        const ContinuumField& field, const Dataset* data, const ModelSpec& spec,
                        GradientKind kind) {
  if (U_hat.rows() != U_bar.rows() || U_hat.cols() != U_bar.cols()) {
    throw ConfigError("coupled trajectories differ in shape");
  }
  const Matrix delta = U_hat - U_bar;
  const Matrix gc_hat = field.grads(U_hat);
  const Matrix gc_bar = field.grads(U_bar);
  const Matrix gp_hat = pop_grads(U_hat, state_hat.a, spec);
  Matrix ge_hat;
  if (kind == GradientKind::Empirical) {
    if (data == nullptr) throw ConfigError("empirical decomposition needs a dataset");
    ge_hat = emp_grads(U_hat, Quartic(spec.d(), spec.sigma_hat()), state_hat.a, *data);
  } else {
    ge_hat = gp_hat;
  }
  const auto m = U_hat.rows();
  Growth g{Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    g.A[i] = -2.0 * (gc_hat.row(i) - gc_bar.row(i)).dot(delta.row(i));
    g.B[i] = -2.0 * (gp_hat.row(i) - gc_hat.row(i)).dot(delta.row(i));
    g.C[i] = -2.0 * (ge_hat.row(i) - gp_hat.row(i)).dot(delta.row(i));
  }
  return g;
}

Matrix bar_positions(const Matrix& chi, const std::vector<double>& w0, const std::vector<double>& w,
                     const Eigen::VectorXd& q) {
  if (static_cast<std::size_t>(chi.rows()) != w0.size() || w0.size() != w.size()) {
    throw ConfigError("coupling tracer count does not match width");
  }
  Matrix B(chi.rows(), chi.cols());
  for (Eigen::Index i = 0; i < chi.rows(); ++i) {
    const double scale = std::sqrt(1.0 - w[i] * w[i]) / std::sqrt(1.0 - w0[i] * w0[i]);
    B.row(i) = w[i] * q.transpose() + scale * (chi.row(i) - w0[i] * q.transpose());
  }
  return B;
}

CouplingLog coupling_run(const ModelSpec& spec, NetworkState init, const Dataset* data,
                         const CouplingOptions& opts) {
  check_state(init, spec);
  if (opts.kind == GradientKind::Continuum) {
    throw ConfigError("coupling compares empirical or population flow against the continuum");
  }
  if (opts.kind == GradientKind::Empirical) {
    if (data == nullptr) throw ConfigError("empirical coupling needs a dataset");
    check_data(init, *data);
  }
  if (!(opts.dt > 0.0) || !(opts.horizon > 0.0)) throw ConfigError("coupling needs dt, horizon > 0");
  if (opts.log_interval < 1) throw ConfigError("log_interval must be >= 1");

  const legendre::LegendreBasis basis(spec.d());
  const Eigen::VectorXd& q = spec.q_star();
  const Matrix chi = init.U;
  std::vector<double> w0(chi.rows());
  for (Eigen::Index i = 0; i < chi.rows(); ++i) w0[i] = chi.row(i).dot(q);

  popdyn::Ensemble1D ens =
      popdyn::init_ensemble(spec.d(), opts.quadrature_nodes, popdyn::InitMode::Quadrature);
  ens.tracers = w0;
  NetworkState hat = std::move(init);

  CouplingLog out;
  auto log_row = [&]() {
    const Matrix Ubar = bar_positions(chi, w0, ens.tracers, q);
    const ContinuumField field(ens, spec, basis);
    const Growth g = decompose_growth(hat.U, Ubar, hat, field, data, spec, opts.kind);
    const Matrix delta = hat.U - Ubar;
    double sq = 0.0, mx = 0.0;
    for (Eigen::Index i = 0; i < delta.rows(); ++i) {
      const double n2 = delta.row(i).squaredNorm();
      sq += hat.a[i] * n2;
      mx = std::max(mx, std::sqrt(n2));
    }
    out.rows.push_back({hat.t, std::sqrt(sq), mx, hat.a.dot(g.A), hat.a.dot(g.B), hat.a.dot(g.C),
                        exact_population_loss(hat, spec), popdyn::loss_1d(ens, spec)});
  };

  // Advances both systems by h, bisecting on rejection.
  auto advance = [&](auto&& self, double h, int depth) -> void {
    if (depth > 30) throw NumericalError("coupling step size underflow");
    NetworkState trial = hat;
    const FlowStepResult fr = flow_step(trial, spec, opts.kind, h, data);
    const popdyn::StepOutcome pr = fr.accepted ? popdyn::step(ens, spec, h) : popdyn::StepOutcome{};
    if (fr.accepted && pr.accepted) {
      hat = std::move(trial);
      ens = pr.next;
      return;
    }
    self(self, 0.5 * h, depth + 1);
    self(self, 0.5 * h, depth + 1);
  };

  const auto steps = static_cast<long>(std::llround(opts.horizon / opts.dt));
  log_row();
  for (long k = 1; k <= steps; ++k) {
    const double t_target = static_cast<double>(k) * opts.dt;
    advance(advance, opts.dt, 0);
    hat.t = t_target;
    if (k % opts.log_interval == 0 || k == steps) log_row();
  }
  out.final_hat = hat;
  return out;
}

CouplingLog coupling_run(std::uint64_t seed, int d, int m, int n, const ModelSpec& spec,
                         const CouplingOptions& opts) {
  if (d != spec.d()) throw ConfigError("coupling dimension does not match the model");
  auto init_rng = substream(seed, "couple", "init");
  NetworkState init = init_network(d, m, init_rng);
  if (opts.kind == GradientKind::Empirical) {
    if (n < 1) throw ConfigError("coupling needs n >= 1 samples");
    auto data_rng = substream(seed, "couple", "data");
    const Dataset data = make_dataset(spec, n, data_rng, seed);
    return coupling_run(spec, std::move(init), &data, opts);
  }
  return coupling_run(spec, std::move(init), nullptr, opts);
}

void write_coupling_csv(std::ostream& out, const std::vector<CouplingRow>& rows) {
  csv::header(out, {"t", "delta_avg", "delta_max", "A_avg", "B_avg", "C_avg", "loss_hat", "loss_bar"});
  for (const auto& r : rows) {
    csv::row(out, {r.t, r.delta_avg, r.delta_max, r.A_avg, r.B_avg, r.C_avg, r.loss_hat, r.loss_bar});
  }
}

void write_checkpoint(std::ostream& out, const NetworkState& s) {
  out << s.dim() << ' ' << s.width() << ' ' << csv::num(s.t) << '\n';
  for (Eigen::Index i = 0; i < s.U.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.U.cols(); ++j) out << (j ? " " : "") << csv::num(s.U(i, j));
    out << '\n';
  }
  for (Eigen::Index i = 0; i < s.a.size(); ++i) out << (i ? " " : "") << csv::num(s.a[i]);
  out << '\n';
}

NetworkState read_checkpoint(std::istream& in) {
  int d = 0, m = 0;
  double t = 0.0;
  if (!(in >> d >> m >> t) || d < 1 || m < 1 || m > kMaxWidth) {
    throw IoError("malformed checkpoint header");
  }
  Matrix U(m, d);
  Eigen::VectorXd a(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) {
      if (!(in >> U(i, j))) throw IoError("truncated checkpoint weights");
    }
  }
  for (int i = 0; i < m; ++i) {
    if (!(in >> a[i])) throw IoError("truncated checkpoint masses");
  }
  NetworkState s = NetworkState::from_weights(std::move(U), std::move(a));
  s.t = t;
  return s;
}

}  // namespace meanfield::nn
