#include "meanfield/popdyn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "meanfield/csv.hpp"
#include "meanfield/error.hpp"
#include "meanfield/rng.hpp"

namespace meanfield::popdyn {
namespace {

DPair d_from(const std::vector<double>& w, std::size_t n, const std::vector<double>& mass,
             const ModelSpec& spec, const legendre::LegendreBasis& basis) {
  double m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    m2 += mass[i] * basis(2, w[i]);
    m4 += mass[i] * basis(4, w[i]);
  }
  return {m2 - spec.gamma2(), m4 - spec.gamma4()};
}

Coeffs moments_from(const std::vector<double>& w, std::size_t n, const std::vector<double>& mass,
                    const legendre::LegendreBasis& basis) {
  Coeffs m{};
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kCoeffs; ++k) m[k] += mass[i] * basis(k, w[i]);
  }
  return m;
}

// Velocities for the stacked state [particles, tracers]; only the first n
// entries carry mass.
void rates(const std::vector<double>& x, std::size_t n, const std::vector<double>& mass, bool sym,
           const ModelSpec& spec, const legendre::LegendreBasis& basis, std::vector<double>& k) {
  if (sym) {
    const auto terms = VelocityTerms::from_D(d_from(x, n, mass, spec, basis), spec);
    for (std::size_t i = 0; i < x.size(); ++i) k[i] = velocity(x[i], terms, spec);
  } else {
    const Coeffs mom = moments_from(x, n, mass, basis);
    for (std::size_t i = 0; i < x.size(); ++i) k[i] = velocity_general(x[i], mom, spec, basis);
  }
}

double clamp_w(double w) { return std::clamp(w, -kClamp, kClamp); }

double loss_of(const Ensemble1D& e, const ModelSpec& spec, const legendre::LegendreBasis& basis) {
  if (e.symmetric) {
    const DPair D = compute_D(e, spec, basis);
    const double s2 = spec.sigma_hat(2), s4 = spec.sigma_hat(4);
    return 0.5 * (s2 * s2 * D.D2 * D.D2 + s4 * s4 * D.D4 * D.D4);
  }
  return loss_from_moments(legendre_moments(e, basis), spec);
}

double odd_moment(const Ensemble1D& e) {
  double m1 = 0.0, m3 = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    m1 += e.mass[i] * e.w[i];
    m3 += e.mass[i] * e.w[i] * e.w[i] * e.w[i];
  }
  return std::max(std::abs(m1), std::abs(m3));
}

double lerp_frac(double a, double b, double level) { return (b == a) ? 1.0 : (level - a) / (b - a); }

}  // namespace

Ensemble1D init_ensemble(int d, int M, InitMode mode, std::uint64_t seed) {
  if (M < 16) throw ConfigError("ensemble needs at least 16 particles");
  if (mode == InitMode::Quadrature) {
    auto rule = legendre::mu_quadrature(d, M);
    Ensemble1D e;
    e.w = std::move(rule.nodes);
    e.mass = std::move(rule.weights);
    e.symmetric = true;
    return e;
  }
  auto rng = substream(seed, "popdyn", "init");
  return init_sampled(d, M, rng);
}

Ensemble1D init_sampled(int d, int M, std::mt19937_64& rng) {
  if (d < 3) throw DomainError("dimension must be >= 3");
  if (M < 16) throw ConfigError("ensemble needs at least 16 particles");
  Ensemble1D e;
  e.w.reserve(M);
  for (int i = 0; i < M; ++i) e.w.push_back(clamp_w(sample_sphere(d, rng)[0]));
  e.mass.assign(M, 1.0 / M);
  e.symmetric = false;
  return e;
}

Ensemble1D from_fitting_measure(const FittingMeasure& mu) {
  std::vector<Atom> atoms = mu.atoms;
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.w < b.w; });
  Ensemble1D e;
  for (auto it = atoms.rbegin(); it != atoms.rend(); ++it) {
    if (it->w == 0.0) continue;
    e.w.push_back(-clamp_w(it->w));
    e.mass.push_back(0.5 * it->p);
  }
  for (const auto& a : atoms) {
    if (a.w == 0.0) {
      e.w.push_back(0.0);
      e.mass.push_back(a.p);
    }
  }
  for (const auto& a : atoms) {
    if (a.w == 0.0) continue;
    e.w.push_back(clamp_w(a.w));
    e.mass.push_back(0.5 * a.p);
  }
  e.symmetric = true;
  return e;
}

bool check_symmetric(const Ensemble1D& e) {
  std::vector<std::size_t> idx(e.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return e.w[a] < e.w[b]; });
  const std::size_t n = idx.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = idx[i], b = idx[n - 1 - i];
    if (e.w[a] != -e.w[b] || e.mass[a] != e.mass[b]) return false;
  }
  return true;
}

Coeffs legendre_moments(const Ensemble1D& e, const legendre::LegendreBasis& basis) {
  return moments_from(e.w, e.size(), e.mass, basis);
}

DPair compute_D(const Ensemble1D& e, const ModelSpec& spec) {
  return compute_D(e, spec, legendre::LegendreBasis(spec.d()));
}

DPair compute_D(const Ensemble1D& e, const ModelSpec& spec, const legendre::LegendreBasis& basis) {
  return d_from(e.w, e.size(), e.mass, spec, basis);
}

VelocityTerms VelocityTerms::from_D(DPair D, const ModelSpec& spec) {
  const double d = spec.d();
  const double s2 = spec.sigma_hat(2) * spec.sigma_hat(2);
  const double s4 = spec.sigma_hat(4) * spec.sigma_hat(4);
  const double l1 = 2.0 * s2 * D.D2 / (d - 1.0) - 2.0 * s4 * D.D4 * (6.0 * d + 12.0) / (d * d - 1.0);
  const double l3 = 4.0 * s4 * D.D4 * (6.0 * d + 9.0) / (d * d - 1.0);
  return {D.D2, D.D4, l1, l3};
}

double velocity(double w, const VelocityTerms& t, const ModelSpec& spec) {
  const double s2 = spec.sigma_hat(2) * spec.sigma_hat(2);
  const double s4 = spec.sigma_hat(4) * spec.sigma_hat(4);
  const double w3 = w * w * w;
  const double p = 2.0 * s2 * t.D2 * w + 4.0 * s4 * t.D4 * w3;
  const double q = t.lambda1 * w + t.lambda3 * w3;
  return -(1.0 - w * w) * (p + q);
}

double velocity_general(double w, const Coeffs& moments, const ModelSpec& spec,
                        const legendre::LegendreBasis& basis) {
  double c = 0.0;
  for (int k = 1; k < kCoeffs; ++k) {
    const double s = spec.sigma_hat(k);
    c += s * (s * moments[k] - spec.h_hat(k)) * basis.derivative(k, w);
  }
  return -(1.0 - w * w) * c;
}

double loss_1d(const Ensemble1D& e, const ModelSpec& spec) {
  if (!e.symmetric) throw DomainError("loss_1d needs a symmetric ensemble");
  return loss_of(e, spec, legendre::LegendreBasis(spec.d()));
}

double loss_from_moments(const Coeffs& moments, const ModelSpec& spec) {
  double acc = 0.0;
  for (int k = 0; k < kCoeffs; ++k) {
    const double r = spec.sigma_hat(k) * moments[k] - spec.h_hat(k);
    acc += r * r;
  }
  return 0.5 * acc;
}

StepOutcome step(const Ensemble1D& e, const ModelSpec& spec, double dt) {
  if (!(dt > 0.0)) throw DomainError("step needs dt > 0");
  const legendre::LegendreBasis basis(spec.d());
  const std::size_t n = e.size();
  std::vector<double> x(e.w);
  x.insert(x.end(), e.tracers.begin(), e.tracers.end());
  const std::size_t N = x.size();
  std::vector<double> k1(N), k2(N), k3(N), k4(N), y(N);

  rates(x, n, e.mass, e.symmetric, spec, basis, k1);
  for (std::size_t i = 0; i < N; ++i) y[i] = x[i] + 0.5 * dt * k1[i];
  rates(y, n, e.mass, e.symmetric, spec, basis, k2);
  for (std::size_t i = 0; i < N; ++i) y[i] = x[i] + 0.5 * dt * k2[i];
  rates(y, n, e.mass, e.symmetric, spec, basis, k3);
  for (std::size_t i = 0; i < N; ++i) y[i] = x[i] + dt * k3[i];
  rates(y, n, e.mass, e.symmetric, spec, basis, k4);

  StepOutcome out{true, 0.0, e};
  for (std::size_t i = 0; i < N; ++i) {
    const double raw = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(raw)) {
      out.max_dw = std::numeric_limits<double>::infinity();
      continue;
    }
    const double next = clamp_w(raw);
    out.max_dw = std::max(out.max_dw, std::abs(next - x[i]));
    if (i < n) {
      out.next.w[i] = next;
    } else {
      out.next.tracers[i - n] = next;
    }
  }
  out.accepted = out.max_dw <= kMaxStepMove;
  if (!out.accepted) out.next = e;
  return out;
}

PhaseParams phase_params(int d) {
  if (d < 3) throw DomainError("dimension must be >= 3");
  const double ld = std::log(static_cast<double>(d));
  const double lld = std::log(ld);
  const double sd = std::sqrt(static_cast<double>(d));
  PhaseParams p{};
  p.w_max = 1.0 / ld;
  p.iota_U = ld / sd;
  p.kappa = 1.0 / lld;
  p.xi = 1.0 / (2.0 * lld);
  p.iota_L = p.kappa / sd;
  p.iota_R = 1.0 / (p.kappa * sd);
  p.asymptotic = p.iota_U < p.w_max && p.kappa < 0.25;
  return p;
}

const char* to_string(T2Case c) {
  switch (c) {
    case T2Case::None: return "none";
    case T2Case::Case1: return "case1";
    case T2Case::Case2: return "case2";
  }
  return "unknown";
}

double abs_quantile(const Ensemble1D& e, double q) {
  std::vector<std::pair<double, double>> v;
  v.reserve(e.size());
  double total = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    v.emplace_back(std::abs(e.w[i]), e.mass[i]);
    total += e.mass[i];
  }
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double cum = 0.0;
  for (const auto& [x, m] : v) {
    cum += m;
    if (cum >= q * total) return x;
  }
  return v.back().first;
}

FlowResult run_flow(Ensemble1D e, const ModelSpec& spec, const FlowOptions& opts) {
  if (!(opts.eps > 0.0 && opts.eps < 1.0)) throw ConfigError("eps must lie in (0, 1)");
  if (!(opts.t_max > 0.0)) throw ConfigError("t_max must be positive");
  if (opts.log_interval < 1) throw ConfigError("log_interval must be >= 1");
  if (e.size() == 0) throw ConfigError("empty ensemble");

  const legendre::LegendreBasis basis(spec.d());
  FlowResult res;
  PhaseReport& rep = res.report;
  rep.params = phase_params(spec.d());

  std::vector<double> tracers{rep.params.iota_U, rep.params.iota_L, rep.params.iota_R};
  tracers.insert(tracers.end(), e.tracers.begin(), e.tracers.end());
  tracers.insert(tracers.end(), opts.extra_tracers.begin(), opts.extra_tracers.end());
  e.tracers = tracers;
  res.tracer_init = tracers;

  // Initial order of every particle and tracer, checked after each step.
  const std::size_t n = e.size();
  std::vector<std::size_t> order(n + tracers.size());
  std::iota(order.begin(), order.end(), 0);
  auto value = [&](const Ensemble1D& s, std::size_t i) { return i < n ? s.w[i] : s.tracers[i - n]; };
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return value(e, a) < value(e, b); });
  auto order_ok = [&](const Ensemble1D& s) {
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (value(s, order[i]) < value(s, order[i - 1])) return false;
    }
    return true;
  };

  const double s2 = spec.sigma_hat(2) * spec.sigma_hat(2);
  const double s4 = spec.sigma_hat(4) * spec.sigma_hat(4);
  res.loss_threshold = 0.5 * (s2 + s4) * opts.eps * opts.eps;
  const double dt0 = opts.dt0 > 0.0 ? opts.dt0 : 0.05 / (s2 + s4);
  double dt = dt0;
  double t = 0.0;

  DPair D = compute_D(e, spec, basis);
  double loss = loss_of(e, spec, basis);
  const double w_max = rep.params.w_max;
  if (e.tracers[kTracerU] >= w_max) {
    rep.T1 = 0.0;
    rep.phase1_empty = true;
    rep.w_T1_L = e.tracers[kTracerL];
    rep.w_T1_R = e.tracers[kTracerR];
  }

  auto phase_at = [&](double time) {
    if (rep.T2 && time >= *rep.T2) return 3;
    if (rep.T1 && time >= *rep.T1) return 2;
    return 1;
  };
  auto snapshot = [&]() {
    res.log.push_back({t, loss, D.D2, D.D4, abs_quantile(e, 0.1), abs_quantile(e, 0.5),
                       abs_quantile(e, 0.9), phase_at(t)});
  };
  auto record = [&](double h) {
    if (opts.record_history) {
      res.history.push_back({t, h, loss, D.D2, D.D4, odd_moment(e), order_ok(e), e.tracers});
    }
  };

  snapshot();
  record(0.0);
  if (loss <= res.loss_threshold) {
    res.converged = true;
    rep.T_star = 0.0;
  }

  bool logged_last = true;
  while (!res.converged && t < opts.t_max && res.accepted_steps < opts.max_steps) {
    const double h = std::min(dt, opts.t_max - t);
    if (h < 1e-14) throw NumericalError("step size underflow in run_flow");
    const StepOutcome full = step(e, spec, h);
    if (!full.accepted) {
      dt = 0.5 * h;
      ++res.rejected_steps;
      continue;
    }
    const StepOutcome half1 = step(e, spec, 0.5 * h);
    const StepOutcome half2 = half1.accepted ? step(half1.next, spec, 0.5 * h) : half1;
    if (!half2.accepted) {
      dt = 0.5 * h;
      ++res.rejected_steps;
      continue;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(full.next.w[i] - half2.next.w[i]));
    for (std::size_t i = 0; i < e.tracers.size(); ++i) {
      err = std::max(err, std::abs(full.next.tracers[i] - half2.next.tracers[i]));
    }
    if (err > opts.tol) {
      dt = 0.5 * h;
      ++res.rejected_steps;
      continue;
    }

    const Ensemble1D prev = std::move(e);
    const DPair D_prev = D;
    e = half2.next;
    t += h;
    ++res.accepted_steps;
    D = compute_D(e, spec, basis);
    loss = loss_of(e, spec, basis);

    if (!rep.T1) {
      const double a = prev.tracers[kTracerU], b = e.tracers[kTracerU];
      if (a < w_max && b >= w_max) {
        const double f = lerp_frac(a, b, w_max);
        rep.T1 = t - h + f * h;
        rep.w_T1_L = prev.tracers[kTracerL] + f * (e.tracers[kTracerL] - prev.tracers[kTracerL]);
        rep.w_T1_R = prev.tracers[kTracerR] + f * (e.tracers[kTracerR] - prev.tracers[kTracerR]);
      }
    }
    if (!rep.T2) {
      auto crossing = [&](double a, double b) -> std::optional<double> {
        if ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)) return t - h + lerp_frac(a, b, 0.0) * h;
        return std::nullopt;
      };
      const auto c2 = crossing(D_prev.D2, D.D2);
      const auto c4 = crossing(D_prev.D4, D.D4);
      if (c2 && (!c4 || *c2 <= *c4)) {
        rep.T2 = *c2;
        rep.T2_case = T2Case::Case1;
      } else if (c4) {
        rep.T2 = *c4;
        rep.T2_case = T2Case::Case2;
      }
    }
    if (loss <= res.loss_threshold) {
      res.converged = true;
      rep.T_star = t;
    }
    record(h);
    logged_last = false;
    if (res.accepted_steps % static_cast<std::uint64_t>(opts.log_interval) == 0 || res.converged) {
      snapshot();
      logged_last = true;
    }
    if (err < opts.tol / 64.0) dt = std::min(2.0 * dt, dt0);
  }
  if (!logged_last) snapshot();
  res.final_state = std::move(e);
  return res;
}

double potential(double w) {
  if (!(w > 0.0 && w < 1.0)) throw DomainError("potential needs 0 < w < 1");
  return std::log(w / std::sqrt(1.0 - w * w));
}

double potential_derivative(double w) {
  if (!(w > 0.0 && w < 1.0)) throw DomainError("potential needs 0 < w < 1");
  return 1.0 / (w * (1.0 - w * w));
}

GapVerdict potential_gap_monitor(const std::vector<GapSample>& samples, double tol) {
  GapVerdict v;
  for (const auto& s : samples) {
    if (!(s.w > 0.0) || !(s.w_prime > 0.0)) {
      v.void_monitor = true;
      return v;
    }
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& a = samples[i - 1];
    const auto& b = samples[i];
    const double ga = std::abs(potential(a.w) - potential(a.w_prime));
    const double gb = std::abs(potential(b.w) - potential(b.w_prime));
    if (a.D4 <= 0.0 && b.D4 <= 0.0) {
      ++v.increasing_steps;
      const double bad = ga - gb;
      if (bad > tol) v.increasing_ok = false;
      v.worst_violation = std::max(v.worst_violation, bad);
    }
    if (a.D4 >= 0.0 && b.D4 >= 0.0) {
      ++v.decreasing_steps;
      const double bad = gb - ga;
      if (bad > tol) v.decreasing_ok = false;
      v.worst_violation = std::max(v.worst_violation, bad);
    }
  }
  return v;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows) {
  csv::header(out, {"t", "loss", "D2", "D4", "w_q10", "w_q50", "w_q90", "phase"});
  for (const auto& r : rows) {
    out << csv::num(r.t) << ',' << csv::num(r.loss) << ',' << csv::num(r.D2) << ','
        << csv::num(r.D4) << ',' << csv::num(r.w_q10) << ',' << csv::num(r.w_q50) << ','
        << csv::num(r.w_q90) << ',' << r.phase << '\n';
  }
}

}  // namespace meanfield::popdyn
