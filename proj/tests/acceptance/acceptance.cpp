// Acceptance harness: one PASS/FAIL line per criterion with pinned
// tolerances and runtime budgets.
//
//   acceptance [--only 1,6b,...] [--report FILE] [--known-fail 7,...] [--scratch DIR]
//
// Exit status is 1 when a criterion outside --known-fail fails or a known
// failure starts passing, so the list stays current.
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "meanfield/config.hpp"
#include "meanfield/kernel.hpp"
#include "meanfield/lab.hpp"
#include "meanfield/legendre.hpp"
#include "meanfield/model.hpp"
#include "meanfield/nn.hpp"
#include "meanfield/popdyn.hpp"
#include "oracles.hpp"

using namespace meanfield;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double x, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << x;
  return s.str();
}

ModelSpec defaults(int d) { return ModelSpec::from_gammas(d, 1.0, 1.0, 0.05, 0.005); }

// sigma and y evaluated from the closed-form P_2, P_4 and the harmonic
// dimensions, independent of the library's Legendre code.
struct DirectEval {
  int d;
  double s2, s4, h2, h4;
  explicit DirectEval(const ModelSpec& spec)
      : d(spec.d()),
        s2(spec.sigma_hat(2) * std::sqrt(static_cast<double>(oracle::harmonic_dim(2, spec.d())))),
        s4(spec.sigma_hat(4) * std::sqrt(static_cast<double>(oracle::harmonic_dim(4, spec.d())))),
        h2(spec.h_hat(2) * std::sqrt(static_cast<double>(oracle::harmonic_dim(2, spec.d())))),
        h4(spec.h_hat(4) * std::sqrt(static_cast<double>(oracle::harmonic_dim(4, spec.d())))) {}
  double sigma(double s) const { return s2 * oracle::p2(d, s) + s4 * oracle::p4(d, s); }
  double y(double t) const { return h2 * oracle::p2(d, t) + h4 * oracle::p4(d, t); }
};

// Uniform points on S^{d-1}, one per row.
nn::Matrix sphere_block(int d, int rows, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  nn::Matrix X(rows, d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  for (int i = 0; i < rows; ++i) X.row(i) /= X.row(i).norm();
  return X;
}

struct Mc {
  double sum = 0, sum2 = 0;
  long n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  double mean() const { return sum / n; }
  double stderr_() const {
    const double m = mean();
    return std::sqrt((sum2 / n - m * m) / (n - 1.0));
  }
};

popdyn::Ensemble1D random_symmetric(int pairs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 0.95);
  std::vector<double> half(pairs), mass(pairs);
  double total = 0.0;
  for (int i = 0; i < pairs; ++i) {
    half[i] = u(rng);
    mass[i] = 0.1 + u(rng);
    total += 2.0 * mass[i];
  }
  std::sort(half.begin(), half.end());
  popdyn::Ensemble1D e;
  e.symmetric = true;
  for (int i = pairs - 1; i >= 0; --i) {
    e.w.push_back(-half[i]);
    e.mass.push_back(mass[i] / total);
  }
  for (int i = 0; i < pairs; ++i) {
    e.w.push_back(half[i]);
    e.mass.push_back(mass[i] / total);
  }
  return e;
}

nn::NetworkState fitted_network(const ModelSpec& spec) {
  const auto tm = target_moments(spec);
  const auto mu = construct_fitting_measure(tm.beta2, tm.beta4);
  std::vector<double> w, p;
  for (const auto& a : mu.atoms) {
    w.push_back(a.w);
    p.push_back(a.p);
  }
  auto n = oracle::lift(spec.d(), w, p);
  return nn::NetworkState::from_weights(n.U, n.a);
}

nn::Matrix random_tangent(const nn::Matrix& U, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  nn::Matrix V(U.rows(), U.cols());
  for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < U.rows(); ++i) V.row(i) -= V.row(i).dot(U.row(i)) * U.row(i);
  return V / V.norm();
}

double max_row_distance(const nn::Matrix& A, const nn::Matrix& B) {
  return (A - B).rowwise().norm().maxCoeff();
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  double worst = 0.0;
  for (int d : {5, 10, 30, 100}) {
    for (int i = 0; i <= 200; ++i) {
      const double t = -1.0 + i / 100.0;
      worst = std::max(worst, std::abs(legendre::eval(2, d, t) - oracle::p2(d, t)));
      worst = std::max(worst, std::abs(legendre::eval(4, d, t) - oracle::p4(d, t)));
    }
  }
  const auto rule = legendre::mu_quadrature(20, 256);
  double gram = 0.0;
  for (int j = 0; j <= 6; ++j) {
    for (int k = 0; k <= 6; ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) {
        acc += rule.weights[i] * legendre::eval_normalized(j, 20, rule.nodes[i]) *
               legendre::eval_normalized(k, 20, rule.nodes[i]);
      }
      gram = std::max(gram, std::abs(acc - (j == k ? 1.0 : 0.0)));
    }
  }
  return {worst <= 1e-12 && gram <= 1e-8,
          "closed-form err " + fmt(worst) + " (tol 1e-12), Gram err " + fmt(gram) + " (tol 1e-8)"};
}

// f_rho(t) for the rotationally symmetrized network of a 1-D ensemble: the
// z-direction of each neuron is integrated against the law of one coordinate
// on S^{d-2}, density (1 - s^2)^{(d-4)/2}, by Gauss-Legendre. The result is a
// quartic in t; it is recovered from nine Chebyshev samples.
Eigen::VectorXd symmetrized_poly(const popdyn::Ensemble1D& e, const DirectEval& ev) {
  const int d = ev.d;
  const auto gl = legendre::gauss_legendre(64);
  std::vector<double> ws(gl.size());
  double total = 0.0;
  for (std::size_t i = 0; i < gl.size(); ++i) {
    ws[i] = gl.weights[i] * std::pow(1.0 - gl.nodes[i] * gl.nodes[i], 0.5 * (d - 4));
    total += ws[i];
  }
  for (auto& w : ws) w /= total;
  auto f = [&](double t) {
    double acc = 0.0;
    const double rt = std::sqrt(1.0 - t * t);
    for (std::size_t j = 0; j < e.size(); ++j) {
      const double w = e.w[j], rw = std::sqrt(1.0 - w * w);
      double inner = 0.0;
      for (std::size_t i = 0; i < gl.size(); ++i) inner += ws[i] * ev.sigma(w * t + rw * rt * gl.nodes[i]);
      acc += e.mass[j] * inner;
    }
    return acc;
  };
  const int nodes = 9;
  Eigen::MatrixXd V(nodes, 5);
  Eigen::VectorXd b(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double t = std::cos(M_PI * (i + 0.5) / nodes);
    for (int p = 0; p < 5; ++p) V(i, p) = std::pow(t, p);
    b[i] = f(t);
  }
  return V.colPivHouseholderQr().solve(b);
}

Outcome criterion2() {
  const int d = 30;
  const auto spec = defaults(d);
  const DirectEval ev(spec);
  std::mt19937_64 rng(2002);
  Outcome out;
  double worst_z = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto e = random_symmetric(8 + 4 * trial, rng);
    const Eigen::VectorXd c = symmetrized_poly(e, ev);
    Mc mc;
    std::mt19937_64 xs(7000 + trial);
    for (int block = 0; block < 100; ++block) {
      const auto X = sphere_block(d, 10000, xs);
      for (int i = 0; i < X.rows(); ++i) {
        const double t = X(i, 0);
        const double f = (((c[4] * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0];
        const double r = f - ev.y(t);
        mc.add(0.5 * r * r);
      }
    }
    const double z = std::abs(popdyn::loss_1d(e, spec) - mc.mean()) / mc.stderr_();
    worst_z = std::max(worst_z, z);
    if (z > 3.0) out.pass = false;
  }
  out.detail = "worst |loss_1d - MC| = " + fmt(worst_z) + " stderr (tol 3) over 5 ensembles, 1e6 samples";
  return out;
}

Outcome criterion3() {
  const int d = 30;
  const auto spec = defaults(d);
  const DirectEval ev(spec);
  std::mt19937_64 rng(3003);
  Outcome out;
  double worst_z = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = nn::init_network(d, 64, rng);
    Mc mc;
    std::mt19937_64 xs(8000 + trial);
    for (int block = 0; block < 40; ++block) {
      const auto X = sphere_block(d, 10000, xs);
      const nn::Matrix S = X * s.U.transpose();
      for (int i = 0; i < X.rows(); ++i) {
        double f = 0.0;
        for (int j = 0; j < s.width(); ++j) f += s.a[j] * ev.sigma(S(i, j));
        const double r = f - ev.y(X(i, 0));
        mc.add(0.5 * r * r);
      }
    }
    const double z = std::abs(nn::exact_population_loss(s, spec) - mc.mean()) / mc.stderr_();
    worst_z = std::max(worst_z, z);
    if (z > 3.0) out.pass = false;
  }
  double fitted = 0.0;
  for (int d3 : {3, 4, 5}) {
    const auto ms = defaults(d3);
    fitted = std::max(fitted, nn::exact_population_loss(fitted_network(ms), ms));
  }
  if (!(fitted <= 1e-10)) out.pass = false;
  out.detail = "worst |exact - MC| = " + fmt(worst_z) + " stderr (tol 3), 4e5 samples; fitted loss " +
               fmt(fitted) + " (tol 1e-10) at d=3,4,5";
  return out;
}

Outcome criterion4() {
  const int d = 30;
  const auto spec = defaults(d);
  std::mt19937_64 rng(4004);
  const auto s = nn::init_network(d, 64, rng);
  const auto data = nn::make_dataset(spec, 2000, rng);
  const nn::Matrix Ge = nn::empirical_grads(s, spec, data);
  const nn::Matrix Gp = nn::population_grads(s, spec);
  auto fd = [&](const nn::Matrix& V, auto loss) {
    const double h = 1e-5;
    nn::NetworkState p = s, m = s;
    p.U += h * V;
    m.U -= h * V;
    nn::renormalize(p.U);
    nn::renormalize(m.U);
    return (loss(p) - loss(m)) / (2 * h);
  };
  auto predicted = [&](const nn::Matrix& G, const nn::Matrix& V) {
    double acc = 0.0;
    for (int i = 0; i < s.width(); ++i) acc += s.a[i] * G.row(i).dot(V.row(i));
    return acc;
  };
  double worst_e = 0.0, worst_p = 0.0;
  for (int k = 0; k < 5; ++k) {
    const nn::Matrix V = random_tangent(s.U, rng);
    const double fe = fd(V, [&](const nn::NetworkState& z) { return nn::empirical_loss(z, spec, data); });
    const double fp = fd(V, [&](const nn::NetworkState& z) { return nn::exact_population_loss(z, spec); });
    worst_e = std::max(worst_e, std::abs(predicted(Ge, V) - fe) / std::abs(fe));
    worst_p = std::max(worst_p, std::abs(predicted(Gp, V) - fp) / std::abs(fp));
  }
  return {worst_e <= 1e-5 && worst_p <= 1e-5,
          "rel err empirical " + fmt(worst_e) + ", population " + fmt(worst_p) + " (tol 1e-5), 5 directions each"};
}

Outcome criterion5() {
  const int d = 30;
  const auto spec = defaults(d);
  std::mt19937_64 rng(5005);
  auto s = nn::init_network(d, 64, rng);
  auto joint = popdyn::init_ensemble(d, legendre::kDefaultNodes, popdyn::InitMode::Quadrature);
  joint.tracers.clear();
  auto ode = joint;
  for (int i = 0; i < s.width(); ++i) ode.tracers.push_back(s.U.row(i).dot(spec.q_star()));
  const double dt = 0.01;
  double worst = 0.0;
  int steps = 0;
  for (; steps < 500; ++steps) {
    const auto r = nn::flow_step(s, spec, nn::GradientKind::Continuum, dt, nullptr, &joint);
    const auto o = popdyn::step(ode, spec, dt);
    if (!r.accepted || !o.accepted) return {false, "step rejected at t = " + fmt(steps * dt)};
    ode = o.next;
    for (int i = 0; i < s.width(); ++i) {
      worst = std::max(worst, std::abs(s.U.row(i).dot(spec.q_star()) - ode.tracers[i]));
    }
  }
  return {worst <= 1e-5, "max |u.q - w_1D| over [0, 5] = " + fmt(worst) + " (tol 1e-5), d=30, m=64"};
}

struct FlowCheck {
  Outcome outcome;
  popdyn::FlowResult result;
};

FlowCheck popdyn_invariants(int d, double eps, bool need_T2) {
  const auto spec = defaults(d);
  popdyn::FlowOptions o;
  o.eps = eps;
  o.record_history = true;
  o.extra_tracers = {0.05, 0.5};
  auto r = popdyn::run_flow(popdyn::init_ensemble(d, legendre::kDefaultNodes, popdyn::InitMode::Quadrature),
                            spec, o);
  Outcome out;
  std::vector<std::string> failed;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) {
      out.pass = false;
      failed.push_back(what);
    }
  };
  const double threshold = 0.5 * spec.sigma_sq_sum() * eps * eps;
  need(r.converged && !r.log.empty() && r.log.back().loss <= threshold, "terminal loss");
  double prev = r.history.empty() ? 0.0 : r.history.front().loss;
  bool mono = true, order = true, odd = true, pre = true, post = true;
  const auto T2 = r.report.T2;
  const auto kase = r.report.T2_case;
  for (const auto& h : r.history) {
    mono &= h.loss <= prev + 1e-8;
    prev = h.loss;
    order &= h.order_preserved;
    odd &= h.odd_moment <= 1e-10;
    if (!T2 || h.t < *T2) {
      pre &= h.D2 < 0.0 && h.D4 < 0.0;
    } else if (kase == popdyn::T2Case::Case2) {
      post &= h.D2 <= 1e-6 && h.D4 >= -1e-6;
    } else if (kase == popdyn::T2Case::Case1) {
      post &= h.D2 >= -1e-6 && h.D4 <= 1e-6;
    }
  }
  need(mono, "loss monotone");
  need(order, "order");
  need(odd, "odd moments");
  need(pre, "D2, D4 < 0 before T2");
  need(post, "case sign pattern");
  if (need_T2) need(T2.has_value(), "T2 reached");

  // Potential gaps for the (iota_L, iota_R) and (0.05, 0.5) tracer pairs.
  const std::size_t base = r.tracer_init.size() - 2;
  std::size_t inc = 0, dec = 0;
  for (auto [a, b] : {std::pair<std::size_t, std::size_t>{popdyn::kTracerL, popdyn::kTracerR}, {base, base + 1}}) {
    std::vector<popdyn::GapSample> samples;
    for (const auto& h : r.history) samples.push_back({h.t, h.D4, h.tracers[a], h.tracers[b]});
    const auto v = popdyn::potential_gap_monitor(samples, 1e-6);
    need(!v.void_monitor && v.increasing_ok && v.decreasing_ok, "potential gap");
    inc += v.increasing_steps;
    dec += v.decreasing_steps;
  }
  std::ostringstream s;
  s << "d=" << d << " eps=" << eps << ": " << r.accepted_steps << " steps, T2 = "
    << (T2 ? fmt(*T2, 4) + " (" + popdyn::to_string(kase) + ")" : std::string("none")) << ", T* = "
    << (r.report.T_star ? fmt(*r.report.T_star, 4) : std::string("none")) << ", final loss "
    << fmt(r.log.empty() ? NAN : r.log.back().loss) << " <= " << fmt(threshold) << ", gap steps "
    << inc << " (D4<=0) / " << dec << " (D4>=0)";
  if (r.accepted_steps == 0) s << "; vacuous: the initial loss is already below the threshold";
  if (!failed.empty()) {
    s << "; failed:";
    for (const auto& f : failed) s << ' ' << f << ';';
  }
  out.detail = s.str();
  return {out, std::move(r)};
}

Outcome criterion7() {
  Outcome out;
  std::ostringstream s;
  bool vacuous = false;
  for (int d : {100, 400}) {
    popdyn::FlowOptions o;
    const auto r = popdyn::run_flow(
        popdyn::init_ensemble(d, legendre::kDefaultNodes, popdyn::InitMode::Quadrature), defaults(d), o);
    const auto& p = r.report.params;
    if (!r.report.T1 || !r.report.w_T1_L || !r.report.w_T1_R) {
      out.pass = false;
      s << "d=" << d << ": T1 not reached; ";
      continue;
    }
    const double gl = *r.report.w_T1_L / p.iota_L;
    const double gr = *r.report.w_T1_R / p.iota_R;
    const double ref = std::sqrt(static_cast<double>(d)) / std::pow(std::log(static_cast<double>(d)), 2);
    const bool ok = gl >= ref / 10 && gl <= ref * 10 && gr >= ref / 10 && gr <= ref * 10 &&
                    gl / gr >= 1.0 / 3 && gl / gr <= 3.0;
    out.pass &= ok;
    vacuous |= r.report.phase1_empty;
    s << "d=" << d << ": T1 = " << fmt(*r.report.T1) << ", growth L " << fmt(gl) << ", R " << fmt(gr)
      << ", reference " << fmt(ref) << (r.report.phase1_empty ? " [phase 1 empty: iota_U >= w_max]" : "")
      << "; ";
  }
  if (vacuous) s << "ratios are 1 by construction when phase 1 is empty";
  out.detail = s.str();
  return out;
}

Outcome criterion8() {
  const int d = 30, m = 64, n = 2000;
  const auto spec = defaults(d);
  std::mt19937_64 rng(8008);
  const auto init = nn::init_network(d, m, rng);
  const auto data = nn::make_dataset(spec, n, rng);
  auto flow = init;
  const double dt = 1e-3;
  for (int k = 0; k < 1000; ++k) {
    if (!nn::flow_step(flow, spec, nn::GradientKind::Empirical, dt, &data).accepted) {
      return {false, "flow step rejected"};
    }
  }
  auto gap_for = [&](double eta) {
    auto s = init;
    const int steps = static_cast<int>(std::lround(1.0 / eta));
    for (int k = 0; k < steps; ++k) nn::gd_step(s, spec, data, eta);
    return max_row_distance(s.U, flow.U);
  };
  const double g1 = gap_for(1e-4);
  const double g2 = gap_for(5e-5);
  return {g1 <= 1e-2 && g1 / g2 >= 2.0,
          "gap(1e-4) = " + fmt(g1) + " (tol 1e-2), gap(5e-5) = " + fmt(g2) + ", ratio " + fmt(g1 / g2, 7) +
              " (need >= 2)"};
}

Outcome criterion9() {
  const int d = 30;
  const auto spec = defaults(d);
  nn::CouplingOptions o;
  // The central difference of the logged delta is O(dt^2) accurate; 0.01
  // leaves it at about 3e-3.
  o.dt = 0.005;
  o.horizon = 5.0;
  o.log_interval = 1;
  const auto emp = nn::coupling_run(9, d, 64, 2000, spec, o);
  const auto& rows = emp.rows;
  double scale = 0.0;
  for (const auto& r : rows) scale = std::max(scale, std::abs(r.A_avg + r.B_avg + r.C_avg));
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
    const double fd = (rows[i + 1].delta_avg * rows[i + 1].delta_avg - rows[i - 1].delta_avg * rows[i - 1].delta_avg) /
                      (rows[i + 1].t - rows[i - 1].t);
    const double p = rows[i].A_avg + rows[i].B_avg + rows[i].C_avg;
    if (std::abs(p) < 1e-2 * scale) continue;
    worst = std::max(worst, std::abs(fd - p) / std::abs(p));
  }
  o.kind = nn::GradientKind::Population;
  const auto pop = nn::coupling_run(9, d, 64, 2000, spec, o);
  double c_max = 0.0;
  for (const auto& r : pop.rows) c_max = std::max(c_max, std::abs(r.C_avg));
  const double delta0 = std::max(rows.front().delta_avg, pop.rows.front().delta_avg);
  return {worst <= 1e-3 && c_max == 0.0 && delta0 == 0.0 && rows.size() > 2,
          "rel err FD vs A+B+C " + fmt(worst) + " (tol 1e-3) over " + std::to_string(rows.size()) +
              " rows; population-kind max |C| = " + fmt(c_max) + "; delta_0 = " + fmt(delta0)};
}

Outcome criterion10() {
  double lo = INFINITY, hi = 0.0;
  std::ostringstream s;
  for (int d : {50, 100, 200, 400}) {
    const double v = std::abs(legendre::relu_coefficient(2, d)) * std::sqrt(static_cast<double>(d));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    s << "d=" << d << ": " << fmt(v, 5) << "; ";
  }
  s << "max/min " << fmt(hi / lo, 4) << " (tol 2)";
  return {hi / lo <= 2.0, s.str()};
}

Outcome criterion11() {
  const auto spec = defaults(30);
  kernel::SeparationOptions o;
  const auto t = kernel::separation_experiment(spec, kernel::KernelSpec{}, o);
  auto crossing = [](const std::optional<int>& c) { return c ? std::to_string(*c) : std::string("none"); };
  std::ostringstream s;
  s << "tau " << fmt(t.tau) << "; NN crossing " << crossing(t.nn_crossing) << ", kernel crossing "
    << crossing(t.kernel_crossing) << "; medians at n=" << o.n_grid.back() << ":";
  for (const auto& m : t.medians) {
    if (m.n == o.n_grid.back()) s << ' ' << m.method << ' ' << fmt(m.median_loss);
  }
  if (!t.nn_crossing && !t.kernel_crossing) s << "; neither crosses, decided by the kernel-never-crosses branch";
  return {t.separated() && !t.partial, s.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome criterion12(const fs::path& scratch) {
  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"validate", ""},
      {"popdyn", "d = 40\n[numeric]\nparticles = 128\neps = 0.01\nseeds = 1, 2, 3\n"},
      {"train", "d = 12\n[numeric]\nwidth = 16\nsamples = 300\nsteps = 200\nseeds = 1, 2, 3\n"},
      {"couple", "d = 12\n[numeric]\nwidth = 16\nsamples = 300\nhorizon = 0.5\nseeds = 1, 2\n"},
      {"kernel", "d = 12\n[numeric]\nsamples = 300\nseeds = 1, 2, 3\n"},
      {"separation",
       "d = 12\n[numeric]\nn_grid = 50, 100\nseeds = 1, 2, 3\nsep_width = 16\nsep_steps = 50\nminnorm_max_n = 50\n"},
  };
  Outcome out;
  std::size_t compared = 0;
  for (const auto& [name, body] : experiments) {
    std::vector<fs::path> dirs;
    for (int run = 0; run < 3; ++run) {
      auto cfg = config::parse_config_string("[model]\n" + body, name);
      config::set_key(cfg, "experiment", name);
      config::set_key(cfg, "threads", run == 2 ? "3" : "1");
      const fs::path dir = scratch / (name + "_" + std::to_string(run));
      fs::remove_all(dir);
      config::set_key(cfg, "dir", dir.string());
      lab::run(cfg);
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const auto file = entry.path().filename();
      // The manifest and resolved config record the output dir and thread count.
      if (file == "manifest.json" || file == "config.resolved") continue;
      const auto ref = slurp(entry.path());
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        ++compared;
        if (slurp(dirs[k] / file) != ref) {
          out.pass = false;
          out.detail += name + "/" + file.string() + " differs; ";
        }
      }
    }
  }
  out.detail += std::to_string(compared) + " file comparisons across repeats and thread counts 1 and 3";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<std::string> only, known_fail;
  std::string report, scratch = (fs::temp_directory_path() / "meanfield_acceptance").string();
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--known-fail", known_fail, "criteria expected to fail")->delimiter(',');
  app.add_option("--report", report, "also write the result lines to this file");
  app.add_option("--scratch", scratch, "directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);

  std::ofstream report_file;
  if (!report.empty()) report_file.open(report);
  const std::set<std::string> selected(only.begin(), only.end());
  const std::set<std::string> expected_fail(known_fail.begin(), known_fail.end());
  int unexpected = 0, passed = 0, total = 0;

  auto run = [&](const std::string& id, double budget_s, const std::function<Outcome()>& body) {
    if (!selected.empty() && !selected.count(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
      o.pass = false;
      o.detail += "; over runtime budget";
    }
    std::ostringstream line;
    line << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
         << std::fixed << std::setprecision(1) << secs << " s / " << budget_s << " s]";
    if (expected_fail.count(id)) line << (o.pass ? "  (listed as known failure)" : "  (known failure)");
    std::cout << line.str() << std::endl;
    if (report_file) report_file << line.str() << std::endl;
    ++total;
    passed += o.pass;
    if (o.pass == static_cast<bool>(expected_fail.count(id))) ++unexpected;
  };

  run("1", 1, criterion1);
  run("2", 30, criterion2);
  run("3", 30, criterion3);
  run("4", 10, criterion4);
  run("5", 60, criterion5);
  run("6", 120, [] { return popdyn_invariants(100, 0.05, false).outcome; });
  run("6b", 120, [] { return popdyn_invariants(100, 1e-4, true).outcome; });
  run("7", 300, criterion7);
  run("8", 300, criterion8);
  run("9", 120, criterion9);
  run("10", 10, criterion10);
  run("11", 1800, criterion11);
  run("12", 600, [&] { return criterion12(scratch); });

  std::ostringstream tail;
  tail << "acceptance: " << passed << "/" << total << " criteria passed, " << unexpected
       << " unexpected result(s)";
  std::cout << tail.str() << std::endl;
  if (report_file) report_file << tail.str() << std::endl;
  return unexpected == 0 ? 0 : 1;
}
