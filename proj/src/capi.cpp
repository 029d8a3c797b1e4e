#include "meanfield/meanfield.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "meanfield/config.hpp"
#include "meanfield/error.hpp"
#include "meanfield/kernel.hpp"
#include "meanfield/lab.hpp"
#include "meanfield/legendre.hpp"
#include "meanfield/model.hpp"
#include "meanfield/nn.hpp"
#include "meanfield/popdyn.hpp"
#include "meanfield/rng.hpp"

using namespace meanfield;

struct mf_model {
  ModelSpec spec;
};
struct mf_ensemble {
  popdyn::Ensemble1D e;
};
struct mf_network {
  nn::NetworkState s;
};
struct mf_dataset {
  nn::Dataset data;
};
struct mf_config {
  config::ExperimentConfig cfg;
};
struct mf_manifest {
  lab::RunManifest m;
  std::string json;
};

namespace {

thread_local std::string g_last_error;

mf_status fail(mf_status s, const char* msg) {
  g_last_error = msg;
  return s;
}

template <class F>
mf_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return MF_OK;
  } catch (const DomainError& e) {
    return fail(MF_ERR_DOMAIN, e.what());
  } catch (const ConfigError& e) {
    return fail(MF_ERR_CONFIG, e.what());
  } catch (const NumericalError& e) {
    return fail(MF_ERR_NUMERICAL, e.what());
  } catch (const IoError& e) {
    return fail(MF_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MF_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MF_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MF_ERR_INTERNAL, "unknown error");
  }
}

#define MF_REQUIRE(cond)                                                     \
  do {                                                                       \
    if (!(cond)) return fail(MF_ERR_INVALID_ARGUMENT, "null or invalid argument: " #cond); \
  } while (0)

Coeffs coeffs_from(const double* p) {
  Coeffs c{};
  for (int k = 0; k < kCoeffs; ++k) c[k] = p[k];
  return c;
}

double or_nan(const std::optional<double>& x) {
  return x ? *x : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

extern "C" {

const char* mf_version(void) { return lab::version(); }

const char* mf_last_error(void) { return g_last_error.c_str(); }

const char* mf_status_string(mf_status status) {
  switch (status) {
    case MF_OK: return "ok";
    case MF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case MF_ERR_DOMAIN: return "domain error";
    case MF_ERR_CONFIG: return "configuration error";
    case MF_ERR_NUMERICAL: return "numerical error";
    case MF_ERR_IO: return "i/o error";
    case MF_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

mf_status mf_legendre_eval(int k, int d, double t, double* out) {
  MF_REQUIRE(out);
  return guard([&] { *out = legendre::eval(k, d, t, legendre::kHardMaxDegree); });
}

mf_status mf_legendre_normalized(int k, int d, double t, double* out) {
  MF_REQUIRE(out);
  return guard([&] { *out = legendre::eval_normalized(k, d, t, legendre::kHardMaxDegree); });
}

mf_status mf_harmonic_dim(int k, int d, uint64_t* out) {
  MF_REQUIRE(out);
  return guard([&] { *out = legendre::harmonic_dim(k, d); });
}

mf_status mf_relu_coefficient(int k, int d, double* out) {
  MF_REQUIRE(out);
  return guard([&] { *out = legendre::relu_coefficient(k, d); });
}

mf_status mf_model_create(int d, const double sigma_hat[5], const double h_hat[5], mf_model** out) {
  MF_REQUIRE(sigma_hat && h_hat && out);
  return guard([&] { *out = new mf_model{ModelSpec(d, coeffs_from(sigma_hat), coeffs_from(h_hat))}; });
}

mf_status mf_model_from_gammas(int d, double sigma2, double sigma4, double gamma2, double gamma4,
                               mf_model** out) {
  MF_REQUIRE(out);
  return guard([&] { *out = new mf_model{ModelSpec::from_gammas(d, sigma2, sigma4, gamma2, gamma4)}; });
}

void mf_model_destroy(mf_model* model) { delete model; }

mf_status mf_model_gammas(const mf_model* model, double* gamma2, double* gamma4) {
  MF_REQUIRE(model && gamma2 && gamma4);
  *gamma2 = model->spec.gamma2();
  *gamma4 = model->spec.gamma4();
  return MF_OK;
}

mf_status mf_model_validate(const mf_model* model, double c1, double c2, int* all_passed,
                            int* clause_passed, size_t n_clauses, size_t* count) {
  MF_REQUIRE(model && all_passed);
  MF_REQUIRE(clause_passed || n_clauses == 0);
  return guard([&] {
    const auto rep = validate_assumptions(model->spec, {c1, c2});
    *all_passed = rep.all_passed() ? 1 : 0;
    for (size_t i = 0; i < n_clauses && i < rep.clauses.size(); ++i) {
      clause_passed[i] = rep.clauses[i].passed ? 1 : 0;
    }
    if (count) *count = rep.clauses.size();
  });
}

mf_status mf_expressivity_check(double gamma2, double gamma4, double tol, mf_expressivity* out) {
  MF_REQUIRE(out);
  switch (expressivity_check(gamma2, gamma4, tol)) {
    case Expressivity::Strict: *out = MF_EXPRESSIVITY_STRICT; break;
    case Expressivity::Boundary: *out = MF_EXPRESSIVITY_BOUNDARY; break;
    case Expressivity::Violates: *out = MF_EXPRESSIVITY_VIOLATES; break;
  }
  return MF_OK;
}

mf_status mf_target_moments(const mf_model* model, double* beta2, double* beta4) {
  MF_REQUIRE(model && beta2 && beta4);
  const auto t = target_moments(model->spec);
  *beta2 = t.beta2;
  *beta4 = t.beta4;
  return MF_OK;
}

mf_status mf_fitting_measure(double beta2, double beta4, double* w, double* p, size_t* n_atoms) {
  MF_REQUIRE(w && p && n_atoms);
  return guard([&] {
    const auto mu = construct_fitting_measure(beta2, beta4);
    *n_atoms = mu.atoms.size();
    for (size_t i = 0; i < mu.atoms.size(); ++i) {
      w[i] = mu.atoms[i].w;
      p[i] = mu.atoms[i].p;
    }
  });
}

mf_status mf_ensemble_create(int d, int particles, int sampled, uint64_t seed, mf_ensemble** out) {
  MF_REQUIRE(out);
  return guard([&] {
    const auto mode = sampled ? popdyn::InitMode::Sampled : popdyn::InitMode::Quadrature;
    *out = new mf_ensemble{popdyn::init_ensemble(d, particles, mode, seed)};
  });
}

void mf_ensemble_destroy(mf_ensemble* e) { delete e; }

mf_status mf_ensemble_size(const mf_ensemble* e, size_t* out) {
  MF_REQUIRE(e && out);
  *out = e->e.size();
  return MF_OK;
}

mf_status mf_ensemble_get(const mf_ensemble* e, double* w, double* mass, size_t n) {
  MF_REQUIRE(e && n >= e->e.size());
  for (size_t i = 0; i < e->e.size(); ++i) {
    if (w) w[i] = e->e.w[i];
    if (mass) mass[i] = e->e.mass[i];
  }
  return MF_OK;
}

mf_status mf_ensemble_D(const mf_ensemble* e, const mf_model* model, double* D2, double* D4) {
  MF_REQUIRE(e && model && D2 && D4);
  return guard([&] {
    const auto D = popdyn::compute_D(e->e, model->spec);
    *D2 = D.D2;
    *D4 = D.D4;
  });
}

mf_status mf_ensemble_loss(const mf_ensemble* e, const mf_model* model, double* out) {
  MF_REQUIRE(e && model && out);
  return guard([&] { *out = popdyn::loss_1d(e->e, model->spec); });
}

mf_status mf_ensemble_step(mf_ensemble* e, const mf_model* model, double dt, int* accepted) {
  MF_REQUIRE(e && model && accepted);
  return guard([&] {
    auto r = popdyn::step(e->e, model->spec, dt);
    *accepted = r.accepted ? 1 : 0;
    if (r.accepted) e->e = std::move(r.next);
  });
}

mf_status mf_run_flow(mf_ensemble* e, const mf_model* model, double eps, double t_max,
                      mf_flow_summary* out) {
  MF_REQUIRE(e && model && out);
  return guard([&] {
    popdyn::FlowOptions opt;
    opt.eps = eps;
    opt.t_max = t_max;
    auto r = popdyn::run_flow(e->e, model->spec, opt);
    out->T1 = or_nan(r.report.T1);
    out->T2 = or_nan(r.report.T2);
    out->T_star = or_nan(r.report.T_star);
    out->T2_case = static_cast<int>(r.report.T2_case);
    out->converged = r.converged ? 1 : 0;
    out->phase1_empty = r.report.phase1_empty ? 1 : 0;
    out->final_loss = r.log.empty() ? std::nan("") : r.log.back().loss;
    out->accepted_steps = r.accepted_steps;
    auto& tr = r.final_state.tracers;
    tr.erase(tr.begin(), tr.begin() + 3);
    e->e = std::move(r.final_state);
  });
}

mf_status mf_network_create(int d, int m, uint64_t seed, mf_network** out) {
  MF_REQUIRE(out);
  return guard([&] {
    auto rng = substream(seed, "network", "init");
    *out = new mf_network{nn::init_network(d, m, rng)};
  });
}

mf_status mf_network_from_weights(int d, int m, const double* U, mf_network** out) {
  MF_REQUIRE(U && out && d > 0 && m > 0);
  return guard([&] {
    nn::Matrix W = Eigen::Map<const nn::Matrix>(U, m, d);
    *out = new mf_network{nn::NetworkState::from_weights(std::move(W))};
  });
}

void mf_network_destroy(mf_network* net) { delete net; }

mf_status mf_network_weights(const mf_network* net, double* U, size_t len) {
  MF_REQUIRE(net && U && len >= static_cast<size_t>(net->s.U.size()));
  std::memcpy(U, net->s.U.data(), sizeof(double) * static_cast<size_t>(net->s.U.size()));
  return MF_OK;
}

mf_status mf_dataset_create(const mf_model* model, int n, uint64_t seed, mf_dataset** out) {
  MF_REQUIRE(model && out);
  return guard([&] {
    auto rng = substream(seed, "dataset", "data");
    *out = new mf_dataset{nn::make_dataset(model->spec, n, rng, seed)};
  });
}

void mf_dataset_destroy(mf_dataset* data) { delete data; }

mf_status mf_network_forward(const mf_network* net, const mf_model* model, const double* x,
                             double* out) {
  MF_REQUIRE(net && model && x && out);
  return guard([&] {
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(x, net->s.dim());
    *out = nn::forward(net->s, model->spec, v);
  });
}

mf_status mf_network_exact_loss(const mf_network* net, const mf_model* model, double* out) {
  MF_REQUIRE(net && model && out);
  return guard([&] { *out = nn::exact_population_loss(net->s, model->spec); });
}

mf_status mf_network_empirical_loss(const mf_network* net, const mf_model* model,
                                    const mf_dataset* data, double* out) {
  MF_REQUIRE(net && model && data && out);
  return guard([&] { *out = nn::empirical_loss(net->s, model->spec, data->data); });
}

mf_status mf_network_gd_step(mf_network* net, const mf_model* model, const mf_dataset* data,
                             double eta) {
  MF_REQUIRE(net && model && data);
  return guard([&] { nn::gd_step(net->s, model->spec, data->data, eta); });
}

mf_status mf_network_flow_step(mf_network* net, const mf_model* model, const mf_dataset* data,
                               double dt, int* accepted) {
  MF_REQUIRE(net && model && accepted);
  return guard([&] {
    const auto kind = data ? nn::GradientKind::Empirical : nn::GradientKind::Population;
    const auto r = nn::flow_step(net->s, model->spec, kind, dt, data ? &data->data : nullptr);
    *accepted = r.accepted ? 1 : 0;
  });
}

mf_status mf_kernel_fit_loss(const mf_model* model, const mf_dataset* data, const double c[5],
                             double ridge, double* loss) {
  MF_REQUIRE(model && data && c && loss);
  return guard([&] {
    const kernel::KernelSpec ks{coeffs_from(c), ridge};
    const auto f = kernel::fit(data->data, ks);
    *loss = kernel::exact_kernel_population_loss(f, data->data, ks, model->spec);
  });
}

mf_status mf_config_load(const char* path, mf_config** out) {
  MF_REQUIRE(path && out);
  return guard([&] { *out = new mf_config{config::parse_config_file(path)}; });
}

mf_status mf_config_parse(const char* text, mf_config** out) {
  MF_REQUIRE(text && out);
  return guard([&] { *out = new mf_config{config::parse_config_string(text)}; });
}

void mf_config_destroy(mf_config* cfg) { delete cfg; }

mf_status mf_config_set(mf_config* cfg, const char* key, const char* value) {
  MF_REQUIRE(cfg && key && value);
  return guard([&] { config::set_key(cfg->cfg, key, value); });
}

mf_status mf_config_hash(const mf_config* cfg, char* buf, size_t len) {
  MF_REQUIRE(cfg && buf && len >= 17);
  std::snprintf(buf, len, "%016llx", static_cast<unsigned long long>(config::config_hash(cfg->cfg)));
  return MF_OK;
}

mf_status mf_run(const mf_config* cfg, mf_manifest** out) {
  MF_REQUIRE(cfg && out);
  return guard([&] {
    auto* m = new mf_manifest{lab::run(cfg->cfg), {}};
    m->json = lab::manifest_json(m->m);
    *out = m;
  });
}

void mf_manifest_destroy(mf_manifest* m) { delete m; }

const char* mf_manifest_json(const mf_manifest* m) { return m ? m->json.c_str() : ""; }

size_t mf_manifest_file_count(const mf_manifest* m) { return m ? m->m.files.size() : 0; }

const char* mf_manifest_file(const mf_manifest* m, size_t i) {
  if (!m || i >= m->m.files.size()) return nullptr;
  return m->m.files[i].path.c_str();
}

}  // extern "C"
