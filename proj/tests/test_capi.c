/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "meanfield/meanfield.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

#define OK(call) EXPECT((call) == MF_OK)

static void test_legendre(void) {
  double v = 0.0;
  uint64_t n = 0;
  OK(mf_legendre_eval(4, 10, 0.0, &v));
  EXPECT(fabs(v - 3.0 / 99.0) < 1e-15);
  OK(mf_legendre_normalized(2, 5, 1.0, &v));
  EXPECT(fabs(v - sqrt(14.0)) < 1e-13);
  OK(mf_harmonic_dim(4, 30, &n));
  EXPECT(n == 40455u);
  EXPECT(mf_legendre_eval(2, 10, 1.5, &v) == MF_ERR_DOMAIN);
  EXPECT(strlen(mf_last_error()) > 0);
  EXPECT(mf_legendre_eval(2, 10, 0.5, NULL) == MF_ERR_INVALID_ARGUMENT);
  OK(mf_relu_coefficient(2, 100, &v));
  EXPECT(v > 0.0);
}

static void test_model(void) {
  mf_model* m = NULL;
  double g2 = 0, g4 = 0, b2 = 0, b4 = 0, w[2], p[2];
  int all = 0, passed[8];
  size_t count = 0, atoms = 0;
  mf_expressivity ex;
  const double sigma[5] = {0, 0, 1, 0, 0};
  const double h[5] = {0, 0, 0.05, 0, 0};

  EXPECT(mf_model_create(30, sigma, h, &m) == MF_ERR_CONFIG);
  EXPECT(m == NULL);
  OK(mf_model_from_gammas(100, 1.0, 1.0, 0.05, 0.005, &m));
  OK(mf_model_gammas(m, &g2, &g4));
  EXPECT(fabs(g2 - 0.05) < 1e-15 && fabs(g4 - 0.005) < 1e-15);
  OK(mf_model_validate(m, 4.0, 0.1, &all, passed, 8, &count));
  EXPECT(all == 1);
  EXPECT(count == 6);
  OK(mf_expressivity_check(0.05, 0.2, 1e-9, &ex));
  EXPECT(ex == MF_EXPRESSIVITY_VIOLATES);
  OK(mf_target_moments(m, &b2, &b4));
  EXPECT(fabs(b2 - 0.0595) < 1e-14);
  OK(mf_fitting_measure(0.1, 0.02, w, p, &atoms));
  EXPECT(atoms == 2);
  EXPECT(mf_fitting_measure(0.1, 0.5, w, p, &atoms) == MF_ERR_DOMAIN);
  mf_model_destroy(m);
  mf_model_destroy(NULL);
}

static void test_ensemble(void) {
  mf_model* m = NULL;
  mf_ensemble* e = NULL;
  size_t n = 0;
  double D2 = 0, D4 = 0, loss = 0;
  int accepted = 0;
  mf_flow_summary s;
  double* w;
  double* mass;

  OK(mf_model_from_gammas(30, 1.0, 1.0, 0.05, 0.005, &m));
  OK(mf_ensemble_create(30, 128, 0, 0, &e));
  OK(mf_ensemble_size(e, &n));
  EXPECT(n == 128);
  OK(mf_ensemble_D(e, m, &D2, &D4));
  EXPECT(fabs(D2 + 0.05) < 1e-12);
  OK(mf_ensemble_loss(e, m, &loss));
  EXPECT(loss > 0.0);
  OK(mf_ensemble_step(e, m, 0.01, &accepted));
  EXPECT(accepted == 1);
  OK(mf_run_flow(e, m, 0.01, 1e4, &s));
  EXPECT(s.converged == 1);
  EXPECT(s.final_loss <= 0.5 * 2.0 * 0.01 * 0.01);
  OK(mf_ensemble_size(e, &n));
  EXPECT(n == 128);
  w = malloc(n * sizeof(double));
  mass = malloc(n * sizeof(double));
  OK(mf_ensemble_get(e, w, mass, n));
  EXPECT(fabs(w[0] + w[n - 1]) < 1e-12);
  EXPECT(mf_ensemble_get(e, w, mass, n - 1) == MF_ERR_INVALID_ARGUMENT);
  free(w);
  free(mass);
  mf_ensemble_destroy(e);
  EXPECT(mf_ensemble_create(30, 4, 0, 0, &e) == MF_ERR_CONFIG);
  mf_model_destroy(m);
}

static void test_network(void) {
  mf_model* m = NULL;
  mf_network* net = NULL;
  mf_network* copy = NULL;
  mf_dataset* data = NULL;
  double U[16 * 10], x[10] = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  double f = 0, l0 = 0, l1 = 0, le = 0, kl = 0;
  const double c[5] = {0, 0, 1, 0, 1};
  int accepted = 0;

  OK(mf_model_from_gammas(10, 1.0, 1.0, 0.05, 0.005, &m));
  OK(mf_network_create(10, 16, 7, &net));
  OK(mf_network_weights(net, U, 160));
  OK(mf_network_from_weights(10, 16, U, &copy));
  OK(mf_network_forward(net, m, x, &f));
  EXPECT(isfinite(f));
  OK(mf_network_exact_loss(net, m, &l0));
  OK(mf_dataset_create(m, 200, 3, &data));
  OK(mf_network_empirical_loss(net, m, data, &le));
  EXPECT(le > 0.0);
  OK(mf_network_flow_step(net, m, NULL, 0.05, &accepted));
  EXPECT(accepted == 1);
  OK(mf_network_exact_loss(net, m, &l1));
  EXPECT(l1 <= l0 + 1e-8);
  OK(mf_network_gd_step(copy, m, data, 1e-3));
  OK(mf_kernel_fit_loss(m, data, c, 1e-8, &kl));
  EXPECT(kl > 0.0);
  U[0] = 5.0;
  EXPECT(mf_network_from_weights(10, 16, U, &copy) == MF_ERR_CONFIG);
  mf_network_destroy(net);
  mf_network_destroy(copy);
  mf_dataset_destroy(data);
  mf_model_destroy(m);
}

static void test_config_and_run(const char* dir) {
  mf_config* cfg = NULL;
  mf_manifest* man = NULL;
  char hash[17];
  char path[1024];
  FILE* f;

  EXPECT(mf_config_parse("[model]\ngamma5 = 1\n", &cfg) == MF_ERR_CONFIG);
  EXPECT(strstr(mf_last_error(), "gamma5") != NULL);
  OK(mf_config_parse("[model]\nd = 30\ngamma2 = 0.05\ngamma4 = 0.005\n", &cfg));
  OK(mf_config_hash(cfg, hash, sizeof hash));
  EXPECT(strlen(hash) == 16);
  EXPECT(mf_run(cfg, &man) == MF_ERR_CONFIG);
  OK(mf_config_set(cfg, "experiment", "validate"));
  OK(mf_config_set(cfg, "dir", dir));
  EXPECT(mf_config_set(cfg, "eps", "1.5") == MF_OK);
  EXPECT(mf_run(cfg, &man) == MF_ERR_CONFIG);
  OK(mf_config_set(cfg, "eps", "0.05"));
  OK(mf_run(cfg, &man));
  EXPECT(strstr(mf_manifest_json(man), "\"status\": \"ok\"") != NULL);
  EXPECT(mf_manifest_file_count(man) >= 2);
  snprintf(path, sizeof path, "%s/%s", dir, mf_manifest_file(man, 1));
  f = fopen(path, "r");
  EXPECT(f != NULL);
  if (f) fclose(f);
  mf_manifest_destroy(man);
  mf_config_destroy(cfg);
  EXPECT(mf_config_load("/nonexistent/x.ini", &cfg) == MF_ERR_IO);
}

int main(int argc, char** argv) {
  EXPECT(strlen(mf_version()) > 0);
  EXPECT(strcmp(mf_status_string(MF_ERR_DOMAIN), "domain error") == 0 || strlen(mf_status_string(MF_ERR_DOMAIN)) > 0);
  test_legendre();
  test_model();
  test_ensemble();
  test_network();
  test_config_and_run(argc > 1 ? argv[1] : "capi_out");
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
