#include "meanfield/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "meanfield/csv.hpp"
#include "meanfield/error.hpp"
#include "meanfield/rng.hpp"

namespace meanfield::config {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void bad(std::string_view key, std::string_view what, std::string_view value) {
  throw ConfigError("key '" + std::string(key) + "': expected " + std::string(what) + ", got '" +
                    std::string(value) + "'");
}

long long to_int(std::string_view key, std::string_view v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) bad(key, "an integer", v);
  return out;
}

int to_i32(std::string_view key, std::string_view v) {
  const long long x = to_int(key, v);
  if (x < -2147483647LL || x > 2147483647LL) bad(key, "a 32-bit integer", v);
  return static_cast<int>(x);
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(x)) bad(key, "a finite number", v);
  return x;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, "a boolean", v);
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string num(double x) { return csv::num(x); }

struct Key {
  const char* name;
  const char* section;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

const std::vector<Key>& registry() {
  using C = ExperimentConfig;
  using SV = std::string_view;
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    auto int_key = [&](const char* name, const char* sec, int C::*field) {
      k.push_back({name, sec, [=](C& c, SV v) { c.*field = to_i32(name, v); },
                   [=](const C& c) { return std::to_string(c.*field); }});
    };
    auto dbl_key = [&](const char* name, const char* sec, double C::*field) {
      k.push_back({name, sec, [=](C& c, SV v) { c.*field = to_double(name, v); },
                   [=](const C& c) { return num(c.*field); }});
    };
    auto bool_key = [&](const char* name, const char* sec, bool C::*field) {
      k.push_back({name, sec, [=](C& c, SV v) { c.*field = to_bool(name, v); },
                   [=](const C& c) { return std::string(c.*field ? "true" : "false"); }});
    };
    auto opt_key = [&](const char* name, const char* sec, std::optional<double> C::*field) {
      k.push_back({name, sec, [=](C& c, SV v) { c.*field = to_double(name, v); },
                   [=](const C& c) { return (c.*field) ? num(*(c.*field)) : std::string("unset"); }});
    };
    auto coeff_key = [&](const char* name, const char* sec, Coeffs C::*field, int idx) {
      k.push_back({name, sec, [=](C& c, SV v) { (c.*field)[idx] = to_double(name, v); },
                   [=](const C& c) { return num((c.*field)[idx]); }});
    };

    k.push_back({"experiment", "experiment",
                 [](C& c, SV v) {
                   auto e = experiment_from_string(v);
                   if (!e) bad("experiment", "validate|popdyn|train|couple|kernel|separation", v);
                   c.experiment = *e;
                 },
                 [](const C& c) {
                   return c.experiment ? std::string(to_string(*c.experiment)) : std::string("unset");
                 }});

    int_key("d", "model", &C::d);
    const char* sig[] = {"sigma0", "sigma1", "sigma2", "sigma3", "sigma4"};
    for (int i = 0; i < kCoeffs; ++i) coeff_key(sig[i], "model", &C::sigma, i);
    dbl_key("gamma2", "model", &C::gamma2);
    dbl_key("gamma4", "model", &C::gamma4);
    dbl_key("h0", "model", &C::h0);
    dbl_key("h1", "model", &C::h1);
    opt_key("h2", "model", &C::h2);
    dbl_key("h3", "model", &C::h3);
    opt_key("h4", "model", &C::h4);
    dbl_key("c1", "model", &C::c1);
    dbl_key("c2", "model", &C::c2);

    int_key("particles", "numeric", &C::particles);
    k.push_back({"init", "numeric",
                 [](C& c, SV v) {
                   if (v == "quadrature") c.init = popdyn::InitMode::Quadrature;
                   else if (v == "sampled") c.init = popdyn::InitMode::Sampled;
                   else bad("init", "quadrature|sampled", v);
                 },
                 [](const C& c) {
                   return std::string(c.init == popdyn::InitMode::Quadrature ? "quadrature" : "sampled");
                 }});
    int_key("width", "numeric", &C::width);
    int_key("samples", "numeric", &C::samples);
    dbl_key("eta", "numeric", &C::eta);
    dbl_key("dt", "numeric", &C::dt);
    dbl_key("t_max", "numeric", &C::t_max);
    dbl_key("eps", "numeric", &C::eps);
    k.push_back({"seeds", "numeric",
                 [](C& c, SV v) {
                   c.seeds.clear();
                   for (const auto& s : split_list(v)) {
                     const long long x = to_int("seeds", s);
                     if (x < 0) bad("seeds", "non-negative integers", v);
                     c.seeds.push_back(static_cast<std::uint64_t>(x));
                   }
                 },
                 [](const C& c) { return join(c.seeds); }});
    int_key("steps", "numeric", &C::steps);
    dbl_key("horizon", "numeric", &C::horizon);
    k.push_back({"gradient", "numeric",
                 [](C& c, SV v) {
                   if (v == "empirical") c.gradient = nn::GradientKind::Empirical;
                   else if (v == "population") c.gradient = nn::GradientKind::Population;
                   else bad("gradient", "empirical|population", v);
                 },
                 [](const C& c) {
                   return std::string(c.gradient == nn::GradientKind::Empirical ? "empirical" : "population");
                 }});
    k.push_back({"method", "numeric",
                 [](C& c, SV v) {
                   if (v == "gd") c.method = TrainMethod::Gd;
                   else if (v == "flow") c.method = TrainMethod::Flow;
                   else bad("method", "gd|flow", v);
                 },
                 [](const C& c) { return std::string(c.method == TrainMethod::Gd ? "gd" : "flow"); }});
    const char* kc[] = {"kernel_c0", "kernel_c1", "kernel_c2", "kernel_c3", "kernel_c4"};
    for (int i = 0; i < kCoeffs; ++i) coeff_key(kc[i], "numeric", &C::kernel_c, i);
    dbl_key("ridge", "numeric", &C::ridge);
    k.push_back({"n_grid", "numeric",
                 [](C& c, SV v) {
                   c.n_grid.clear();
                   for (const auto& s : split_list(v)) c.n_grid.push_back(to_i32("n_grid", s));
                 },
                 [](const C& c) { return join(c.n_grid); }});
    int_key("sep_width", "numeric", &C::sep_width);
    dbl_key("sep_eta", "numeric", &C::sep_eta);
    int_key("sep_steps", "numeric", &C::sep_steps);
    bool_key("minnorm", "numeric", &C::minnorm);
    int_key("minnorm_max_n", "numeric", &C::minnorm_max_n);
    dbl_key("max_wall_seconds", "numeric", &C::max_wall_seconds);
    int_key("threads", "numeric", &C::threads);

    k.push_back({"dir", "output", [](C& c, SV v) { c.out_dir = std::string(v); },
                 [](const C& c) { return c.out_dir; }});
    int_key("log_interval", "output", &C::log_interval);
    bool_key("dat", "output", &C::dat);
    bool_key("record_wall_time", "output", &C::record_wall_time);
    return k;
  }();
  return keys;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : registry()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

}  // namespace

const char* to_string(Experiment e) {
  switch (e) {
    case Experiment::Validate: return "validate";
    case Experiment::Popdyn: return "popdyn";
    case Experiment::Train: return "train";
    case Experiment::Couple: return "couple";
    case Experiment::Kernel: return "kernel";
    case Experiment::Separation: return "separation";
  }
  return "unknown";
}

std::optional<Experiment> experiment_from_string(std::string_view s) {
  for (auto e : {Experiment::Validate, Experiment::Popdyn, Experiment::Train, Experiment::Couple,
                 Experiment::Kernel, Experiment::Separation}) {
    if (s == to_string(e)) return e;
  }
  return std::nullopt;
}

ModelSpec ExperimentConfig::model_spec() const {
  Coeffs h{h0, h1, h2 ? *h2 : gamma2 * sigma[2], h3, h4 ? *h4 : gamma4 * sigma[4]};
  return ModelSpec(d, sigma, h);
}

kernel::KernelSpec ExperimentConfig::kernel_spec() const { return {kernel_c, ridge}; }

kernel::SeparationOptions ExperimentConfig::separation_options() const {
  kernel::SeparationOptions o;
  o.n_grid = n_grid;
  o.seeds = seeds;
  o.width = sep_width;
  o.eta = sep_eta;
  o.steps = sep_steps;
  o.include_minnorm = minnorm;
  o.minnorm_max_n = minnorm_max_n;
  o.threads = threads;
  o.max_wall_seconds = max_wall_seconds;
  o.record_wall_time = record_wall_time;
  return o;
}

void set_key(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const Key* k = find_key(key);
  if (k == nullptr) throw ConfigError("unknown key '" + std::string(key) + "'");
  k->set(cfg, trim(value));
}

ExperimentConfig parse_config_string(std::string_view text, std::string_view origin) {
  ExperimentConfig cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  auto where = [&]() { return std::string(origin) + ":" + std::to_string(lineno) + ": "; };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "experiment" && section != "model" && section != "numeric" && section != "output") {
        throw ConfigError(where() + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Key* k = find_key(key);
    if (k == nullptr) throw ConfigError(where() + "unknown key '" + key + "'");
    if (!section.empty() && section != k->section) {
      throw ConfigError(where() + "key '" + key + "' belongs in [" + k->section + "], not [" +
                        section + "]");
    }
    try {
      k->set(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  try {
    validate_values(cfg);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(origin) + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_string(ss.str(), path);
}

void validate_values(const ExperimentConfig& c) {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(c.d >= 3 && c.d <= 10000, "key 'd': must lie in [3, 10000]");
  need(c.init == popdyn::InitMode::Sampled ? c.particles >= 16 : c.particles >= 24,
       "key 'particles': need >= 24 (quadrature) or >= 16 (sampled)");
  need(c.width >= 1 && c.width <= nn::kMaxWidth, "key 'width': must lie in [1, 4096]");
  need(c.samples >= 1, "key 'samples': must be positive");
  need(c.eta > 0.0, "key 'eta': must be positive");
  need(c.dt > 0.0, "key 'dt': must be positive");
  need(c.t_max > 0.0, "key 't_max': must be positive");
  need(c.eps > 0.0 && c.eps < 1.0, "key 'eps': must lie in (0, 1)");
  need(!c.seeds.empty(), "key 'seeds': must be non-empty");
  need(c.steps >= 1, "key 'steps': must be positive");
  need(c.horizon > 0.0, "key 'horizon': must be positive");
  need(!c.n_grid.empty(), "key 'n_grid': must be non-empty");
  for (int n : c.n_grid) need(n >= 1 && n <= kernel::kMaxSamples, "key 'n_grid': values must lie in [1, 20000]");
  need(c.sep_width >= 1 && c.sep_width <= nn::kMaxWidth, "key 'sep_width': must lie in [1, 4096]");
  need(c.sep_eta > 0.0, "key 'sep_eta': must be positive");
  need(c.sep_steps >= 1, "key 'sep_steps': must be positive");
  need(c.minnorm_max_n >= 1, "key 'minnorm_max_n': must be positive");
  need(c.max_wall_seconds >= 0.0, "key 'max_wall_seconds': must be >= 0");
  need(c.threads >= 1, "key 'threads': must be positive");
  need(c.log_interval >= 1, "key 'log_interval': must be positive");
  need(c.c1 > 0.0 && c.c2 > 0.0, "keys 'c1', 'c2': must be positive");
  need(!c.out_dir.empty(), "key 'dir': must be non-empty");
  (void)c.model_spec();
  c.kernel_spec().validate();
}

void validate(const ExperimentConfig& c) {
  if (!c.experiment) throw ConfigError("missing required key 'experiment'");
  validate_values(c);
}

std::string canonical(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : registry()) out += std::string(k.name) + "=" + k.get(cfg) + "\n";
  return out;
}

std::uint64_t config_hash(const ExperimentConfig& cfg) { return fnv1a64(canonical(cfg)); }

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.emplace_back(k.name);
  return out;
}

}  // namespace meanfield::config
