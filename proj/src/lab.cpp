#include "meanfield/lab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "meanfield/csv.hpp"
#include "meanfield/error.hpp"
#include "meanfield/rng.hpp"

#ifndef MEANFIELD_VERSION
#define MEANFIELD_VERSION "0.0.0"
#endif

namespace meanfield::lab {
namespace {

namespace fs = std::filesystem;
using config::ExperimentConfig;

std::string hex16(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string dat_mirror(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line, out;
  bool first = true;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    out += (first ? "# " : "") + line + "\n";
    first = false;
  }
  return out;
}

class Writer {
 public:
  Writer(const ExperimentConfig& cfg) : dir_(cfg.out_dir), dat_(cfg.dat) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
  }

  std::vector<OutputFile> put(const std::string& name, const std::string& text,
                              const std::string& seed, const std::string& kind) const {
    std::vector<OutputFile> files{{name, seed, kind}};
    write(name, text);
    if (dat_ && name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
      const std::string dat = name.substr(0, name.size() - 4) + ".dat";
      write(dat, dat_mirror(text));
      files.push_back({dat, seed, kind + "_dat"});
    }
    return files;
  }

  const fs::path& dir() const { return dir_; }

 private:
  void write(const std::string& name, const std::string& text) const {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw IoError("cannot write '" + (dir_ / name).string() + "'");
    f << text;
    if (!f) throw IoError("write failed for '" + (dir_ / name).string() + "'");
  }

  fs::path dir_;
  bool dat_;
};

struct SeedOutput {
  std::vector<OutputFile> files;
  std::vector<std::string> flags;
};

// Runs one job per seed on cfg.threads workers; results keep seed order.
std::vector<SeedOutput> per_seed(const ExperimentConfig& cfg,
                                 const std::function<SeedOutput(std::uint64_t)>& job) {
  const std::size_t n = cfg.seeds.size();
  std::vector<SeedOutput> out(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = job(cfg.seeds[i]);
      } catch (const std::exception& e) {
        errors[i] = "seed " + std::to_string(cfg.seeds[i]) + ": " + e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(cfg.threads, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw NumericalError(e);
  }
  return out;
}

std::string opt_num(const std::optional<double>& x) { return x ? csv::num(*x) : std::string("none"); }

SeedOutput run_validate(const ExperimentConfig& cfg, const Writer& w) {
  const ModelSpec spec = cfg.model_spec();
  const AssumptionReport rep = validate_assumptions(spec, cfg.constants());
  std::ostringstream s;
  s << "clause,passed,detail\n";
  for (const auto& c : rep.clauses) s << c.name << ',' << (c.passed ? "true" : "false") << ",\"" << c.detail << "\"\n";
  const Expressivity e = expressivity_check(spec.gamma2(), spec.gamma4());
  s << "expressivity," << (e != Expressivity::Violates ? "true" : "false") << ",\"" << to_string(e) << "\"\n";
  SeedOutput out;
  out.files = w.put("assumptions.csv", s.str(), "all", "assumptions");
  if (!rep.all_passed()) out.flags.push_back("assumption_clause_failed");
  return out;
}

SeedOutput run_popdyn(const ExperimentConfig& cfg, const Writer& w, std::uint64_t seed) {
  const ModelSpec spec = cfg.model_spec();
  popdyn::Ensemble1D e = popdyn::init_ensemble(cfg.d, cfg.particles, cfg.init, seed);
  popdyn::FlowOptions opt;
  opt.eps = cfg.eps;
  opt.t_max = cfg.t_max;
  opt.log_interval = cfg.log_interval;
  const popdyn::FlowResult r = popdyn::run_flow(std::move(e), spec, opt);

  const std::string tag = std::to_string(seed);
  std::ostringstream traj;
  popdyn::write_trajectory_csv(traj, r.log);
  const auto& p = r.report;
  std::ostringstream ph;
  ph << "key,value\n"
     << "T1," << opt_num(p.T1) << "\nT2," << opt_num(p.T2) << "\nT2_case," << popdyn::to_string(p.T2_case)
     << "\nT_star_eps," << opt_num(p.T_star) << "\nconverged," << (r.converged ? "true" : "false")
     << "\nphase1_empty," << (p.phase1_empty ? "true" : "false") << "\nasymptotic_regime,"
     << (p.params.asymptotic ? "true" : "false") << "\nw_max," << csv::num(p.params.w_max)
     << "\niota_U," << csv::num(p.params.iota_U) << "\niota_L," << csv::num(p.params.iota_L)
     << "\niota_R," << csv::num(p.params.iota_R) << "\nkappa," << csv::num(p.params.kappa)
     << "\nxi," << csv::num(p.params.xi) << "\nw_T1_L," << opt_num(p.w_T1_L) << "\nw_T1_R,"
     << opt_num(p.w_T1_R) << "\nloss_threshold," << csv::num(r.loss_threshold) << "\naccepted_steps,"
     << r.accepted_steps << "\nrejected_steps," << r.rejected_steps << "\n";

  SeedOutput out;
  out.files = w.put("popdyn_seed" + tag + ".csv", traj.str(), tag, "trajectory");
  auto more = w.put("phase_seed" + tag + ".csv", ph.str(), tag, "phase_report");
  out.files.insert(out.files.end(), more.begin(), more.end());
  if (!r.converged) out.flags.push_back("did_not_converge:seed=" + tag);
  return out;
}

SeedOutput run_train(const ExperimentConfig& cfg, const Writer& w, std::uint64_t seed) {
  const ModelSpec spec = cfg.model_spec();
  auto init_rng = substream(seed, "train", "init");
  auto data_rng = substream(seed, "train", "data");
  nn::NetworkState s = nn::init_network(cfg.d, cfg.width, init_rng);
  const nn::Dataset data = nn::make_dataset(spec, cfg.samples, data_rng, seed);

  std::ostringstream log;
  csv::header(log, {"t", "empirical_loss", "population_loss"});
  auto row = [&]() { csv::row(log, {s.t, nn::empirical_loss(s, spec, data), nn::exact_population_loss(s, spec)}); };
  row();
  for (int it = 1; it <= cfg.steps; ++it) {
    if (cfg.method == config::TrainMethod::Gd) {
      nn::gd_step(s, spec, data, cfg.eta, cfg.gradient);
    } else {
      const double t_target = s.t + cfg.dt;
      std::function<void(double, int)> adv = [&](double h, int depth) {
        if (depth > 30) throw NumericalError("flow step size underflow");
        if (nn::flow_step(s, spec, cfg.gradient, h, &data).accepted) return;
        adv(0.5 * h, depth + 1);
        adv(0.5 * h, depth + 1);
      };
      adv(cfg.dt, 0);
      s.t = t_target;
    }
    if (it % cfg.log_interval == 0 || it == cfg.steps) row();
  }
  std::ostringstream ck;
  nn::write_checkpoint(ck, s);
  const std::string tag = std::to_string(seed);
  SeedOutput out;
  out.files = w.put("train_seed" + tag + ".csv", log.str(), tag, "training_log");
  auto more = w.put("network_seed" + tag + ".txt", ck.str(), tag, "checkpoint");
  out.files.insert(out.files.end(), more.begin(), more.end());
  return out;
}

SeedOutput run_couple(const ExperimentConfig& cfg, const Writer& w, std::uint64_t seed) {
  const ModelSpec spec = cfg.model_spec();
  nn::CouplingOptions opt;
  opt.dt = cfg.dt;
  opt.horizon = cfg.horizon;
  opt.log_interval = cfg.log_interval;
  opt.kind = cfg.gradient;
  opt.quadrature_nodes = cfg.particles;
  const nn::CouplingLog log = nn::coupling_run(seed, cfg.d, cfg.width, cfg.samples, spec, opt);
  std::ostringstream s;
  nn::write_coupling_csv(s, log.rows);
  const std::string tag = std::to_string(seed);
  SeedOutput out;
  out.files = w.put("coupling_seed" + tag + ".csv", s.str(), tag, "coupling_log");
  return out;
}

SeedOutput run_kernel(const ExperimentConfig& cfg, const Writer& w, std::uint64_t seed) {
  const ModelSpec spec = cfg.model_spec();
  const kernel::KernelSpec ks = cfg.kernel_spec();
  auto rng = substream(seed, "kernel", "data");
  const nn::Dataset data = nn::make_dataset(spec, cfg.samples, rng, seed);
  const auto t0 = std::chrono::steady_clock::now();
  const kernel::KernelFit f = kernel::fit(data, ks);
  const double loss = kernel::exact_kernel_population_loss(f, data, ks, spec);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream s;
  csv::header(s, {"d", "n", "seed", "method", "population_loss", "wall_time_s"});
  s << cfg.d << ',' << cfg.samples << ',' << seed << ',' << (ks.ridge == 0.0 ? "kernel_minnorm" : "kernel_ridge")
    << ',' << csv::num(loss) << ',' << csv::num(cfg.record_wall_time ? wall : 0.0) << '\n';
  const std::string tag = std::to_string(seed);
  SeedOutput out;
  out.files = w.put("kernel_seed" + tag + ".csv", s.str(), tag, "kernel_fit");
  return out;
}

SeedOutput run_separation(const ExperimentConfig& cfg, const Writer& w) {
  const kernel::SeparationTable t =
      kernel::separation_experiment(cfg.model_spec(), cfg.kernel_spec(), cfg.separation_options());
  std::ostringstream s;
  kernel::write_separation_csv(s, t);
  SeedOutput out;
  out.files = w.put("separation.csv", s.str(), "all", "separation_table");
  if (t.partial) out.flags.push_back("partial");
  out.flags.push_back(t.separated() ? "separated" : "not_separated");
  return out;
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  std::ofstream f(dir / "manifest.json", std::ios::binary);
  if (f) f << manifest_json(m);
}

}  // namespace

const char* version() { return MEANFIELD_VERSION; }

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["experiment"] = m.experiment;
  j["config_hash"] = m.config_hash;
  j["tool_version"] = m.tool_version;
  j["wall_time_s"] = m.wall_time_s;
  j["status"] = m.status;
  if (!m.error.empty()) j["error"] = m.error;
  j["flags"] = m.flags;
  auto files = nlohmann::ordered_json::array();
  for (const auto& f : m.files) files.push_back({{"path", f.path}, {"seed", f.seed}, {"kind", f.kind}});
  j["files"] = files;
  return j.dump(2) + "\n";
}

RunManifest run(const ExperimentConfig& cfg) {
  config::validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.experiment = config::to_string(*cfg.experiment);
  m.config_hash = hex16(config::config_hash(cfg));
  m.tool_version = version();
  m.out_dir = cfg.out_dir;
  const Writer w(cfg);

  auto collect = [&](std::vector<SeedOutput> outs) {
    for (auto& o : outs) {
      m.files.insert(m.files.end(), o.files.begin(), o.files.end());
      m.flags.insert(m.flags.end(), o.flags.begin(), o.flags.end());
    }
  };
  try {
    collect({SeedOutput{w.put("config.resolved", config::canonical(cfg), "all", "config"), {}}});
    switch (*cfg.experiment) {
      case config::Experiment::Validate: collect({run_validate(cfg, w)}); break;
      case config::Experiment::Separation: collect({run_separation(cfg, w)}); break;
      case config::Experiment::Popdyn:
        collect(per_seed(cfg, [&](std::uint64_t s) { return run_popdyn(cfg, w, s); }));
        break;
      case config::Experiment::Train:
        collect(per_seed(cfg, [&](std::uint64_t s) { return run_train(cfg, w, s); }));
        break;
      case config::Experiment::Couple:
        collect(per_seed(cfg, [&](std::uint64_t s) { return run_couple(cfg, w, s); }));
        break;
      case config::Experiment::Kernel:
        collect(per_seed(cfg, [&](std::uint64_t s) { return run_kernel(cfg, w, s); }));
        break;
    }
  } catch (const std::exception& e) {
    m.status = "error";
    m.error = e.what();
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(w.dir(), m);
    throw;
  }
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(w.dir(), m);
  return m;
}

}  // namespace meanfield::lab
