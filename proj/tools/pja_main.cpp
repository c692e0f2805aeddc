#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pja/activity.hpp"
#include "pja/mc_harness.hpp"
#include "pja/power_variation.hpp"
#include "pja/stable_math.hpp"

using nlohmann::json;
using namespace pja;

namespace {

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.15g", x);
  return buf;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    try {
      out.push_back(std::stod(s.substr(pos, next - pos)));
    } catch (const std::exception&) {
      throw DomainError("bad numeric list: " + s);
    }
    pos = next + 1;
  }
  if (out.empty()) throw DomainError("empty numeric list");
  return out;
}

std::vector<unsigned> parse_ulist(const std::string& s) {
  std::vector<unsigned> out;
  for (double v : parse_list(s)) {
    if (v < 1.0 || v != std::floor(v)) throw DomainError("bad integer list: " + s);
    out.push_back(static_cast<unsigned>(v));
  }
  return out;
}

// piecewise jump scale, "t:sigma,t:sigma"
std::vector<VolStep> parse_vol(const std::string& s) {
  std::vector<VolStep> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    const std::string seg = s.substr(pos, next - pos);
    const std::size_t colon = seg.find(':');
    if (colon == std::string::npos) throw DomainError("bad vol segment (want t:sigma): " + seg);
    try {
      out.push_back({std::stod(seg.substr(0, colon)), std::stod(seg.substr(colon + 1))});
    } catch (const std::exception&) {
      throw DomainError("bad vol segment: " + seg);
    }
    pos = next + 1;
  }
  return out;
}

json load_config(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read config: " + file);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DomainError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw DomainError("config must be a flat JSON object");
  return j;
}

// flat JSON -> option tokens; command-line flags given later win
std::vector<std::string> config_tokens(const json& j) {
  std::vector<std::string> out;
  for (const auto& [key, val] : j.items()) {
    if (key == "command") continue;
    std::string name = "--" + key;
    std::replace(name.begin(), name.end(), '_', '-');
    if (val.is_boolean()) {
      if (val.get<bool>()) out.push_back(name);
      continue;
    }
    out.push_back(name);
    if (val.is_string()) {
      out.push_back(val.get<std::string>());
    } else if (val.is_array()) {
      for (const auto& item : val) out.push_back(item.dump());
    } else {
      out.push_back(val.dump());
    }
  }
  return out;
}

void write_resolved(const json& j, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open for writing: " + file);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + file);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory: " + dir);
}

double wall_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- moments

struct MomentsArgs {
  double beta = 2.0;
  double mu_p_arg = 0.0;
  std::vector<double> mu_pq_arg, k_arg;
  double pi_arg = 1.0;
  double pstar_arg = 2.0;
  std::size_t points = 0;
  bool has_mu_p = false, has_pi = false, has_pstar = false;
};

int run_moments(const MomentsArgs& a) {
  const std::size_t n = a.points ? a.points : kQmcPointsFull;
  bool any = false;
  if (a.has_mu_p) {
    std::printf("mu_p %s\n", fmt_g(mu_p(a.mu_p_arg, a.beta)).c_str());
    any = true;
  }
  if (a.mu_pq_arg.size() == 2) {
    std::printf("mu_pq %s\n", fmt_g(mu_pq(a.mu_pq_arg[0], a.mu_pq_arg[1], a.beta, n)).c_str());
    any = true;
  }
  if (a.has_pi) {
    std::printf("pi %s\n", fmt_g(pi_const(a.pi_arg, a.beta)).c_str());
    any = true;
  }
  if (a.k_arg.size() == 2) {
    const double k = k_kernel(a.k_arg[0], a.k_arg[1], a.beta, n);
    std::printf("k %s\n", fmt_g(k).c_str());
    std::printf("sqrt_k %s\n", fmt_g(std::sqrt(k)).c_str());
    any = true;
  }
  if (a.has_pstar) {
    const PowerChoice pc = optimal_power(a.pstar_arg, n);
    std::printf("pstar %s\n", fmt_g(pc.p).c_str());
    std::printf("pstar_sqrt_k %s\n", fmt_g(std::sqrt(pc.k_value)).c_str());
    any = true;
  }
  if (!any) throw DomainError("moments: request at least one of --mu-p, --mu-pq, --pi, --k, --pstar");
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimArgs {
  std::string case_id;
  std::string model = "none";
  double sigma1_sq = 0.0, sigma2 = 0.0, drift = 0.0;
  double A = 1.0, beta = 1.5, lambda = 0.25;
  double lambda_c = 1.0, r = 1.0;
  std::string vol;
  double T = 22.0;
  unsigned M = 390;
  double delta_n = 0.0;  // overrides M when set
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "csv";
};

ModelSpec model_from(const SimArgs& a) {
  if (!a.case_id.empty()) {
    if (a.case_id.size() != 1) throw DomainError("case must be one of A, B, C, D");
    return case_model(a.case_id[0]);
  }
  ModelSpec m;
  m.sigma1_sq = a.sigma1_sq;
  m.sigma2 = a.sigma2;
  m.drift = a.drift;
  if (a.model == "stable") {
    m.jump_kind = JumpStable{a.A, a.beta};
  } else if (a.model == "tempered_stable") {
    m.jump_kind = JumpTemperedStable{a.A, a.beta, a.lambda};
  } else if (a.model == "compound_poisson") {
    m.jump_kind = JumpCompoundPoisson{a.lambda_c, a.r};
  } else if (a.model != "none") {
    throw DomainError("unknown model: " + a.model);
  }
  if (!a.vol.empty()) m.vol_path = parse_vol(a.vol);
  return m;
}

json resolved_sim(const SimArgs& a) {
  return json{{"command", "simulate"}, {"case", a.case_id},     {"model", a.model},
              {"sigma1_sq", a.sigma1_sq}, {"sigma2", a.sigma2}, {"drift", a.drift},
              {"A", a.A},              {"beta", a.beta},        {"lambda", a.lambda},
              {"lambda_c", a.lambda_c}, {"r", a.r},             {"vol", a.vol},
              {"T", a.T},              {"M", a.M},              {"delta_n", a.delta_n},
              {"seed", a.seed},        {"out", a.out},          {"format", a.format}};
}

int run_simulate(const SimArgs& a) {
  const ModelSpec model = model_from(a);
  const double dn = a.delta_n > 0.0 ? a.delta_n : 1.0 / static_cast<double>(a.M);
  const SampleGrid grid(a.T, dn);
  const PathSeries path = model.vol_path.empty() ? simulate_path(model, grid, a.seed)
                                                 : simulate_piecewise_vol(model, grid, a.seed);
  if (a.format == "csv") {
    write_csv_path(path, a.out);
  } else if (a.format == "binary") {
    write_binary_path(path, a.out);
  } else {
    throw DomainError("format must be csv or binary");
  }
  write_resolved(resolved_sim(a), a.out + ".resolved.json");
  std::printf("n %zu first %s last %s\n", path.values.size(), fmt_g(path.values.front()).c_str(),
              fmt_g(path.values.back()).c_str());
  return 0;
}

// ---------------------------------------------------------------- estimate

struct EstArgs {
  std::string in;
  double p0 = 0.1;
  double truncate = 0.0;
  bool use_truncate = false;
  double conf = 0.95;
  std::vector<double> window;  // uniform weight bounds (lo hi)
  bool csv = false;
  bool no_header = false;
  std::string out;
};

FsSpec fs_from(double p0, bool use_truncate, double alpha) {
  FsSpec fs;
  if (use_truncate) {
    fs.kind = FsSpec::Kind::truncated;
    fs.alpha = alpha;
  } else {
    fs.p0 = p0;
  }
  return fs;
}

std::string estimate_json_line(const ActivityEstimate& est) {
  json j{{"beta_fs", est.beta_fs},
         {"tau_hat", est.tau_hat},
         {"beta_ts", est.beta_ts},
         {"avar_hat", est.avar_hat},
         {"se_hat", est.se_hat},
         {"ci_lo", est.ci_lo},
         {"ci_hi", est.ci_hi},
         {"conf", est.conf},
         {"ok", est.ok},
         {"avar_ok", est.avar_ok},
         {"flags",
          json{{"fs_invalid", est.flags.fs_invalid},
               {"ts_invalid", est.flags.ts_invalid},
               {"fs_clamped", est.flags.fs_clamped},
               {"tau_clamped", est.flags.tau_clamped},
               {"avar_invalid", est.flags.avar_invalid}}}};
  return j.dump();
}

std::string estimate_csv(const ActivityEstimate& est, bool header) {
  std::string s;
  if (header)
    s += "beta_fs,tau_hat,beta_ts,avar_hat,se_hat,ci_lo,ci_hi,conf,ok,avar_ok,"
         "fs_invalid,ts_invalid,fs_clamped,tau_clamped,avar_invalid\n";
  s += fmt_g(est.beta_fs) + ',' + fmt_g(est.tau_hat) + ',' + fmt_g(est.beta_ts) + ',' +
       fmt_g(est.avar_hat) + ',' + fmt_g(est.se_hat) + ',' + fmt_g(est.ci_lo) + ',' +
       fmt_g(est.ci_hi) + ',' + fmt_g(est.conf) + ',' + std::to_string(est.ok ? 1 : 0) + ',' +
       std::to_string(est.avar_ok ? 1 : 0) + ',' + std::to_string(est.flags.fs_invalid ? 1 : 0) +
       ',' + std::to_string(est.flags.ts_invalid ? 1 : 0) + ',' +
       std::to_string(est.flags.fs_clamped ? 1 : 0) + ',' +
       std::to_string(est.flags.tau_clamped ? 1 : 0) + ',' +
       std::to_string(est.flags.avar_invalid ? 1 : 0) + '\n';
  return s;
}

int run_estimate(const EstArgs& a) {
  const PathSeries path = read_path_auto(a.in);
  const FsSpec fs = fs_from(a.p0, a.use_truncate, a.truncate);
  ActivityEstimate est;
  if (a.window.size() == 2) {
    const double lo = a.window[0], hi = a.window[1];
    est = two_step_weighted(
        path, WeightScheme::uniform([lo](double) { return lo; }, [hi](double) { return hi; }), fs,
        a.conf);
  } else {
    est = two_step_point(path, fs, a.conf);
  }
  const std::string body = a.csv ? estimate_csv(est, !a.no_header) : estimate_json_line(est) + "\n";
  std::fputs(body.c_str(), stdout);
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw IoError("cannot open for writing: " + a.out);
    f << body;
    json rj{{"command", "estimate"}, {"in", a.in},   {"p0", a.p0},
            {"conf", a.conf},        {"csv", a.csv}, {"no_header", a.no_header},
            {"out", a.out}};
    if (a.use_truncate) rj["truncate"] = a.truncate;
    if (a.window.size() == 2) rj["window"] = a.window;
    write_resolved(rj, a.out + ".resolved.json");
  }
  return est.ok ? 0 : 4;
}

// ---------------------------------------------------------------- mc

struct McArgs {
  std::string study = "tables";  // tables | rate | cov | convergence | curves
  std::string case_id = "A";
  std::size_t reps = 1000;
  bool reps_set = false;
  std::uint64_t seed = 1;
  unsigned M = 390;
  double T = 22.0;
  bool t_set = false;
  unsigned workers = 0;
  double conf = 0.95;
  double p0 = 0.1;
  double truncate = 0.0;
  bool use_truncate = false;
  std::string out_dir = ".";
  // study parameters
  double beta = 1.5, p = 0.6, q = 0.0;
  double delta_n = 1.0 / 2000.0;
  std::string p_grid = "0.6,1.35";
  std::string delta_grid = "0.002,0.001,0.0005";
  std::string m_levels = "390,780,1560";
  std::string beta_grid = "0.75,1,1.25,1.5,1.75,2";
  double p_step = 0.01;
};

json resolved_mc_base(const McArgs& a) {
  // workers deliberately left out: it cannot change any output byte.
  // truncate only appears when the truncated first step was selected; an
  // unconditional 0 would flip the mode on rerun.
  json j{{"command", "mc"},       {"study", a.study},     {"case", a.case_id},
         {"reps", a.reps},        {"seed", a.seed},       {"M", a.M},
         {"T", a.T},              {"conf", a.conf},       {"p0", a.p0},
         {"out_dir", a.out_dir},  {"beta", a.beta},       {"p", a.p},
         {"q", a.q},              {"delta_n", a.delta_n}, {"p_grid", a.p_grid},
         {"delta_grid", a.delta_grid}, {"m_levels", a.m_levels},
         {"beta_grid", a.beta_grid},   {"p_step", a.p_step}};
  if (a.use_truncate) j["truncate"] = a.truncate;
  return j;
}

ExperimentConfig experiment_from(const McArgs& a, char case_id) {
  ExperimentConfig cfg;
  cfg.case_id = case_id;
  cfg.M = a.M;
  cfg.T = a.T;
  cfg.reps = a.reps;
  cfg.base_seed = a.seed;
  cfg.fs = fs_from(a.p0, a.use_truncate, a.truncate);
  cfg.conf = a.conf;
  cfg.workers = a.workers;
  return cfg;
}

void report_case(const CaseSummary& cs, const TableThreeRow& t3) {
  std::printf("case %c reps %zu flagged %zu runtime %.1f s\n", cs.case_id, cs.n_reps, cs.n_flagged,
              cs.runtime_sec);
  std::printf("  one_step median %s iqr %s mad %s\n", fmt_g(cs.one_step.median).c_str(),
              fmt_g(cs.one_step.iqr).c_str(), fmt_g(cs.one_step.mad).c_str());
  std::printf("  two_step median %s iqr %s mad %s\n", fmt_g(cs.two_step.median).c_str(),
              fmt_g(cs.two_step.iqr).c_str(), fmt_g(cs.two_step.mad).c_str());
  std::printf("  se exact %s est_median %s ratio %s\n", fmt_g(t3.exact_scaled_sd).c_str(),
              fmt_g(t3.est_median).c_str(), fmt_g(t3.est_median / t3.exact_scaled_sd).c_str());
}

int run_mc_tables(const McArgs& a) {
  if (a.case_id.size() != 1) throw DomainError("case must be one of A, B, C, D");
  ensure_dir(a.out_dir);
  const ExperimentConfig cfg = experiment_from(a, a.case_id[0]);
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = run_case(cfg);
  CaseSummary cs = summarize_case(cfg, records);
  cs.runtime_sec = wall_seconds(t0);
  const TableThreeRow t3 = se_precision_row(cfg, records);
  write_table2({cs}, a.out_dir + "/table2.csv");
  write_table3({t3}, a.out_dir + "/table3.csv");
  write_histogram(cfg, records, a.out_dir + "/histogram_" + a.case_id + ".csv");
  write_resolved(resolved_mc_base(a), a.out_dir + "/run.resolved.json");
  report_case(cs, t3);
  return 0;
}

int run_mc_cov(const McArgs& a) {
  ensure_dir(a.out_dir);
  const std::size_t reps = a.reps_set ? a.reps : 2000;
  const double T = a.t_set ? a.T : 100.0;  // span carries the estimator precision
  const double q = a.q > 0.0 ? a.q : a.p;
  const CovCheckRow row = cov_check(a.beta, a.p, q, reps, a.delta_n, T, a.seed, a.workers);
  std::ofstream out(a.out_dir + "/cov_check.csv");
  if (!out) throw IoError("cannot open for writing: " + a.out_dir + "/cov_check.csv");
  out << "beta,p,q,emp_cc,emp_cf,emp_fc,emp_ff,theo_cc,theo_cf,theo_fc,theo_ff,max_rel_err\n";
  out << fmt_g(row.beta) << ',' << fmt_g(row.p) << ',' << fmt_g(row.q) << ','
      << fmt_g(row.empirical[0][0]) << ',' << fmt_g(row.empirical[0][1]) << ','
      << fmt_g(row.empirical[1][0]) << ',' << fmt_g(row.empirical[1][1]) << ','
      << fmt_g(row.theoretical[0][0]) << ',' << fmt_g(row.theoretical[0][1]) << ','
      << fmt_g(row.theoretical[1][0]) << ',' << fmt_g(row.theoretical[1][1]) << ','
      << fmt_g(row.max_rel_err) << '\n';
  if (!out) throw IoError("write failed: cov_check.csv");
  json rj = resolved_mc_base(a);
  rj["reps"] = reps;
  rj["T"] = T;
  rj["q"] = q;
  write_resolved(rj, a.out_dir + "/run.resolved.json");
  std::printf("cov_check beta %s p %s q %s max_rel_err %s\n", fmt_g(row.beta).c_str(),
              fmt_g(row.p).c_str(), fmt_g(q).c_str(), fmt_g(row.max_rel_err).c_str());
  return 0;
}

int run_mc_rate(const McArgs& a) {
  if (a.case_id.size() != 1) throw DomainError("case must be one of A, B, C, D");
  ensure_dir(a.out_dir);
  const std::size_t reps = a.reps_set ? a.reps : 200;
  const auto rows = rate_study(a.case_id[0], parse_ulist(a.m_levels), a.T, reps, a.seed, a.workers);
  std::ofstream out(a.out_dir + "/rate.csv");
  if (!out) throw IoError("cannot open for writing: " + a.out_dir + "/rate.csv");
  out << "delta_n,sd_ts,slope\n";
  for (const auto& r : rows)
    out << fmt_g(r.delta_n) << ',' << fmt_g(r.sd_ts) << ',' << fmt_g(r.slope) << '\n';
  if (!out) throw IoError("write failed: rate.csv");
  json rj = resolved_mc_base(a);
  rj["reps"] = reps;
  write_resolved(rj, a.out_dir + "/run.resolved.json");
  std::printf("rate case %s slope %s\n", a.case_id.c_str(), fmt_g(rows.front().slope).c_str());
  return 0;
}

int run_mc_convergence(const McArgs& a) {
  ensure_dir(a.out_dir);
  const std::size_t reps = a.reps_set ? a.reps : 100;
  ModelSpec model;
  model.sigma2 = 1.0;
  model.jump_kind = JumpStable{1.0 / pi_const(1.0, a.beta), a.beta};  // unit scale constant
  const auto rows = convergence_study(model, parse_list(a.p_grid), parse_list(a.delta_grid), a.T,
                                      reps, a.seed, a.workers);
  write_convergence(rows, a.out_dir + "/convergence.csv");
  json rj = resolved_mc_base(a);
  rj["reps"] = reps;
  write_resolved(rj, a.out_dir + "/run.resolved.json");
  for (std::size_t i = 0; i < rows.size(); i += parse_list(a.delta_grid).size())
    std::printf("convergence p %s slope %s\n", fmt_g(rows[i].p).c_str(),
                fmt_g(rows[i].slope).c_str());
  return 0;
}

int run_mc_curves(const McArgs& a) {
  ensure_dir(a.out_dir);
  write_curves_k(parse_list(a.beta_grid), a.p_step, a.out_dir + "/curves_k.csv");
  write_curve_pstar(parse_list(a.beta_grid), a.out_dir + "/curve_pstar.csv");
  write_resolved(resolved_mc_base(a), a.out_dir + "/run.resolved.json");
  std::printf("curves written to %s\n", a.out_dir.c_str());
  return 0;
}

int run_mc(const McArgs& a) {
  if (a.study == "tables") return run_mc_tables(a);
  if (a.study == "cov") return run_mc_cov(a);
  if (a.study == "rate") return run_mc_rate(a);
  if (a.study == "convergence") return run_mc_convergence(a);
  if (a.study == "curves") return run_mc_curves(a);
  throw DomainError("unknown study: " + a.study);
}

// ---------------------------------------------------------------- reproduce

struct ReproArgs {
  std::string out_dir = "reproduction";
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  unsigned M = 390;
  double T = 22.0;
  unsigned workers = 0;
  double conf = 0.95;
  bool paper = false;  // full-size run: 10,000 replications per case
};

int run_reproduce(const ReproArgs& a) {
  ensure_dir(a.out_dir);
  const std::size_t reps = a.paper ? 10000 : a.reps;
  std::vector<CaseSummary> table2;
  std::vector<TableThreeRow> table3;
  for (char c : {'A', 'B', 'C', 'D'}) {
    ExperimentConfig cfg;
    cfg.case_id = c;
    cfg.M = a.M;
    cfg.T = a.T;
    cfg.reps = reps;
    cfg.base_seed = a.seed;
    cfg.conf = a.conf;
    cfg.workers = a.workers;
    const auto t0 = std::chrono::steady_clock::now();
    const auto records = run_case(cfg);
    CaseSummary cs = summarize_case(cfg, records);
    cs.runtime_sec = wall_seconds(t0);
    const TableThreeRow t3 = se_precision_row(cfg, records);
    write_histogram(cfg, records, a.out_dir + "/histogram_" + std::string(1, c) + ".csv");
    report_case(cs, t3);
    table2.push_back(cs);
    table3.push_back(t3);
  }
  write_table2(table2, a.out_dir + "/table2.csv");
  write_table3(table3, a.out_dir + "/table3.csv");
  write_curves_k({0.75, 1.0, 1.25, 1.5, 1.75, 2.0}, 0.01, a.out_dir + "/curves_k.csv");
  std::vector<double> pstar_grid;
  for (int i = 0; i <= 36; ++i) pstar_grid.push_back(0.2 + 0.05 * i);
  write_curve_pstar(pstar_grid, a.out_dir + "/curve_pstar.csv");
  const json rj{{"command", "reproduce"}, {"out_dir", a.out_dir}, {"reps", reps},
                {"seed", a.seed},         {"M", a.M},             {"T", a.T},
                {"conf", a.conf},         {"paper", a.paper}};
  write_resolved(rj, a.out_dir + "/run.resolved.json");
  std::printf("reproduction artifacts in %s\n", a.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation and estimation toolkit for jump-activity indices"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config_file;

  MomentsArgs ma;
  CLI::App* moments = app.add_subcommand("moments", "stable moment and kernel constants");
  moments->add_option("--config", config_file, "flat JSON config; flags override");
  moments->add_option("--beta", ma.beta, "stable index (2 = normal)");
  auto* mu_p_opt = moments->add_option("--mu-p", ma.mu_p_arg, "E|Z|^p");
  moments->add_option("--mu-pq", ma.mu_pq_arg, "E|Z1|^p |Z1+Z2|^q")->expected(2);
  auto* pi_opt = moments->add_option("--pi", ma.pi_arg, "scale constant for Levy coefficient A");
  moments->add_option("--k", ma.k_arg, "covariance kernel K_{p,q}")->expected(2);
  auto* pstar_opt = moments->add_option("--pstar", ma.pstar_arg, "variance-optimal power at beta");
  moments->add_option("--points", ma.points, "QMC points for cross moments");

  SimArgs sa;
  CLI::App* simulate = app.add_subcommand("simulate", "sample a path and write it to disk");
  simulate->add_option("--config", config_file, "flat JSON config; flags override");
  simulate->add_option("--case", sa.case_id, "benchmark case A|B|C|D");
  simulate->add_option("--model", sa.model, "none|stable|tempered_stable|compound_poisson");
  simulate->add_option("--sigma1-sq", sa.sigma1_sq, "continuous variance");
  simulate->add_option("--sigma2", sa.sigma2, "jump scale");
  simulate->add_option("--drift", sa.drift, "linear drift");
  simulate->add_option("--A", sa.A, "Levy density coefficient");
  simulate->add_option("--beta", sa.beta, "jump activity index");
  simulate->add_option("--lambda", sa.lambda, "tempering rate");
  simulate->add_option("--lambda-c", sa.lambda_c, "compound Poisson arrival rate");
  simulate->add_option("--r", sa.r, "compound Poisson jump size");
  simulate->add_option("--vol", sa.vol, "piecewise jump scale, t:sigma,t:sigma");
  simulate->add_option("--T", sa.T, "time span");
  simulate->add_option("--M", sa.M, "observations per unit span");
  simulate->add_option("--delta-n", sa.delta_n, "step size (overrides --M)");
  simulate->add_option("--seed", sa.seed, "RNG seed");
  simulate->add_option("--out", sa.out, "output file")->required();
  simulate->add_option("--format", sa.format, "csv|binary");

  EstArgs ea;
  CLI::App* estimate = app.add_subcommand("estimate", "two-step activity estimate for a path file");
  estimate->add_option("--config", config_file, "flat JSON config; flags override");
  estimate->add_option("--in", ea.in, "path file (csv or binary)")->required();
  estimate->add_option("--p0", ea.p0, "first-step power");
  auto* trunc_opt = estimate->add_option("--truncate", ea.truncate, "first step from truncation counts at level alpha");
  estimate->add_option("--conf", ea.conf, "confidence level");
  estimate->add_option("--window", ea.window, "uniform weight bounds lo hi")->expected(2);
  estimate->add_flag("--csv", ea.csv, "emit a CSV row instead of JSON");
  estimate->add_flag("--no-header", ea.no_header, "omit the CSV header");
  estimate->add_option("--out", ea.out, "also write the record to this file");

  McArgs ca;
  CLI::App* mc = app.add_subcommand("mc", "replicated experiments and studies");
  mc->add_option("--config", config_file, "flat JSON config; flags override");
  mc->add_option("--study", ca.study, "tables|rate|cov|convergence|curves");
  mc->add_option("--case", ca.case_id, "benchmark case A|B|C|D");
  auto* reps_opt = mc->add_option("--reps", ca.reps, "replications");
  mc->add_option("--seed", ca.seed, "base seed");
  mc->add_option("--M", ca.M, "observations per unit span");
  auto* t_opt = mc->add_option("--T", ca.T, "time span");
  mc->add_option("--workers", ca.workers, "worker threads (0 = PJA_WORKERS or hardware)");
  mc->add_option("--conf", ca.conf, "confidence level");
  mc->add_option("--p0", ca.p0, "first-step power");
  auto* mc_trunc = mc->add_option("--truncate", ca.truncate, "first step from truncation counts");
  mc->add_option("--out-dir", ca.out_dir, "artifact directory");
  mc->add_option("--beta", ca.beta, "index for cov/convergence/curves studies");
  mc->add_option("--p", ca.p, "first power (cov study)");
  mc->add_option("--q", ca.q, "second power (cov study; defaults to --p)");
  mc->add_option("--delta-n", ca.delta_n, "step size (cov study)");
  mc->add_option("--p-grid", ca.p_grid, "comma list of powers (convergence study)");
  mc->add_option("--delta-grid", ca.delta_grid, "comma list of step sizes (convergence study)");
  mc->add_option("--m-levels", ca.m_levels, "comma list of per-unit sampling rates (rate study)");
  mc->add_option("--beta-grid", ca.beta_grid, "comma list of indices (curves study)");
  mc->add_option("--p-step", ca.p_step, "power grid step (curves study)");

  ReproArgs ra;
  CLI::App* reproduce = app.add_subcommand("reproduce", "full table and figure pipeline");
  reproduce->add_option("--config", config_file, "flat JSON config; flags override");
  reproduce->add_option("--out-dir", ra.out_dir, "artifact directory");
  reproduce->add_option("--reps", ra.reps, "replications per case");
  reproduce->add_option("--seed", ra.seed, "base seed");
  reproduce->add_option("--M", ra.M, "observations per unit span");
  reproduce->add_option("--T", ra.T, "time span");
  reproduce->add_option("--workers", ra.workers, "worker threads");
  reproduce->add_option("--conf", ra.conf, "confidence level");
  reproduce->add_flag("--paper", ra.paper, "full-size run: 10,000 replications per case");

  // config preload: inject file values as tokens before the user's flags so
  // explicit flags win
  std::vector<std::string> tokens(argv + 1, argv + argc);
  try {
    if (!tokens.empty() && !tokens.front().empty() && tokens.front()[0] != '-') {
      std::string cfg_path;
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (tokens[i] == "--config" && i + 1 < tokens.size()) cfg_path = tokens[i + 1];
        else if (tokens[i].rfind("--config=", 0) == 0) cfg_path = tokens[i].substr(9);
      }
      if (!cfg_path.empty()) {
        const auto extra = config_tokens(load_config(cfg_path));
        tokens.insert(tokens.begin() + 1, extra.begin(), extra.end());
      }
    }
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    std::reverse(tokens.begin(), tokens.end());
    app.parse(tokens);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  ma.has_mu_p = mu_p_opt->count() > 0;
  ma.has_pi = pi_opt->count() > 0;
  ma.has_pstar = pstar_opt->count() > 0;
  ea.use_truncate = trunc_opt->count() > 0;
  ca.use_truncate = mc_trunc->count() > 0;
  ca.reps_set = reps_opt->count() > 0;
  ca.t_set = t_opt->count() > 0;

  try {
    if (moments->parsed()) return run_moments(ma);
    if (simulate->parsed()) return run_simulate(sa);
    if (estimate->parsed()) return run_estimate(ea);
    if (mc->parsed()) return run_mc(ca);
    if (reproduce->parsed()) return run_reproduce(ra);
    throw DomainError("no subcommand selected");
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const DegenerateError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
