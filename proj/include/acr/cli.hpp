#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acr/combine.hpp"
#include "acr/errors.hpp"
#include "acr/simulate.hpp"

namespace acr {

struct RunSpec {
  std::string subcommand;  // exp1 | exp2 | exp3 | combine | weights
  std::string config_path;
  std::string out;  // CSV path for experiments; empty = stdout for the others
  ExperimentConfig config;

  // combine inputs
  std::string input_path;
  std::optional<double> phi_n;

  // weights inputs
  std::string kind;  // spd | qr | kernel-gaussian | kernel-epanechnikov
  std::vector<double> w_taus;
  std::vector<double> w_fq;
  std::string matrix_path;
};

namespace cli_detail {

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c, const std::string& out) {
  nlohmann::ordered_json j;
  j["experiment"] = c.experiment;
  j["n"] = c.n;
  j["reps"] = c.reps;
  j["seed"] = c.seed;
  j["weight_mode"] = (c.weight_mode == WeightMode::optimal) ? "optimal" : "equal";
  j["threads"] = c.threads;
  j["qr_tau"] = c.qr_tau;
  j["taus"] = c.exp1_taus();
  j["eta"] = c.eta;
  j["ace_variant"] = (c.ace_variant == AceVariant::r1) ? "r1" : "r2";
  j["tau_rule"] = (c.tau_rule == TauRule::fixed_grid) ? "fixed_grid" : "cv_multiples";
  j["tau_multipliers"] = c.tau_multipliers;
  j["h_grid"] = c.exp2_h_grid();
  j["method"] = c.method;
  j["a"] = c.a;
  j["x_mean"] = c.x_mean;
  j["theta"] = c.exp3_theta();
  j["c"] = c.exp3_c();
  j["tau_cv_grid"] = c.tau_cv_grid;
  j["tau_offsets"] = c.tau_offsets;
  if (c.window_exponent)
    j["window_exponent"] = *c.window_exponent;
  else
    j["window_exponent"] = nullptr;
  j["keep_failures"] = c.exp3_keep_failures();
  j["out"] = out;
  return j;
}

inline void config_from_json(const nlohmann::json& j, ExperimentConfig& c, std::string& out) {
  try {
    if (j.contains("experiment")) c.experiment = j.at("experiment").get<int>();
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("reps")) c.reps = j.at("reps").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("weight_mode")) {
      const std::string s = j.at("weight_mode").get<std::string>();
      if (s == "optimal")
        c.weight_mode = WeightMode::optimal;
      else if (s == "equal")
        c.weight_mode = WeightMode::equal;
      else
        throw ConfigError("weight_mode must be 'equal' or 'optimal'");
    }
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    if (j.contains("qr_tau")) c.qr_tau = j.at("qr_tau").get<double>();
    if (j.contains("taus")) c.taus = j.at("taus").get<std::vector<double>>();
    if (j.contains("eta")) c.eta = j.at("eta").get<double>();
    if (j.contains("ace_variant")) {
      const std::string s = j.at("ace_variant").get<std::string>();
      if (s == "r1")
        c.ace_variant = AceVariant::r1;
      else if (s == "r2")
        c.ace_variant = AceVariant::r2;
      else
        throw ConfigError("ace_variant must be 'r1' or 'r2'");
    }
    if (j.contains("tau_rule")) {
      const std::string s = j.at("tau_rule").get<std::string>();
      if (s == "fixed_grid")
        c.tau_rule = TauRule::fixed_grid;
      else if (s == "cv_multiples")
        c.tau_rule = TauRule::cv_multiples;
      else
        throw ConfigError("tau_rule must be 'fixed_grid' or 'cv_multiples'");
    }
    if (j.contains("tau_multipliers"))
      c.tau_multipliers = j.at("tau_multipliers").get<std::vector<double>>();
    if (j.contains("h_grid")) c.h_grid = j.at("h_grid").get<std::vector<double>>();
    if (j.contains("method")) c.method = j.at("method").get<int>();
    if (j.contains("a")) c.a = j.at("a").get<double>();
    if (j.contains("x_mean")) c.x_mean = j.at("x_mean").get<double>();
    if (j.contains("theta")) c.theta3 = j.at("theta").get<double>();
    if (j.contains("c")) c.c = j.at("c").get<double>();
    if (j.contains("tau_cv_grid"))
      c.tau_cv_grid = j.at("tau_cv_grid").get<std::vector<double>>();
    if (j.contains("tau_offsets"))
      c.tau_offsets = j.at("tau_offsets").get<std::vector<double>>();
    if (j.contains("window_exponent") && !j.at("window_exponent").is_null())
      c.window_exponent = j.at("window_exponent").get<double>();
    if (j.contains("keep_failures")) c.keep_failures = j.at("keep_failures").get<bool>() ? 1 : 0;
    if (j.contains("out")) out = j.at("out").get<std::string>();
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config schema violation: ") + e.what());
  }
}

}  // namespace cli_detail

//! Parse argv (without the program name) into a validated RunSpec.
//! Flag values override anything loaded from --config.
inline RunSpec parse_args(const std::vector<std::string>& argv) {
  CLI::App app{"asymptotic composite regression toolkit"};
  app.require_subcommand(1);

  struct Raw {
    std::string config, out, weights, ace_variant, tau_rule, input, kind, taus, fq, matrix;
    std::int64_t n = -1, reps = -1, method = -1, threads = -1;
    std::int64_t seed = -1;
    double a = 0.0, x_mean = 0.0, theta = 0.0, c = 0.0, eta = 0.0, phi = 0.0, wexp = 0.0;
    bool keep = false, no_keep = false;
  } raw;

  std::vector<CLI::App*> exps;
  for (const char* name : {"exp1", "exp2", "exp3"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run experiment ") + name[3]);
    sub->add_option("--config", raw.config, "JSON config file; flags override its values");
    sub->add_option("--n", raw.n, "sample size");
    sub->add_option("--reps", raw.reps, "Monte Carlo replications");
    sub->add_option("--seed", raw.seed, "master seed");
    sub->add_option("--threads", raw.threads, "worker threads (0 = auto)");
    sub->add_option("--weights", raw.weights, "equal | optimal");
    sub->add_option("--out", raw.out, "output CSV path");
    exps.push_back(sub);
  }
  exps[1]->add_option("--ace-variant", raw.ace_variant, "r1 | r2");
  exps[1]->add_option("--tau-rule", raw.tau_rule, "fixed_grid | cv_multiples");
  exps[1]->add_option("--eta", raw.eta, "bandwidth exponent");
  exps[2]->add_option("--method", raw.method, "1 = variance-scaled likelihood, 2 = unscaled");
  exps[2]->add_option("--a", raw.a, "AR(1) coefficient");
  exps[2]->add_option("--x-mean", raw.x_mean, "mean of the covariate");
  exps[2]->add_option("--theta", raw.theta, "true slope (0 = method default)");
  exps[2]->add_option("--c", raw.c, "block exponent parameter (0 = method default)");
  exps[2]->add_option("--window-exponent", raw.wexp, "override exponent for M and L");
  exps[2]->add_flag("--keep-failures", raw.keep, "clamp divergent fits instead of dropping");
  exps[2]->add_flag("--drop-failures", raw.no_keep, "drop divergent fits");

  CLI::App* combine = app.add_subcommand("combine", "combine initial estimates from JSON");
  combine->add_option("--input", raw.input, "JSON with taus, theta_hats, xi_hats, weights")
      ->required();
  combine->add_option("--phi", raw.phi, "known scale; omit to fit it");
  combine->add_option("--out", raw.out, "output JSON path (default stdout)");

  CLI::App* weights = app.add_subcommand("weights", "optimal weight vectors");
  weights->add_option("--kind", raw.kind, "spd | qr | kernel-gaussian | kernel-epanechnikov")
      ->required();
  weights->add_option("--taus", raw.taus, "comma-separated tau list");
  weights->add_option("--fq", raw.fq, "comma-separated f(Q(tau)) list (kind=qr)");
  weights->add_option("--matrix", raw.matrix, "JSON matrix file (kind=spd)");
  weights->add_option("--out", raw.out, "output JSON path (default stdout)");

  std::vector<std::string> args(argv.rbegin(), argv.rend());  // CLI11 wants reversed
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    throw UsageError(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunSpec spec;
  CLI::App* sub = app.get_subcommands().front();
  spec.subcommand = sub->get_name();

  if (spec.subcommand == "combine") {
    spec.input_path = raw.input;
    spec.out = raw.out;
    if (sub->count("--phi")) spec.phi_n = raw.phi;
    return spec;
  }
  if (spec.subcommand == "weights") {
    spec.kind = raw.kind;
    spec.out = raw.out;
    if (sub->count("--taus")) spec.w_taus = cli_detail::parse_list(raw.taus);
    if (sub->count("--fq")) spec.w_fq = cli_detail::parse_list(raw.fq);
    spec.matrix_path = raw.matrix;
    if (spec.kind != "spd" && spec.kind != "qr" && spec.kind != "kernel-gaussian" &&
        spec.kind != "kernel-epanechnikov")
      throw UsageError("unknown --kind: " + spec.kind);
    return spec;
  }

  ExperimentConfig& c = spec.config;
  c.experiment = spec.subcommand[3] - '0';
  if (c.experiment != 1) c.weight_mode = WeightMode::equal;

  if (sub->count("--config")) {
    spec.config_path = raw.config;
    std::ifstream f(raw.config);
    if (!f) throw ConfigError("cannot read config: " + raw.config);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    cli_detail::config_from_json(j, c, spec.out);
    if (j.contains("experiment") && c.experiment != spec.subcommand[3] - '0')
      throw ConfigError("config experiment id does not match subcommand");
    c.experiment = spec.subcommand[3] - '0';
  }

  if (sub->count("--n")) {
    if (raw.n < 10) throw ConfigError("--n must be >= 10");
    c.n = static_cast<std::size_t>(raw.n);
  }
  if (sub->count("--reps")) {
    if (raw.reps < 1) throw ConfigError("--reps must be >= 1");
    c.reps = static_cast<std::size_t>(raw.reps);
  }
  if (sub->count("--seed")) c.seed = static_cast<std::uint64_t>(raw.seed);
  if (sub->count("--threads")) c.threads = static_cast<unsigned>(raw.threads);
  if (sub->count("--weights")) {
    if (raw.weights == "equal")
      c.weight_mode = WeightMode::equal;
    else if (raw.weights == "optimal")
      c.weight_mode = WeightMode::optimal;
    else
      throw UsageError("--weights must be 'equal' or 'optimal'");
  }
  if (sub->count("--out")) spec.out = raw.out;
  if (spec.subcommand == "exp2") {
    if (sub->count("--ace-variant")) {
      if (raw.ace_variant == "r1")
        c.ace_variant = AceVariant::r1;
      else if (raw.ace_variant == "r2")
        c.ace_variant = AceVariant::r2;
      else
        throw UsageError("--ace-variant must be 'r1' or 'r2'");
    }
    if (sub->count("--tau-rule")) {
      if (raw.tau_rule == "fixed_grid")
        c.tau_rule = TauRule::fixed_grid;
      else if (raw.tau_rule == "cv_multiples")
        c.tau_rule = TauRule::cv_multiples;
      else
        throw UsageError("--tau-rule must be 'fixed_grid' or 'cv_multiples'");
    }
    if (sub->count("--eta")) c.eta = raw.eta;
  }
  if (spec.subcommand == "exp3") {
    if (sub->count("--method")) c.method = static_cast<int>(raw.method);
    if (sub->count("--a")) c.a = raw.a;
    if (sub->count("--x-mean")) c.x_mean = raw.x_mean;
    if (sub->count("--theta")) c.theta3 = raw.theta;
    if (sub->count("--c")) c.c = raw.c;
    if (sub->count("--window-exponent")) c.window_exponent = raw.wexp;
    if (raw.keep && raw.no_keep) throw UsageError("--keep-failures conflicts with --drop-failures");
    if (raw.keep) c.keep_failures = 1;
    if (raw.no_keep) c.keep_failures = 0;
  }
  try {
    c.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (spec.out.empty()) throw ConfigError("no output path: pass --out or set it in the config");
  return spec;
}

//! Write the report as CSV plus a JSON sidecar holding the full config, so
//! the run can be reproduced byte for byte.
inline void emit_report(const MonteCarloReport& report, const RunSpec& spec) {
  if (spec.out.empty()) throw ConfigError("no output path given");
  std::ostringstream csv;
  if (report.experiment == 2) {
    csv << "estimator,n,mise\n";
    for (const EstimatorSummary& e : report.estimators)
      csv << e.name << ',' << report.n << ',' << cli_detail::fmt6(e.mise) << '\n';
  } else {
    csv << "estimator,n,coef,bias,mse\n";
    for (const EstimatorSummary& e : report.estimators)
      for (std::size_t j = 0; j < e.bias.size(); ++j)
        csv << e.name << ',' << report.n << ',' << (j + 1) << ','
            << cli_detail::fmt6(e.bias[j]) << ',' << cli_detail::fmt6(e.mse[j]) << '\n';
  }
  {
    std::ofstream f(spec.out, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + spec.out);
    f << csv.str();
    if (!f) throw IoError("write failed: " + spec.out);
  }
  {
    const std::string sidecar = spec.out + ".json";
    std::ofstream f(sidecar, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + sidecar);
    f << cli_detail::config_to_json(spec.config, spec.out).dump(2) << '\n';
    if (!f) throw IoError("write failed: " + sidecar);
  }
}

}  // namespace acr
