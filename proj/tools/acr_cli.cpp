#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "acr/cli.hpp"
#include "acr/combine.hpp"
#include "acr/kernel.hpp"
#include "acr/quantile.hpp"
#include "acr/simulate.hpp"

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void write_json_output(const ordered_json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw acr::IoError("cannot open for writing: " + out);
  f << j.dump(2) << '\n';
  if (!f) throw acr::IoError("write failed: " + out);
}

int run_combine(const acr::RunSpec& spec) {
  std::ifstream f(spec.input_path);
  if (!f) throw acr::ConfigError("cannot read input: " + spec.input_path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw acr::ConfigError(std::string("input parse error: ") + e.what());
  }
  std::vector<double> taus, theta_hats, xi_hats;
  try {
    taus = j.at("taus").get<std::vector<double>>();
    theta_hats = j.at("theta_hats").get<std::vector<double>>();
    xi_hats = j.at("xi_hats").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw acr::ConfigError(std::string("input schema violation: ") + e.what());
  }
  acr::WeightVector w = j.contains("weights")
                            ? acr::WeightVector(j.at("weights").get<std::vector<double>>())
                            : acr::WeightVector::equal(taus.size());
  const acr::InitialEstimateSet est(taus, theta_hats, xi_hats);

  ordered_json out;
  if (spec.phi_n) {
    const acr::CombineResult r = acr::combine_known_scale(est, w, *spec.phi_n);
    out["theta_tilde"] = r.theta_tilde;
    out["phi_n"] = r.phi_hat;
  } else {
    const acr::CombineResult r = acr::combine_unknown_scale(est, w);
    out["theta_tilde"] = r.theta_tilde;
    out["phi_hat"] = r.phi_hat;
    out["regenerated_weights"] = acr::regenerated_weights(w, est.xi_hats).values;
  }
  write_json_output(out, spec.out);
  return 0;
}

int run_weights(const acr::RunSpec& spec) {
  ordered_json out;
  if (spec.kind == "spd") {
    if (spec.matrix_path.empty()) throw acr::UsageError("kind=spd requires --matrix");
    std::ifstream f(spec.matrix_path);
    if (!f) throw acr::ConfigError("cannot read matrix: " + spec.matrix_path);
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw acr::ConfigError(std::string("matrix parse error: ") + e.what());
    }
    const std::size_t m = j.at("m").get<std::size_t>();
    const std::vector<double> entries = j.at("entries").get<std::vector<double>>();
    if (entries.size() != m * m) throw acr::ConfigError("matrix entries must have m*m values");
    acr::Matrix sigma(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k) sigma(i, k) = entries[i * m + k];
    const acr::WeightVector w = acr::optimal_tilde_weights(sigma);
    const acr::Vector z = acr::solve_spd(sigma, acr::Vector(m, 1.0));
    double s = 0.0;
    for (double v : z) s += v;
    out["weights"] = w.values;
    out["variance_factor"] = 1.0 / s;
  } else if (spec.kind == "qr") {
    if (spec.w_taus.empty() || spec.w_fq.empty())
      throw acr::UsageError("kind=qr requires --taus and --fq");
    const acr::Matrix a0 = acr::a0_matrix(spec.w_taus, spec.w_fq);
    const acr::WeightVector w = acr::optimal_qr_weights(a0);
    const acr::Vector z = acr::solve_spd(a0, acr::Vector(spec.w_taus.size(), 1.0));
    double s = 0.0;
    for (double v : z) s += v;
    out["weights"] = w.values;
    out["variance_factor"] = 1.0 / s;
  } else {
    if (spec.w_taus.empty()) throw acr::UsageError("kernel kinds require --taus");
    const acr::KernelSpec k = (spec.kind == "kernel-gaussian") ? acr::KernelSpec::gaussian()
                                                               : acr::KernelSpec::epanechnikov();
    const acr::KernelWeights kw = acr::kernel_weight_vectors(spec.w_taus, k);
    out["w1_star"] = kw.w1_star.values;
    out["w2_star"] = kw.w2_star.values;
    out["variance_factor_1"] = kw.factor1;
    out["variance_factor_2"] = kw.factor2;
  }
  write_json_output(out, spec.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const acr::RunSpec spec = acr::parse_args(args);
    if (spec.subcommand == "combine") return run_combine(spec);
    if (spec.subcommand == "weights") return run_weights(spec);

    const acr::MonteCarloReport report = acr::run_monte_carlo(spec.config);
    acr::emit_report(report, spec);
    for (const acr::EstimatorSummary& e : report.estimators) {
      std::fprintf(stderr, "%-5s n=%zu kept=%zu failures=%zu\n", e.name.c_str(), report.n,
                   e.kept, e.failures);
    }
    const double kept_floor = 0.95;
    for (const acr::EstimatorSummary& e : report.estimators)
      if (static_cast<double>(e.kept) <
          kept_floor * static_cast<double>(report.reps))
        return 4;
    return 0;
  } catch (const acr::UsageError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const acr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 3;
  } catch (const acr::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 1;
  } catch (const acr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
