#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "zee/calibration.hpp"
#include "zee/csv.hpp"
#include "zee/log.hpp"
#include "zee/oracle.hpp"
#include "zee/serialize.hpp"
#include "zee/simulate.hpp"
#include "zee/variance.hpp"
#include "zee/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInternal = 4;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0')
        << static_cast<int>(digest[i]);
  return hex.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) zee::fail(zee::ErrorCode::ConfigError,
                      "cannot write '" + path.string() + "'");
  out << text;
}

// One manifest per output directory: the command, its resolved inputs, and
// the environment needed to reproduce the run byte for byte.
void write_manifest(const fs::path& dir, const std::string& command,
                    const json& resolved,
                    const std::vector<std::string>& inputs,
                    std::uint64_t seed, double wall_seconds) {
  json m;
  m["command"] = command;
  m["config"] = resolved;
  json files = json::object();
  for (const auto& p : inputs) files[p] = sha256_file(p);
  m["inputs"] = files;
  m["library_version"] = zee::kVersion;
  m["schema_version"] = zee::kSchemaVersion;
  m["seed"] = seed;
  m["wall_time_s"] = wall_seconds;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

zee::WeightScheme scheme_from_flag(const std::string& name,
                                   const zee::Dataset& data, double tol,
                                   int max_iter,
                                   std::optional<zee::CalibrationSolution>* cal) {
  if (name == "rs") return zee::WeightScheme::unit();
  if (name == "ipw") return zee::WeightScheme::ipw();
  if (name == "cal") {
    zee::CalibrationOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    auto sol = zee::solve_gamma(data, opts);
    const zee::Vector gamma = sol.gamma;
    *cal = std::move(sol);
    return zee::WeightScheme::calibrated(gamma);
  }
  zee::fail(zee::ErrorCode::ConfigError, "unknown scheme '" + name + "'");
}

struct PredictRequest {
  zee::Vector z;
  double s;
};

PredictRequest parse_predict(const std::string& spec) {
  const auto at = spec.find('@');
  if (at == std::string::npos)
    zee::fail(zee::ErrorCode::ConfigError,
              "--predict expects z1,z2,...@time, got '" + spec + "'");
  std::vector<double> zs;
  std::stringstream ss(spec.substr(0, at));
  std::string tok;
  while (std::getline(ss, tok, ',')) zs.push_back(std::stod(tok));
  PredictRequest req;
  req.z = Eigen::Map<zee::Vector>(zs.data(), static_cast<int>(zs.size()));
  req.s = std::stod(spec.substr(at + 1));
  return req;
}

// ---- simulate config -----------------------------------------------------

// minimal TOML subset: [table] headers, key = value with numbers, booleans,
// strings, and (nested) arrays of numbers; enough for the simulate schema
json toml_subset_to_json(const std::string& text) {
  json root = json::object();
  json* current = &root;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto parse_scalar = [](const std::string& raw) -> json {
    std::string s = raw;
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    s = s.substr(a, b - a + 1);
    if (s == "true") return true;
    if (s == "false") return false;
    if (!s.empty() && (s.front() == '"' || s.front() == '\''))
      return s.substr(1, s.size() - 2);
    return std::stod(s);
  };
  std::function<json(const std::string&, std::size_t&)> parse_value =
      [&](const std::string& s, std::size_t& pos) -> json {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
      ++pos;
    if (pos < s.size() && s[pos] == '[') {
      json arr = json::array();
      ++pos;
      for (;;) {
        while (pos < s.size() &&
               (std::isspace(static_cast<unsigned char>(s[pos])) ||
                s[pos] == ','))
          ++pos;
        if (pos >= s.size())
          zee::fail(zee::ErrorCode::ConfigError, "unterminated TOML array");
        if (s[pos] == ']') {
          ++pos;
          return arr;
        }
        arr.push_back(parse_value(s, pos));
      }
    }
    std::size_t end = pos;
    while (end < s.size() && s[end] != ',' && s[end] != ']') ++end;
    const json v = parse_scalar(s.substr(pos, end - pos));
    pos = end;
    return v;
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    if (line.front() == '[') {
      if (line.back() != ']')
        zee::fail(zee::ErrorCode::ConfigError,
                  "bad TOML table header at line " + std::to_string(lineno));
      const std::string name = line.substr(1, line.size() - 2);
      root[name] = json::object();
      current = &root[name];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      zee::fail(zee::ErrorCode::ConfigError,
                "expected key = value at line " + std::to_string(lineno));
    std::string key = line.substr(0, eq);
    key = key.substr(0, key.find_last_not_of(" \t") + 1);
    std::size_t pos = 0;
    const std::string rhs = line.substr(eq + 1);
    (*current)[key] = parse_value(rhs, pos);
  }
  return root;
}

zee::Vector json_vector(const json& a) {
  zee::Vector v(static_cast<int>(a.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = a.at(i).get<double>();
  return v;
}

struct SimulateSpec {
  zee::DgpConfig config;
  zee::ExperimentTargets targets;
  double alpha = 0.05;
};

SimulateSpec parse_simulate_config(const json& j) {
  SimulateSpec spec;
  auto& cfg = spec.config;
  try {
    cfg.n = j.at("n").get<int>();
    cfg.replicates = j.at("replicates").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.theta0 = json_vector(j.at("theta0"));
    cfg.baseline = j.at("baseline").get<double>();
    cfg.covariate_ranges.clear();
    for (const auto& pr : j.at("covariate_ranges"))
      cfg.covariate_ranges.emplace_back(pr.at(0).get<double>(),
                                        pr.at(1).get<double>());
    cfg.tau = j.at("tau").get<double>();
    cfg.c_max = j.at("c_max").get<double>();
    if (j.contains("misspecify")) cfg.misspecify = j.at("misspecify").get<bool>();
    if (j.contains("ph_beta")) cfg.ph_beta = json_vector(j.at("ph_beta"));
    if (j.contains("sigma")) cfg.sigma = j.at("sigma").get<double>();
    if (j.contains("sampling")) {
      const auto& s = j.at("sampling");
      const std::string kind = s.value("kind", "case_control");
      if (kind == "case_control") {
        cfg.sampling.kind = zee::SamplingDesign::Kind::CaseControl;
        cfg.sampling.pi_event = s.value("pi_event", 1.0);
        cfg.sampling.pi_nonevent = s.value("pi_nonevent", 0.25);
      } else if (kind == "continuous") {
        cfg.sampling.kind = zee::SamplingDesign::Kind::Continuous;
        cfg.sampling.base = s.value("base", 0.5);
        cfg.sampling.slope = s.value("slope", 0.2);
        cfg.sampling.floor = s.value("floor", 0.05);
      } else {
        zee::fail(zee::ErrorCode::ConfigError,
                  "unknown sampling kind '" + kind + "'");
      }
    }
    if (j.contains("auxiliary")) {
      const auto& a = j.at("auxiliary");
      cfg.auxiliary.intercept = a.value("intercept", true);
      cfg.auxiliary.surrogate = a.value("surrogate", true);
      cfg.auxiliary.event = a.value("event", true);
      cfg.auxiliary.noise_sd = a.value("noise_sd", 0.1);
    }
    const auto& t = j.at("targets");
    spec.targets.s_star = t.at("s_star").get<double>();
    spec.targets.z_star = json_vector(t.at("z_star"));
    if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
  } catch (const json::exception& e) {
    zee::fail(zee::ErrorCode::ConfigError,
              std::string("bad simulate config: ") + e.what());
  }
  return spec;
}

json resolved_simulate_json(const SimulateSpec& spec) {
  const auto& cfg = spec.config;
  json j;
  j["n"] = cfg.n;
  j["replicates"] = cfg.replicates;
  j["seed"] = cfg.seed;
  json th = json::array();
  for (int i = 0; i < cfg.theta0.size(); ++i) th.push_back(cfg.theta0[i]);
  j["theta0"] = th;
  j["baseline"] = cfg.baseline;
  json cr = json::array();
  for (const auto& [lo, hi] : cfg.covariate_ranges)
    cr.push_back(json::array({lo, hi}));
  j["covariate_ranges"] = cr;
  j["tau"] = cfg.tau;
  j["c_max"] = cfg.c_max;
  j["misspecify"] = cfg.misspecify;
  if (cfg.ph_beta.size()) {
    json pb = json::array();
    for (int i = 0; i < cfg.ph_beta.size(); ++i) pb.push_back(cfg.ph_beta[i]);
    j["ph_beta"] = pb;
  }
  j["sigma"] = cfg.sigma;
  if (cfg.sampling.kind == zee::SamplingDesign::Kind::CaseControl)
    j["sampling"] = {{"kind", "case_control"},
                     {"pi_event", cfg.sampling.pi_event},
                     {"pi_nonevent", cfg.sampling.pi_nonevent}};
  else
    j["sampling"] = {{"kind", "continuous"},
                     {"base", cfg.sampling.base},
                     {"slope", cfg.sampling.slope},
                     {"floor", cfg.sampling.floor}};
  j["auxiliary"] = {{"intercept", cfg.auxiliary.intercept},
                    {"surrogate", cfg.auxiliary.surrogate},
                    {"event", cfg.auxiliary.event},
                    {"noise_sd", cfg.auxiliary.noise_sd}};
  json zs = json::array();
  for (int i = 0; i < spec.targets.z_star.size(); ++i)
    zs.push_back(spec.targets.z_star[i]);
  j["targets"] = {{"s_star", spec.targets.s_star}, {"z_star", zs}};
  j["alpha"] = spec.alpha;
  return j;
}

// ---- subcommands ----------------------------------------------------------

struct FitArgs {
  std::string data;
  double tau = 0.0;
  double sigma = 1e-6;
  std::string scheme = "rs";
  std::string variance = "both";
  std::vector<std::string> predict;
  bool oracle_check = false;
  double cal_tol = 1e-10;
  int cal_max_iter = 50;
  std::string out;
  std::string lambda_csv;
};

int run_fit(const FitArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const zee::Dataset data = zee::load_csv(args.data, args.tau, args.sigma);

  std::optional<zee::CalibrationSolution> calibration;
  const zee::WeightScheme scheme = scheme_from_flag(
      args.scheme, data, args.cal_tol, args.cal_max_iter, &calibration);
  zee::validate(data, scheme);

  const zee::FitResult fit = zee::fit_additive_hazards(data, scheme);
  zee::FitAnalysis analysis(data, scheme, fit);

  zee::FitOutput out;
  out.n = data.size();
  out.tau = data.tau();
  out.fit = fit;
  out.calibration = calibration;

  const bool robust = args.variance == "robust" || args.variance == "both";
  const bool model = args.variance == "model" || args.variance == "both";
  const zee::Matrix theta_rows = analysis.influence_theta();
  if (robust)
    out.var_theta_robust =
        analysis.robust_variance(theta_rows).estimator_variance();
  if (model)
    out.var_theta_model =
        analysis.model_based_variance(zee::ThetaTarget{}, theta_rows)
            .estimator_variance();

  for (const auto& spec : args.predict) {
    const PredictRequest req = parse_predict(spec);
    zee::PredictionOutput po;
    po.z = req.z;
    po.s = req.s;
    po.estimate = zee::predict_cumhaz(fit, req.z, req.s);
    const zee::Vector rows = analysis.influence_pred(req.s, req.z);
    if (robust)
      po.se_robust = std::sqrt(
          analysis.robust_variance(rows).estimator_variance()(0, 0));
    if (model)
      po.se_model = std::sqrt(
          analysis
              .model_based_variance(zee::PredTarget{req.s, req.z}, rows)
              .estimator_variance()(0, 0));
    out.predictions.push_back(std::move(po));
  }

  if (args.oracle_check) {
    const zee::IndexGrid grid = zee::make_index_grid(data, scheme);
    zee::Vector jumps = zee::Vector::Zero(
        static_cast<int>(grid.event_times.size()));
    for (std::size_t k = 0; k < grid.event_times.size(); ++k)
      for (const auto& [t, a] : fit.lambda.jumps())
        if (t == grid.event_times[k]) jumps[static_cast<int>(k)] = a;
    const zee::Vector res = zee::ee_residuals(data, scheme, fit.theta, jumps);
    out.oracle_max_residual =
        res.size() ? res.cwiseAbs().maxCoeff() : 0.0;
    const zee::OracleSolution root = zee::solve_ee(data, scheme);
    double gap = 0.0;
    for (int j = 0; j < fit.theta.size(); ++j)
      gap = std::max(gap, std::abs(root.theta[j] - fit.theta[j]) /
                              (1.0 + std::abs(fit.theta[j])));
    for (int k = 0; k < root.jumps.size(); ++k)
      gap = std::max(gap, std::abs(root.jumps[k] - jumps[k]) /
                              (1.0 + std::abs(jumps[k])));
    out.oracle_root_gap = gap;
  }

  const std::string body = zee::fit_output_json(out);
  std::cout << body << "\n";

  if (!args.out.empty()) {
    fs::create_directories(args.out);
    write_text(fs::path(args.out) / "result.json", body + "\n");
    if (!args.lambda_csv.empty()) {
      std::ostringstream csv;
      csv << "knot,value,atom,slope\n";
      char buf[128];
      for (std::size_t k = 0; k < fit.lambda.knots().size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n",
                      fit.lambda.knots()[k], fit.lambda(fit.lambda.knots()[k]),
                      fit.lambda.atoms()[k], fit.lambda.slopes()[k]);
        csv << buf;
      }
      write_text(fs::path(args.out) / args.lambda_csv, csv.str());
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    json resolved;
    resolved["data"] = args.data;
    resolved["tau"] = args.tau;
    resolved["sigma"] = args.sigma;
    resolved["scheme"] = args.scheme;
    resolved["variance"] = args.variance;
    resolved["predict"] = args.predict;
    resolved["oracle_check"] = args.oracle_check;
    write_manifest(args.out, "fit", resolved, {args.data}, 0, wall);
  }
  return kExitOk;
}

struct CalibrateArgs {
  std::string data;
  double tau = 0.0;
  double sigma = 1e-6;
  double tol = 1e-10;
  int max_iter = 50;
  std::string out;
};

int run_calibrate(const CalibrateArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  const zee::Dataset data = zee::load_csv(args.data, args.tau, args.sigma);
  zee::CalibrationOptions opts;
  opts.tol = args.tol;
  opts.max_iter = args.max_iter;
  const zee::CalibrationSolution sol = zee::solve_gamma(data, opts);
  const std::string body = zee::calibration_json(sol, data.size());
  std::cout << body << "\n";
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    write_text(fs::path(args.out) / "calibration.json", body + "\n");
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    json resolved;
    resolved["data"] = args.data;
    resolved["tau"] = args.tau;
    resolved["tol"] = args.tol;
    resolved["max_iter"] = args.max_iter;
    write_manifest(args.out, "calibrate", resolved, {args.data}, 0, wall);
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string config;
  std::string out;
  int jobs = 0;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
};

int run_simulate(const SimulateArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  std::ifstream in(args.config);
  if (!in)
    zee::fail(zee::ErrorCode::ConfigError,
              "cannot open config '" + args.config + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();

  json j;
  if (args.config.size() > 5 &&
      args.config.substr(args.config.size() - 5) == ".toml") {
    j = toml_subset_to_json(buffer.str());
  } else {
    try {
      j = json::parse(buffer.str());
    } catch (const json::exception& e) {
      zee::fail(zee::ErrorCode::ConfigError,
                std::string("bad JSON config: ") + e.what());
    }
  }

  SimulateSpec spec = parse_simulate_config(j);
  if (args.seed) spec.config.seed = *args.seed;
  if (args.replicates) spec.config.replicates = *args.replicates;

  zee::log::info("simulate: n=" + std::to_string(spec.config.n) +
                 " replicates=" + std::to_string(spec.config.replicates));
  const zee::MetricsReport report =
      zee::run_experiment(spec.config, spec.targets, spec.alpha, args.jobs);

  const std::string body = zee::report_json(report);
  const std::string table = zee::report_text(report);
  std::cout << table;
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    write_text(fs::path(args.out) / "report.json", body + "\n");
    write_text(fs::path(args.out) / "report.txt", table);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    write_manifest(args.out, "simulate", resolved_simulate_json(spec),
                   {args.config}, spec.config.seed, wall);
  }
  return report.valid ? kExitOk : kExitNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"additive hazards Z-estimation toolkit"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand(
      "fit", "fit the additive hazards model on a survival CSV");
  fit_cmd->add_option("--data", fit_args.data, "input CSV")->required();
  fit_cmd->add_option("--tau", fit_args.tau, "administrative horizon")
      ->required();
  fit_cmd->add_option("--sigma", fit_args.sigma,
                      "assumed lower bound for sampling probabilities");
  fit_cmd->add_option("--scheme", fit_args.scheme, "rs, ipw, or cal")
      ->check(CLI::IsMember({"rs", "ipw", "cal"}));
  fit_cmd->add_option("--variance", fit_args.variance,
                      "robust, model, or both")
      ->check(CLI::IsMember({"robust", "model", "both"}));
  fit_cmd->add_option("--predict", fit_args.predict,
                      "z1,z2,...@time (repeatable)");
  fit_cmd->add_flag("--oracle-check", fit_args.oracle_check,
                    "verify the fit against the grid-system root");
  fit_cmd->add_option("--cal-tol", fit_args.cal_tol,
                      "calibration residual tolerance");
  fit_cmd->add_option("--cal-max-iter", fit_args.cal_max_iter,
                      "calibration iteration cap");
  fit_cmd->add_option("--out", fit_args.out, "output directory");
  fit_cmd->add_option("--lambda-csv", fit_args.lambda_csv,
                      "also export the fitted curve as CSV (needs --out)");

  CalibrateArgs cal_args;
  auto* cal_cmd = app.add_subcommand(
      "calibrate", "solve the auxiliary calibration weights");
  cal_cmd->add_option("--data", cal_args.data, "input CSV")->required();
  cal_cmd->add_option("--tau", cal_args.tau, "administrative horizon")
      ->required();
  cal_cmd->add_option("--sigma", cal_args.sigma,
                      "assumed lower bound for sampling probabilities");
  cal_cmd->add_option("--tol", cal_args.tol, "residual tolerance");
  cal_cmd->add_option("--max-iter", cal_args.max_iter, "iteration cap");
  cal_cmd->add_option("--out", cal_args.out, "output directory");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "run the Monte Carlo experiment driver");
  sim_cmd->add_option("--config", sim_args.config, "TOML or JSON config")
      ->required();
  sim_cmd->add_option("--out", sim_args.out, "output directory");
  sim_cmd->add_option("--jobs", sim_args.jobs,
                      "replicate parallelism (default: all cores)");
  std::uint64_t seed_opt = 0;
  auto* seed_flag =
      sim_cmd->add_option("--seed", seed_opt, "override the config seed");
  int reps_opt = 0;
  auto* reps_flag = sim_cmd->add_option("--replicates", reps_opt,
                                        "override the replicate count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitData;
  }

  try {
    if (*fit_cmd) return run_fit(fit_args);
    if (*cal_cmd) return run_calibrate(cal_args);
    if (*sim_cmd) {
      if (*seed_flag) sim_args.seed = seed_opt;
      if (*reps_flag) sim_args.replicates = reps_opt;
      return run_simulate(sim_args);
    }
  } catch (const zee::Error& e) {
    std::cerr << "zee: " << e.what() << "\n";
    return e.data_error() ? kExitData : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "zee: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
