// attnreg command-line harness: simulate, bench, fit, predict, weights.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attnreg/csv.hpp"
#include "attnreg/dgp.hpp"
#include "attnreg/error.hpp"
#include "attnreg/experiment.hpp"
#include "attnreg/workflow.hpp"

namespace {

using namespace attnreg;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::RankOutOfRange:
      return kExitUsage;
    case ErrorKind::ParseError:
    case ErrorKind::NonNumericColumn:
    case ErrorKind::MissingTarget:
    case ErrorKind::IoError:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::DegenerateTarget:
    case ErrorKind::DegenerateSignal:
      return kExitData;
    default:
      return kExitNumerical;
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw Error(ErrorKind::InvalidArgument, "expected a boolean, got '" + s + "'");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
  return out;
}

// Options shared by every subcommand that trains something.
struct ModelFlags {
  std::string method = "ols";
  int heads = 5;
  double lambda = 1e-3;
  int rank = 2;
  bool diagonal_mask = false;
  int max_iter = 500;

  void add(CLI::App* app) {
    app->add_option("--method", method, "ols | ridge[:lambda] | pcr[:rank] | attreg");
    app->add_option("--heads", heads, "attreg heads");
    app->add_option("--lambda", lambda, "ridge penalty (ridge and attreg)");
    app->add_option("--rank", rank, "pcr components");
    app->add_flag("--diagonal-mask", diagonal_mask, "attreg: mask self-attention in training");
    app->add_option("--max-iter", max_iter, "attreg: L-BFGS iteration cap");
  }

  AttRegConfig attreg_config() const {
    AttRegConfig c;
    c.heads = heads;
    c.ridge_penalty = lambda;
    c.diagonal_mask = diagonal_mask;
    c.max_iterations = max_iter;
    return c;
  }

  bench::MethodSpec spec(const std::string& text) const {
    return bench::parse_method(text, lambda, rank, attreg_config());
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regression as attention: linear and softmax attention estimators"};
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "write a simulated DGP dataset as CSV");
  std::string sim_dgp = "friedman1";
  int sim_n = 500;
  double sim_snr = 2.0;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  simulate->add_option("--dgp", sim_dgp, "linear|friedman1|friedman2|friedman3|rotated_sine|soft_radial");
  simulate->add_option("--n", sim_n, "rows");
  simulate->add_option("--snr", sim_snr, "signal-to-noise ratio");
  simulate->add_option("--seed", sim_seed, "seed");
  simulate->add_option("--out", sim_out, "output CSV (stdout when omitted)");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "run the Monte Carlo comparison grid");
  std::string config_path;
  std::vector<std::string> b_dgps;
  std::vector<int> b_ns;
  std::vector<double> b_snrs;
  std::vector<std::string> b_methods;
  int b_reps = 10;
  int b_test_size = 1000;
  int b_threads = 1;
  bool b_full = false;
  std::uint64_t b_seed = 20250101;
  std::string b_out = "bench_out";
  ModelFlags b_model;
  bench_cmd->add_option("--config", config_path, "key = value config file");
  bench_cmd->add_option("--dgp", b_dgps, "DGPs (comma-separated)")->delimiter(',');
  bench_cmd->add_option("--n", b_ns, "training sizes (comma-separated)")->delimiter(',');
  bench_cmd->add_option("--snr", b_snrs, "SNR values (comma-separated)")->delimiter(',');
  bench_cmd->add_option("--method", b_methods, "methods (comma-separated)")->delimiter(',');
  bench_cmd->add_option("--heads", b_model.heads, "attreg heads");
  bench_cmd->add_option("--lambda", b_model.lambda, "ridge / attreg penalty");
  bench_cmd->add_option("--rank", b_model.rank, "pcr components");
  bench_cmd->add_flag("--diagonal-mask", b_model.diagonal_mask, "attreg leave-one-out training");
  bench_cmd->add_option("--max-iter", b_model.max_iter, "attreg iteration cap");
  bench_cmd->add_option("--reps", b_reps, "replications");
  bench_cmd->add_option("--test-size", b_test_size, "test set size J");
  bench_cmd->add_option("--threads", b_threads, "worker threads");
  bench_cmd->add_flag("--full", b_full, "use N in {500,1000,2500,5000}");
  bench_cmd->add_option("--seed", b_seed, "base seed");
  bench_cmd->add_option("--out", b_out, "output directory");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to a CSV file");
  workflow::FitOptions fit_opts;
  ModelFlags fit_model;
  std::string fit_out = "model.txt";
  std::string fit_report;
  bool fit_no_intercept = false;
  fit_cmd->add_option("input", fit_opts.input_path, "CSV with header")->required();
  fit_cmd->add_option("--target", fit_opts.target, "outcome column");
  fit_cmd->add_option("--drop", fit_opts.drop, "columns to ignore")->delimiter(',');
  fit_cmd->add_option("--test-fraction", fit_opts.test_fraction, "held-out share");
  fit_cmd->add_flag("--standardize", fit_opts.standardize, "z-score predictors");
  fit_cmd->add_flag("--no-intercept", fit_no_intercept, "linear methods: no constant column");
  fit_cmd->add_option("--seed", fit_opts.seed, "split / init seed");
  fit_cmd->add_option("--out", fit_out, "model artifact path");
  fit_cmd->add_option("--report", fit_report, "metrics JSON path (default <out>.metrics.json)");
  fit_model.add(fit_cmd);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "apply a fitted model to a CSV file");
  std::string pred_model, pred_input, pred_out;
  predict_cmd->add_option("--model", pred_model, "model artifact")->required();
  predict_cmd->add_option("input", pred_input, "CSV with the model's predictor columns")->required();
  predict_cmd->add_option("--out", pred_out, "output CSV (stdout when omitted)");

  // weights
  auto* weights_cmd = app.add_subcommand("weights", "export attention weights as CSV");
  workflow::WeightOptions w_opts;
  ModelFlags w_model;
  std::string w_activation = "identity";
  double w_temperature = 1.0;
  double w_nu = 1.0;
  bool w_no_intercept = false;
  std::string w_out;
  weights_cmd->add_option("--query", w_opts.query_path, "query CSV")->required();
  weights_cmd->add_option("--keys", w_opts.key_path, "key CSV (unless --model)");
  weights_cmd->add_option("--model", w_opts.model_path, "fitted artifact");
  weights_cmd->add_option("--activation", w_activation, "identity|softmax|relu|elu");
  weights_cmd->add_option("--temperature", w_temperature, "score divisor");
  weights_cmd->add_option("--nu", w_nu, "ELU scale");
  weights_cmd->add_option("--head", w_opts.head, "attreg head index (0-based)");
  weights_cmd->add_option("--drop", w_opts.drop, "columns to ignore")->delimiter(',');
  weights_cmd->add_flag("--no-intercept", w_no_intercept, "no constant column");
  weights_cmd->add_option("--out", w_out, "output CSV (stdout when omitted)");
  w_model.add(weights_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) {
      const auto data = dgp::generate({dgp::parse_kind(sim_dgp)}, sim_n, sim_snr, sim_seed);
      if (sim_out.empty()) {
        dgp::write_csv(std::cout, data);
      } else {
        auto out = open_output(sim_out);
        dgp::write_csv(out, data);
      }
      return kExitOk;
    }

    if (*bench_cmd) {
      bench::ExperimentConfig cfg = bench::ExperimentConfig::desk_scale();
      std::vector<std::string> dgp_names;
      std::vector<std::string> method_names{"ols", "attreg"};
      // Config file first, then explicit flags win.
      if (!config_path.empty()) {
        for (const auto& [key, value] : bench::read_key_values(config_path)) {
          if (key == "dgp") dgp_names = split_list(value);
          else if (key == "n") { cfg.sample_sizes.clear(); for (auto& v : split_list(value)) cfg.sample_sizes.push_back(std::stoi(v)); }
          else if (key == "snr") { cfg.snrs.clear(); for (auto& v : split_list(value)) cfg.snrs.push_back(std::stod(v)); }
          else if (key == "method") method_names = split_list(value);
          else if (key == "reps") cfg.replications = std::stoi(value);
          else if (key == "test-size") cfg.test_size = std::stoi(value);
          else if (key == "threads") cfg.threads = std::stoi(value);
          else if (key == "seed") cfg.base_seed = std::stoull(value);
          else if (key == "out") cfg.output_path = value;
          else if (key == "heads") b_model.heads = bench_cmd->count("--heads") ? b_model.heads : std::stoi(value);
          else if (key == "lambda") b_model.lambda = bench_cmd->count("--lambda") ? b_model.lambda : std::stod(value);
          else if (key == "rank") b_model.rank = bench_cmd->count("--rank") ? b_model.rank : std::stoi(value);
          else if (key == "max-iter") b_model.max_iter = bench_cmd->count("--max-iter") ? b_model.max_iter : std::stoi(value);
          else if (key == "diagonal-mask") b_model.diagonal_mask = b_model.diagonal_mask || parse_bool(value);
          else if (key == "full") b_full = b_full || parse_bool(value);
          else throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
        }
      }
      if (b_full) cfg.sample_sizes = bench::ExperimentConfig::full_grid().sample_sizes;
      if (!b_dgps.empty()) dgp_names = b_dgps;
      if (!b_ns.empty()) cfg.sample_sizes = b_ns;
      if (!b_snrs.empty()) cfg.snrs = b_snrs;
      if (!b_methods.empty()) method_names = b_methods;
      if (bench_cmd->count("--reps")) cfg.replications = b_reps;
      if (bench_cmd->count("--test-size")) cfg.test_size = b_test_size;
      if (bench_cmd->count("--threads")) cfg.threads = b_threads;
      if (bench_cmd->count("--seed")) cfg.base_seed = b_seed;
      if (bench_cmd->count("--out")) cfg.output_path = b_out;
      if (!dgp_names.empty()) {
        cfg.dgps.clear();
        for (const auto& name : dgp_names) cfg.dgps.push_back(dgp::parse_kind(name));
      }
      cfg.methods.clear();
      for (const auto& name : method_names) cfg.methods.push_back(b_model.spec(name));

      const auto result = bench::run_experiment(cfg);
      bench::write_results(result, cfg, cfg.output_path);
      for (const auto& e : result.summary) {
        std::cout << e.dgp << '\t' << e.method << "\tmean_r2=" << csv::format_double(e.mean)
                  << "\tsd=" << csv::format_double(e.sd) << '\n';
      }
      return kExitOk;
    }

    if (*fit_cmd) {
      fit_opts.method = fit_model.spec(fit_model.method);
      fit_opts.intercept = !fit_no_intercept;
      const auto [artifact, report] = workflow::fit_csv(fit_opts);
      {
        auto out = open_output(fit_out);
        workflow::save_artifact(out, artifact);
      }
      const std::string report_path = fit_report.empty() ? fit_out + ".metrics.json" : fit_report;
      auto out = open_output(report_path);
      out << report.to_json() << '\n';
      std::cout << report.to_json() << '\n';
      return kExitOk;
    }

    if (*predict_cmd) {
      std::ifstream in(pred_model);
      if (!in) throw Error(ErrorKind::IoError, "cannot open '" + pred_model + "'");
      const auto artifact = workflow::load_artifact(in);
      const auto table = csv::read_file(pred_input);
      const Vector pred = artifact.predict(workflow::select_predictors(table, artifact));
      Matrix body(pred.size(), 2);
      for (Eigen::Index i = 0; i < pred.size(); ++i) {
        body(i, 0) = static_cast<double>(i);
        body(i, 1) = pred(i);
      }
      if (pred_out.empty()) {
        csv::write(std::cout, {"row", "prediction"}, body);
      } else {
        auto out = open_output(pred_out);
        csv::write(out, {"row", "prediction"}, body);
      }
      return kExitOk;
    }

    if (*weights_cmd) {
      if (w_opts.model_path.empty() && w_opts.key_path.empty()) {
        throw Error(ErrorKind::InvalidArgument, "weights needs --keys or --model");
      }
      w_opts.method = w_model.spec(w_model.method);
      if (w_opts.model_path.empty() && w_opts.method.kind == bench::MethodKind::attreg) {
        throw Error(ErrorKind::InvalidArgument, "attreg weights need a fitted --model");
      }
      w_opts.activation.tag = parse_activation(w_activation);
      w_opts.activation.temperature = w_temperature;
      w_opts.activation.nu = w_nu;
      w_opts.intercept = !w_no_intercept;
      const auto table = workflow::export_weights(w_opts);
      if (w_out.empty()) {
        workflow::write_weights(std::cout, table);
      } else {
        auto out = open_output(w_out);
        workflow::write_weights(out, table);
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::logic_error& e) {
    // std::stoi and friends on malformed config values.
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
