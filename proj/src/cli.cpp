#include "esm/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

#include "esm/config.hpp"
#include "esm/csv.hpp"
#include "esm/ensemble.hpp"
#include "esm/errors.hpp"
#include "esm/infer.hpp"
#include "esm/serialize.hpp"
#include "esm/sim.hpp"
#include "esm/subsample.hpp"
#include "esm/thread_pool.hpp"

namespace esm {

namespace {

constexpr const char* kVersion = "1.0.0";

NetworkConfig build_net_config(const Config& cfg,
                               const std::vector<int>& default_widths) {
  NetworkConfig net;
  net.widths = cfg.get_int_list("net.widths", default_widths);
  net.learning_rate = cfg.get_double("net.learning_rate", 0.1);
  net.epochs = static_cast<int>(cfg.get_int("net.epochs", 500));
  net.batch_size = static_cast<int>(cfg.get_int("net.batch_size", 0));
  net.dropout_rate = cfg.get_double("net.dropout_rate", 0.1);
  net.weight_decay = cfg.get_double("net.weight_decay", 0.02);
  net.clamp_F = cfg.get_double("net.clamp_F", 3.0);
  return net;
}

FamilySpec build_family(const Config& cfg) {
  FamilySpec spec;
  spec.family = parse_family(cfg.require_string("family"));
  spec.n_trial = static_cast<int>(cfg.get_int("n_trial", 1));
  spec.validate();
  return spec;
}

SimDesign build_sim_design(const Config& cfg) {
  SimDesign design;
  design.family = build_family(cfg);
  design.n = static_cast<int>(cfg.get_int("n", 400));
  design.p = static_cast<int>(cfg.get_int("p", 10));
  design.r = static_cast<int>(cfg.get_int("r", 0));
  design.gamma = cfg.get_double("gamma", 0.85);
  design.B = static_cast<int>(cfg.get_int("B", 400));
  design.reps = static_cast<int>(cfg.get_int("reps", 100));
  design.n_test = static_cast<int>(cfg.get_int("n_test", 40));
  design.alpha = cfg.get_double("alpha", 0.05);
  design.seed = cfg.get_u64("seed", 1);
  design.signal = parse_signal(cfg.get_string("signal", "baseline_g"));
  design.force_identical_reps = cfg.get_bool("force_identical_reps", false);
  design.net = build_net_config(cfg, {design.p, 128, 64, 1});
  design.validate();
  return design;
}

void write_manifest(const std::string& path, const std::string& command,
                    const Config& cfg, uint64_t master_seed, int threads) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["version"] = kVersion;
  doc["master_seed"] = master_seed;
  doc["threads"] = threads;
  nlohmann::json effective = nlohmann::json::object();
  for (const auto& [key, value] : cfg.entries()) effective[key] = value;
  doc["config"] = effective;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
}

int report_error(const std::exception& e, int code) {
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

}  // namespace

int resolve_thread_request(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("ESM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::vector<std::string>& overrides, int threads) {
  try {
    Config cfg = Config::from_file(config_path);
    for (const auto& assignment : overrides) cfg.apply_override(assignment);
    const SimDesign design = build_sim_design(cfg);
    cfg.check_all_consumed();

    std::filesystem::create_directories(out_dir);
    const int workers = resolve_threads(resolve_thread_request(threads));

    const auto started = std::chrono::steady_clock::now();
    const ExperimentReport report =
        run_experiment(design, workers, [&](int done, int total) {
          const auto elapsed =
              std::chrono::duration_cast<std::chrono::seconds>(
                  std::chrono::steady_clock::now() - started)
                  .count();
          std::fprintf(stderr, "rep %d/%d (%llds elapsed)\n", done, total,
                       static_cast<long long>(elapsed));
          std::fflush(stderr);
        });

    write_metrics_csv(report, out_dir + "/metrics.csv");
    write_per_point_csv(report, out_dir + "/per_point.csv");
    write_manifest(out_dir + "/manifest.json", "simulate", cfg, design.seed,
                   workers);

    std::cout << "n=" << report.n << " r=" << report.r_used
              << " B=" << report.B << " reps=" << report.reps << "\n";
    std::cout << "Bias_f,MAE_f,Bias_mean,MAE_mean,EmpSD,SE,SE_c,CP,AIL\n";
    std::cout << metric_table(report) << "\n";
    return 0;
  } catch (const ValidationError& e) {
    return report_error(e, 2);
  } catch (const std::exception& e) {
    return report_error(e, 1);
  }
}

int cmd_fit(const std::string& config_path, const std::string& data_csv,
            const std::string& model_out,
            const std::vector<std::string>& overrides, bool coerce,
            int threads) {
  try {
    Config cfg = Config::from_file(config_path);
    for (const auto& assignment : overrides) cfg.apply_override(assignment);

    const FamilySpec spec = build_family(cfg);
    const std::string response = cfg.get_string("response", "y");
    const int r_explicit = static_cast<int>(cfg.get_int("r", 0));
    const double gamma = cfg.get_double("gamma", 0.85);
    const int B = static_cast<int>(cfg.get_int("B", 400));
    const uint64_t seed = cfg.get_u64("seed", 1);
    const bool standardize = cfg.get_bool("standardize", false);

    const CsvTable table = read_csv(data_csv);
    NumericData data = extract_dataset(table, response);
    const int n = static_cast<int>(data.X.rows());
    const int p = static_cast<int>(data.X.cols());
    for (int i = 0; i < n; ++i) {
      data.y(i) = validate_response(spec, data.y(i), i + 1, coerce);
    }

    const NetworkConfig net = build_net_config(cfg, {p, 128, 64, 1});
    cfg.check_all_consumed();
    if (net.input_dim() != p) {
      throw ValidationError("net.widths starts at " +
                            std::to_string(net.input_dim()) + " but " +
                            data_csv + " has p = " + std::to_string(p) +
                            " feature columns");
    }
    const int r = r_explicit > 0 ? r_explicit : subsample_size_from_gamma(n, gamma);
    const int workers = resolve_threads(resolve_thread_request(threads));

    const EnsembleModel model =
        fit_ensemble(data.X, data.y, spec, net, r, B, seed, workers, standardize);
    save_ensemble_file(model, model_out);
    write_manifest(model_out + ".manifest.json", "fit", cfg, seed, workers);

    double loss_sum = 0.0;
    for (const Network& network : model.networks) {
      loss_sum += network.final_train_loss;
    }
    std::cout << "n=" << n << " p=" << p << " r=" << r << " B=" << B
              << " mean_final_train_loss=" << loss_sum / model.networks.size()
              << "\n";
    return 0;
  } catch (const ValidationError& e) {
    return report_error(e, 2);
  } catch (const std::exception& e) {
    return report_error(e, 1);
  }
}

int cmd_predict(const std::string& model_path, const std::string& data_csv,
                double alpha, const std::string& out_csv) {
  try {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ValidationError("alpha must lie in (0, 1), got " +
                            std::to_string(alpha));
    }
    const EnsembleModel model = load_ensemble_file(model_path);
    const CsvTable table = read_csv(data_csv);
    const Matrix X = extract_features(table);
    if (X.cols() != model.input_dim()) {
      throw ValidationError("model expects p = " +
                            std::to_string(model.input_dim()) +
                            " feature columns, " + data_csv + " has " +
                            std::to_string(X.cols()));
    }

    std::ofstream out(out_csv, std::ios::binary);
    if (!out) throw ValidationError("cannot open " + out_csv + " for writing");
    out << "row_id,fhat_canonical,mean_estimate,se_uncorrected,se_corrected,"
           "clamped,mean_ci_lower,mean_ci_upper\n";
    char buf[32];
    auto cell = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    };
    std::vector<double> row(X.cols());
    for (long i = 0; i < X.rows(); ++i) {
      for (long j = 0; j < X.cols(); ++j) row[j] = X(i, j);
      const InferenceResult res = confidence_interval(model, row, alpha);
      out << (i + 1);
      cell(res.fhatB);
      cell(psi_prime(model.spec, res.fhatB));
      cell(res.se_uncorrected);
      cell(res.se_corrected);
      out << ',' << (res.clamped_negative ? 1 : 0);
      cell(res.ci_lower_mean);
      cell(res.ci_upper_mean);
      out << "\n";
    }
    out.close();
    if (!out) throw ValidationError("write failure while saving " + out_csv);

    Config empty = Config::from_string("");
    empty.apply_override("model=" + model_path);
    empty.apply_override("alpha=" + std::to_string(alpha));
    write_manifest(out_csv + ".manifest.json", "predict", empty,
                   model.master_seed, 1);

    std::cout << "wrote " << X.rows() << " rows to " << out_csv << "\n";
    return 0;
  } catch (const ValidationError& e) {
    return report_error(e, 2);
  } catch (const std::exception& e) {
    return report_error(e, 1);
  }
}

}  // namespace esm
