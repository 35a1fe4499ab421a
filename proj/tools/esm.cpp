#include <string>
#include <vector>

#include "CLI11.hpp"

#include "esm/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ensemble subsampling estimator with bias-corrected "
               "infinitesimal-jackknife confidence intervals"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_csv, model_path, out_csv;
  std::vector<std::string> overrides;
  int threads = 0;
  bool coerce = false;
  double alpha = 0.05;

  auto* sim = app.add_subcommand("simulate",
                                 "Run a synthetic coverage experiment");
  sim->add_option("--config", config_path, "Config file")->required();
  sim->add_option("--out", out_dir, "Output directory")->required();
  sim->add_option("--set", overrides, "Override a config entry (key=value)");
  sim->add_option("--threads", threads,
                  "Worker threads (default: ESM_THREADS or hardware count)");

  auto* fit = app.add_subcommand("fit", "Fit an ensemble to a CSV dataset");
  fit->add_option("--config", config_path, "Config file")->required();
  fit->add_option("--data", data_csv, "Training CSV with header")->required();
  fit->add_option("--model-out", model_path, "Output model path")->required();
  fit->add_option("--set", overrides, "Override a config entry (key=value)");
  fit->add_flag("--coerce", coerce,
                "Snap near-integer responses for discrete families");
  fit->add_option("--threads", threads,
                  "Worker threads (default: ESM_THREADS or hardware count)");

  auto* pred = app.add_subcommand(
      "predict", "Point estimates and confidence intervals for new rows");
  pred->add_option("--model", model_path, "Fitted model file")->required();
  pred->add_option("--data", data_csv, "Feature CSV with header")->required();
  pred->add_option("--alpha", alpha, "Miscoverage level (default 0.05)");
  pred->add_option("--out", out_csv, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (sim->parsed()) {
    return esm::cmd_simulate(config_path, out_dir, overrides, threads);
  }
  if (fit->parsed()) {
    return esm::cmd_fit(config_path, data_csv, model_path, overrides, coerce,
                        threads);
  }
  return esm::cmd_predict(model_path, data_csv, alpha, out_csv);
}
