#include "esm/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "esm/errors.hpp"
#include "esm/infer.hpp"
#include "esm/subsample.hpp"

namespace esm {

SignalVariant parse_signal(const std::string& text) {
  if (text == "baseline_g") return SignalVariant::baseline_g;
  if (text == "tanh_g") return SignalVariant::tanh_g;
  throw ValidationError("signal must be baseline_g or tanh_g, got \"" + text +
                        "\"");
}

const char* signal_name(SignalVariant variant) {
  return variant == SignalVariant::baseline_g ? "baseline_g" : "tanh_g";
}

double signal_g(SignalVariant variant, std::span<const double> x) {
  switch (variant) {
    case SignalVariant::baseline_g:
      if (x.size() < 3) {
        throw ValidationError("baseline_g needs at least 3 features");
      }
      return x[0] + 0.25 * x[1] * x[1] + 0.1 * std::atan(0.5 * x[2] - 0.3);
    case SignalVariant::tanh_g:
      if (x.size() < 5) {
        throw ValidationError("tanh_g needs at least 5 features");
      }
      return 2.0 * std::tanh((1.5 * x[0] + 0.6 * (x[1] * x[1] - 1.0) +
                              0.4 * x[2] * std::tanh(x[3]) +
                              0.15 * std::sin(x[4])) /
                             2.5);
  }
  throw ValidationError("unknown signal variant");
}

int SimDesign::resolve_r() const {
  return r > 0 ? r : subsample_size_from_gamma(n, gamma);
}

void SimDesign::validate() const {
  family.validate();
  if (n < 3) throw ValidationError("n must be at least 3");
  const int min_p = signal == SignalVariant::baseline_g ? 3 : 5;
  if (p < min_p) {
    throw ValidationError(std::string("signal ") + signal_name(signal) +
                          " needs p >= " + std::to_string(min_p));
  }
  if (B < 1) throw ValidationError("B must be at least 1");
  if (reps < 2) throw ValidationError("reps must be at least 2");
  if (n_test < 1) throw ValidationError("n_test must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ValidationError("alpha must lie in (0, 1)");
  }
  net.validate();
  if (net.input_dim() != p) {
    throw ValidationError("net.widths starts at " +
                          std::to_string(net.input_dim()) +
                          " but the design has p = " + std::to_string(p));
  }
  const int rr = resolve_r();
  if (rr < 1 || rr >= n) {
    throw ValidationError("resolved subsample size r = " + std::to_string(rr) +
                          " must lie in [1, n)");
  }
}

double true_f0(const FamilySpec& spec, double g) {
  if (spec.family == Family::poisson) return std::log(softplus(g));
  return g;
}

double draw_response(const FamilySpec& spec, double f0, RngStream& rng) {
  switch (spec.family) {
    case Family::gaussian:
      return f0 + rng.normal();
    case Family::bernoulli:
      return rng.uniform01() <= sigmoid(f0) ? 1.0 : 0.0;
    case Family::binomial: {
      const double prob = sigmoid(f0);
      int hits = 0;
      for (int t = 0; t < spec.n_trial; ++t) {
        if (rng.uniform01() <= prob) ++hits;
      }
      return static_cast<double>(hits);
    }
    case Family::poisson: {
      const double lambda = std::exp(f0);
      const double u = rng.uniform01();
      double pmf = std::exp(-lambda);
      double cdf = pmf;
      int k = 0;
      while (u > cdf && k < 1000) {
        ++k;
        pmf *= lambda / k;
        cdf += pmf;
      }
      return static_cast<double>(k);
    }
  }
  throw ValidationError("unknown family");
}

Dataset generate_dataset(const SimDesign& design, RngStream& rng) {
  Dataset data;
  data.X.resize(design.n, design.p);
  data.y.resize(design.n);
  data.f0.resize(design.n);
  for (int i = 0; i < design.n; ++i) {
    for (int j = 0; j < design.p; ++j) data.X(i, j) = rng.normal();
  }
  std::vector<double> row(design.p);
  for (int i = 0; i < design.n; ++i) {
    for (int j = 0; j < design.p; ++j) row[j] = data.X(i, j);
    const double g = signal_g(design.signal, row);
    data.f0(i) = true_f0(design.family, g);
    data.y(i) = draw_response(design.family, data.f0(i), rng);
  }
  return data;
}

namespace {

// Welford accumulation: constant inputs yield an exactly zero spread, which
// the textbook sum-of-squares form loses to cancellation (worse under FMA
// contraction).
struct RunningStats {
  int count = 0;
  double mu = 0.0;
  double m2 = 0.0;
  void add(double v) {
    ++count;
    const double d = v - mu;
    mu += d / count;
    m2 += d * (v - mu);
  }
  double mean() const { return mu; }
  // sample SD, ddof = 1; 0 when fewer than 2 observations
  double sd() const {
    if (count < 2) return 0.0;
    const double var = m2 / (count - 1);
    return var > 0.0 ? std::sqrt(var) : 0.0;
  }
};

AggregateMetric aggregate_over_points(const std::vector<PointSummary>& pts,
                                      double PointSummary::* field) {
  RunningStats stats;
  for (const auto& pt : pts) stats.add(pt.*field);
  return {stats.mean(), stats.sd()};
}

std::string format_cell(const AggregateMetric& m) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f(%.2f)", m.mean, m.sd);
  return buf;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * fraction);
  return buf;
}

}  // namespace

ExperimentReport run_experiment(const SimDesign& design, int threads,
                                const ProgressFn& progress) {
  design.validate();
  const int r_used = design.resolve_r();
  const int n_test = design.n_test;
  const int reps = design.reps;

  RngStream test_stream(derive_seed(design.seed, stream_tag::kTestPoints), 0);
  std::vector<std::vector<double>> test_x(n_test,
                                          std::vector<double>(design.p));
  for (auto& pt : test_x) {
    for (double& v : pt) v = test_stream.normal();
  }

  std::vector<double> f0_test(n_test), mean_test(n_test);
  for (int t = 0; t < n_test; ++t) {
    f0_test[t] = true_f0(design.family, signal_g(design.signal, test_x[t]));
    mean_test[t] = psi_prime(design.family, f0_test[t]);
  }

  // rep-major storage so the aggregation below is a pure reduction
  std::vector<double> fhat(static_cast<size_t>(reps) * n_test);
  std::vector<double> se_u(fhat.size()), se_c(fhat.size());
  std::vector<double> ci_lo(fhat.size()), ci_hi(fhat.size());

  for (int s = 0; s < reps; ++s) {
    const uint64_t s_eff = design.force_identical_reps ? 0 : s;
    try {
      RngStream data_stream(derive_seed(design.seed, stream_tag::kRepData, s_eff), 0);
      const Dataset data = generate_dataset(design, data_stream);
      const uint64_t master = derive_seed(design.seed, stream_tag::kRepFit, s_eff);
      const EnsembleModel model =
          fit_ensemble(data.X, data.y, design.family, design.net, r_used,
                       design.B, master, threads);
      for (int t = 0; t < n_test; ++t) {
        try {
          const InferenceResult res =
              confidence_interval(model, test_x[t], design.alpha);
          const size_t k = static_cast<size_t>(s) * n_test + t;
          fhat[k] = res.fhatB;
          se_u[k] = res.se_uncorrected;
          se_c[k] = res.se_corrected;
          ci_lo[k] = res.ci_lower_mean;
          ci_hi[k] = res.ci_upper_mean;
        } catch (const std::runtime_error& e) {
          throw std::runtime_error("rep " + std::to_string(s + 1) + ", point " +
                                   std::to_string(t + 1) + ": " + e.what());
        }
      }
    } catch (const TrainingError& e) {
      throw e.with_prefix("rep " + std::to_string(s + 1) + ": ");
    }
    if (progress) progress(s + 1, reps);
  }

  ExperimentReport report;
  report.n = design.n;
  report.r_used = r_used;
  report.B = design.B;
  report.reps = reps;
  report.per_point.resize(n_test);
  for (int t = 0; t < n_test; ++t) {
    PointSummary& pt = report.per_point[t];
    pt.x = test_x[t];
    pt.true_f0 = f0_test[t];
    pt.true_mean = mean_test[t];

    RunningStats f_stats;
    double abs_err_f = 0.0, bias_m = 0.0, abs_err_m = 0.0;
    double sum_se = 0.0, sum_se_c = 0.0, sum_ail = 0.0;
    int covered = 0;
    for (int s = 0; s < reps; ++s) {
      const size_t k = static_cast<size_t>(s) * n_test + t;
      f_stats.add(fhat[k]);
      abs_err_f += std::abs(fhat[k] - pt.true_f0);
      const double m = psi_prime(design.family, fhat[k]);
      bias_m += m - pt.true_mean;
      abs_err_m += std::abs(m - pt.true_mean);
      sum_se += se_u[k];
      sum_se_c += se_c[k];
      sum_ail += ci_hi[k] - ci_lo[k];
      if (ci_lo[k] <= pt.true_mean && pt.true_mean <= ci_hi[k]) ++covered;
    }
    pt.mean_fhat = f_stats.mean();
    pt.bias_f = pt.mean_fhat - pt.true_f0;
    pt.mae_f = abs_err_f / reps;
    pt.abs_bias_f = std::abs(pt.bias_f);
    pt.bias_mean = bias_m / reps;
    pt.mae_mean = abs_err_m / reps;
    pt.empsd = f_stats.sd();
    pt.mean_se = sum_se / reps;
    pt.mean_se_c = sum_se_c / reps;
    pt.coverage = static_cast<double>(covered) / reps;
    pt.mean_ail = sum_ail / reps;
  }

  report.bias_f = aggregate_over_points(report.per_point, &PointSummary::bias_f);
  report.mae_f = aggregate_over_points(report.per_point, &PointSummary::mae_f);
  report.bias_mean =
      aggregate_over_points(report.per_point, &PointSummary::bias_mean);
  report.mae_mean =
      aggregate_over_points(report.per_point, &PointSummary::mae_mean);
  report.empsd = aggregate_over_points(report.per_point, &PointSummary::empsd);
  report.se = aggregate_over_points(report.per_point, &PointSummary::mean_se);
  report.se_c = aggregate_over_points(report.per_point, &PointSummary::mean_se_c);
  report.cp = aggregate_over_points(report.per_point, &PointSummary::coverage);
  report.ail = aggregate_over_points(report.per_point, &PointSummary::mean_ail);
  return report;
}

std::string metric_table(const ExperimentReport& report) {
  std::string row;
  row += format_cell(report.bias_f) + ",";
  row += format_cell(report.mae_f) + ",";
  row += format_cell(report.bias_mean) + ",";
  row += format_cell(report.mae_mean) + ",";
  row += format_cell(report.empsd) + ",";
  row += format_cell(report.se) + ",";
  row += format_cell(report.se_c) + ",";
  row += format_percent(report.cp.mean) + ",";
  row += format_cell(report.ail);
  return row;
}

void write_metrics_csv(const ExperimentReport& report,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out << "Bias_f,MAE_f,Bias_mean,MAE_mean,EmpSD,SE,SE_c,CP,AIL\n";
  out << metric_table(report) << "\n";
}

void write_per_point_csv(const ExperimentReport& report,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  const size_t p = report.per_point.empty() ? 0 : report.per_point[0].x.size();
  out << "point_id";
  for (size_t j = 1; j <= p; ++j) out << ",x" << j;
  out << ",true_f0,true_mean,mean_fhat,bias_f,mae_f,abs_bias_f,bias_mean,"
         "mae_mean,empsd,mean_se,mean_se_c,coverage,mean_ail\n";
  char buf[32];
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (size_t t = 0; t < report.per_point.size(); ++t) {
    const PointSummary& pt = report.per_point[t];
    out << (t + 1);
    for (double v : pt.x) cell(v);
    cell(pt.true_f0);
    cell(pt.true_mean);
    cell(pt.mean_fhat);
    cell(pt.bias_f);
    cell(pt.mae_f);
    cell(pt.abs_bias_f);
    cell(pt.bias_mean);
    cell(pt.mae_mean);
    cell(pt.empsd);
    cell(pt.mean_se);
    cell(pt.mean_se_c);
    cell(pt.coverage);
    cell(pt.mean_ail);
    out << "\n";
  }
}

}  // namespace esm
