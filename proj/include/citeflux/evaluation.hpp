#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citeflux/corpus.hpp"

namespace citeflux {

// How metrics that divide by the true value treat zero-truth rows.
enum class ZeroPolicy { error, skip };

// Error metrics over aligned prediction/truth arrays. All throw InvalidInput
// on empty input or length mismatch.
double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);
// rmse divided by the truth range; zero range raises InvalidInput.
double nrmse(std::span<const double> pred, std::span<const double> truth);
// Mean of |error| / truth. Under ZeroPolicy::skip, zero-truth rows are
// dropped; dropping every row raises InvalidInput.
double mape(std::span<const double> pred, std::span<const double> truth,
            ZeroPolicy policy = ZeroPolicy::error);
// Fraction of rows with |error| / truth <= epsilon; same zero handling as
// mape. epsilon must be > 0.
double accuracy(std::span<const double> pred, std::span<const double> truth,
                double epsilon, ZeroPolicy policy = ZeroPolicy::error);

struct MetricBundle {
  double mae = 0.0;
  double rmse = 0.0;
  double nrmse = 0.0;
  double mape = 0.0;
  double accuracy = 0.0;
  std::size_t n_used = 0;      // rows entering mape/accuracy
  std::size_t n_excluded = 0;  // zero-truth rows dropped by ZeroPolicy::skip
  double epsilon = 0.0;
};

// All five metrics in one pass. mae/rmse/nrmse always use every row; the
// ratio metrics honor the zero policy and report their row counts.
MetricBundle metric_bundle(std::span<const double> pred, std::span<const double> truth,
                           double epsilon, ZeroPolicy policy = ZeroPolicy::error);

enum class CorrelationKind { spearman, pearson };

// Correlation outcome; `rho` is empty for degenerate input, with `note`
// naming the reason (e.g. a constant side).
struct CorrelationValue {
  std::optional<double> rho;
  std::string note;
};

// Rank (average ranks on ties) or linear correlation of two aligned samples.
// Lengths must match and be >= 2.
CorrelationValue correlate(std::span<const double> a, std::span<const double> b,
                           CorrelationKind kind = CorrelationKind::spearman);
// Throwing convenience: NumericError when the correlation is undefined.
double spearman(std::span<const double> a, std::span<const double> b);

// One model's predictions.csv row: cumulative citation count predicted at
// `horizon` years past the training window.
struct HorizonPrediction {
  std::string paper_id;
  int horizon = 0;
  double predicted = 0.0;
};

struct HorizonReport {
  std::string model;
  std::vector<int> horizons;           // ascending
  std::vector<MetricBundle> bundles;   // aligned with horizons
  std::vector<std::string> paper_ids;  // sorted; same set at every horizon
};

// Scores one model against corpus ground truth: cumulative citations at
// publication + train_window + horizon. Every predicted paper must belong to
// the cohort, each (paper, horizon) may appear once, and all horizons must
// cover the same paper set.
HorizonReport evaluate_model(const std::string& model_name,
                             std::span<const HorizonPrediction> predictions,
                             const Corpus& corpus, const Cohort& cohort, double epsilon,
                             ZeroPolicy policy = ZeroPolicy::error);

struct ComparisonTable {
  std::vector<int> horizons;
  std::vector<std::string> paper_ids;
  std::vector<HorizonReport> models;  // sorted by model name
};

// Aligns per-model reports; every report must share the same paper set and
// horizon list. Output order is by model name, so insertion order is
// irrelevant.
ComparisonTable compare_models(std::vector<HorizonReport> reports);

struct EarlyCiterOptions {
  double citer_window = 2.0;            // years after publication
  std::vector<double> horizons = {5.0, 8.0, 10.0, 12.0, 15.0};  // years after publication
  double impact_split = 0.5;            // quantile of max citer Q
  double mu_p = 0.0;
  CorrelationKind kind = CorrelationKind::spearman;
};

struct EarlyCiterGroup {
  std::string name;  // "low" / "high"
  std::size_t n_papers = 0;
  std::vector<CorrelationValue> by_horizon;
};

struct EarlyCiterTable {
  std::vector<double> horizons;
  double split_q = 0.0;          // Q threshold between the groups
  std::size_t n_no_citer = 0;    // cohort papers without a scoreable early citer
  EarlyCiterGroup low;
  EarlyCiterGroup high;
};

// Correlates each paper's best early-citer Q (within citer_window, Q taken at
// publication + citer_window) with its cumulative citations at each horizon,
// separately for papers below / at-or-above the split quantile. Requires a
// disambiguated corpus and at least 3 papers per group.
EarlyCiterTable early_citer_correlation(const Corpus& corpus, const Cohort& cohort,
                                        const EarlyCiterOptions& options = {});

}  // namespace citeflux
