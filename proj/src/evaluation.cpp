#include "citeflux/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "citeflux/errors.hpp"
#include "citeflux/indicators.hpp"
#include "citeflux/stats.hpp"

namespace citeflux {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth,
                const char* op) {
  if (pred.size() != truth.size())
    throw InvalidInput(std::string(op) + ": prediction/truth length mismatch");
  if (pred.empty()) throw InvalidInput(std::string(op) + ": empty input");
  for (const double v : pred)
    if (!std::isfinite(v)) throw InvalidInput(std::string(op) + ": non-finite prediction");
  for (const double v : truth)
    if (!std::isfinite(v)) throw InvalidInput(std::string(op) + ": non-finite truth");
}

// Shared core of the ratio metrics: sum of |e|/y and the count of rows with
// |e|/y <= epsilon over the usable rows.
struct RatioSums {
  double abs_ratio = 0.0;
  std::size_t within = 0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

RatioSums ratio_sums(std::span<const double> pred, std::span<const double> truth,
                     double epsilon, ZeroPolicy policy, const char* op) {
  RatioSums s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0.0) {
      if (policy == ZeroPolicy::error)
        throw InvalidInput(std::string(op) + ": zero truth value at row " +
                           std::to_string(i));
      ++s.excluded;
      continue;
    }
    const double r = std::abs(pred[i] - truth[i]) / truth[i];
    s.abs_ratio += r;
    if (r <= epsilon) ++s.within;
    ++s.used;
  }
  if (s.used == 0) throw InvalidInput(std::string(op) + ": every row excluded");
  return s;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

CorrelationValue pearson_of(std::span<const double> a, std::span<const double> b) {
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da == 0.0 || db == 0.0)
    return {std::nullopt, da == 0.0 ? "first sample is constant" : "second sample is constant"};
  return {num / std::sqrt(da * db), ""};
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    s += e * e;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double nrmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "nrmse");
  const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
  if (*hi == *lo) throw InvalidInput("nrmse: truth range is zero");
  return rmse(pred, truth) / (*hi - *lo);
}

double mape(std::span<const double> pred, std::span<const double> truth,
            ZeroPolicy policy) {
  check_pair(pred, truth, "mape");
  const auto s = ratio_sums(pred, truth, 0.0, policy, "mape");
  return s.abs_ratio / static_cast<double>(s.used);
}

double accuracy(std::span<const double> pred, std::span<const double> truth,
                double epsilon, ZeroPolicy policy) {
  check_pair(pred, truth, "accuracy");
  if (!(epsilon > 0.0)) throw InvalidInput("accuracy: epsilon must be > 0");
  const auto s = ratio_sums(pred, truth, epsilon, policy, "accuracy");
  return static_cast<double>(s.within) / static_cast<double>(s.used);
}

MetricBundle metric_bundle(std::span<const double> pred, std::span<const double> truth,
                           double epsilon, ZeroPolicy policy) {
  check_pair(pred, truth, "metric_bundle");
  if (!(epsilon > 0.0)) throw InvalidInput("metric_bundle: epsilon must be > 0");
  MetricBundle b;
  b.mae = mae(pred, truth);
  b.rmse = rmse(pred, truth);
  b.nrmse = nrmse(pred, truth);
  const auto s = ratio_sums(pred, truth, epsilon, policy, "metric_bundle");
  b.mape = s.abs_ratio / static_cast<double>(s.used);
  b.accuracy = static_cast<double>(s.within) / static_cast<double>(s.used);
  b.n_used = s.used;
  b.n_excluded = s.excluded;
  b.epsilon = epsilon;
  return b;
}

CorrelationValue correlate(std::span<const double> a, std::span<const double> b,
                           CorrelationKind kind) {
  if (a.size() != b.size()) throw InvalidInput("correlate: length mismatch");
  if (a.size() < 2) throw InvalidInput("correlate: need at least 2 pairs");
  if (kind == CorrelationKind::pearson) return pearson_of(a, b);
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson_of(ra, rb);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto c = correlate(a, b, CorrelationKind::spearman);
  if (!c.rho) throw NumericError("spearman: " + c.note);
  return *c.rho;
}

HorizonReport evaluate_model(const std::string& model_name,
                             std::span<const HorizonPrediction> predictions,
                             const Corpus& corpus, const Cohort& cohort, double epsilon,
                             ZeroPolicy policy) {
  if (predictions.empty()) throw InvalidInput("evaluate_model: no predictions");
  const std::unordered_set<std::string> members(cohort.training_papers.begin(),
                                                cohort.training_papers.end());
  // horizon -> sorted (paper, prediction)
  std::map<int, std::map<std::string, double>> by_horizon;
  for (const auto& p : predictions) {
    if (!members.contains(p.paper_id))
      throw InvalidInput("evaluate_model: paper not in cohort: " + p.paper_id);
    auto [it, fresh] = by_horizon[p.horizon].emplace(p.paper_id, p.predicted);
    (void)it;
    if (!fresh)
      throw InvalidInput("evaluate_model: duplicate prediction for " + p.paper_id +
                         " at horizon " + std::to_string(p.horizon));
  }

  HorizonReport report;
  report.model = model_name;
  const auto& first = by_horizon.begin()->second;
  for (const auto& [id, value] : first) {
    (void)value;
    report.paper_ids.push_back(id);
  }
  for (const auto& [horizon, rows] : by_horizon) {
    if (rows.size() != report.paper_ids.size() ||
        !std::equal(rows.begin(), rows.end(), report.paper_ids.begin(),
                    [](const auto& kv, const std::string& id) { return kv.first == id; }))
      throw InvalidInput("evaluate_model: horizon " + std::to_string(horizon) +
                         " covers a different paper set");
    std::vector<double> pred, truth;
    pred.reserve(rows.size());
    truth.reserve(rows.size());
    for (const auto& [id, value] : rows) {
      const auto idx = corpus.require(id);
      pred.push_back(value);
      truth.push_back(static_cast<double>(
          corpus.citations_within(idx, cohort.train_window + horizon)));
    }
    report.horizons.push_back(horizon);
    report.bundles.push_back(metric_bundle(pred, truth, epsilon, policy));
  }
  return report;
}

ComparisonTable compare_models(std::vector<HorizonReport> reports) {
  if (reports.empty()) throw InvalidInput("compare_models: no reports");
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].paper_ids != reports[0].paper_ids)
      throw InvalidInput("compare_models: model " + reports[i].model +
                         " is evaluated on a different paper set than " +
                         reports[0].model);
    if (reports[i].horizons != reports[0].horizons)
      throw InvalidInput("compare_models: model " + reports[i].model +
                         " covers different horizons than " + reports[0].model);
  }
  ComparisonTable table;
  table.horizons = reports[0].horizons;
  table.paper_ids = reports[0].paper_ids;
  std::stable_sort(reports.begin(), reports.end(),
                   [](const HorizonReport& a, const HorizonReport& b) {
                     return a.model < b.model;
                   });
  table.models = std::move(reports);
  return table;
}

EarlyCiterTable early_citer_correlation(const Corpus& corpus, const Cohort& cohort,
                                        const EarlyCiterOptions& options) {
  if (!corpus.disambiguated())
    throw InvalidInput("early_citer_correlation: corpus not disambiguated");
  if (!(options.citer_window > 0.0))
    throw InvalidInput("early_citer_correlation: citer_window must be > 0");
  if (options.horizons.empty())
    throw InvalidInput("early_citer_correlation: no horizons");
  if (options.impact_split < 0.0 || options.impact_split > 1.0)
    throw InvalidInput("early_citer_correlation: impact_split outside [0, 1]");

  EarlyCiterTable table;
  table.horizons = options.horizons;

  // Per paper: best early-citer Q and cumulative citations per horizon.
  std::vector<double> max_q;
  std::vector<std::vector<double>> cum;  // [paper][horizon]
  for (const auto& id : cohort.training_papers) {
    const auto idx = corpus.require(id);
    const double cutoff_abs = corpus.paper(idx).pub_time + options.citer_window;
    const auto history = citation_history(corpus, idx, options.citer_window);
    double best = 0.0;
    for (const auto citing : history.citing) {
      const auto& record = corpus.paper(citing);
      for (std::int32_t pos = 0; pos < static_cast<std::int32_t>(record.authors.size());
           ++pos) {
        const auto ident = corpus.identity_of(citing, pos);
        const auto score = q_value(corpus, ident, options.mu_p, cutoff_abs);
        best = std::max(best, score.q);
      }
    }
    if (best <= 0.0) {
      ++table.n_no_citer;  // no scoreable early citer; paper left out
      continue;
    }
    max_q.push_back(best);
    auto& row = cum.emplace_back();
    for (const double h : options.horizons)
      row.push_back(static_cast<double>(corpus.citations_within(idx, h)));
  }

  if (max_q.size() < 6)
    throw InvalidInput("early_citer_correlation: fewer than 6 usable papers");
  table.split_q = quantile_of(max_q, options.impact_split);
  // A constant citer score cannot be split; both groups then report
  // not-a-value instead of failing the size precondition.
  const bool q_constant =
      std::all_of(max_q.begin(), max_q.end(), [&](double q) { return q == max_q[0]; });

  const auto group_of = [&](const std::string& name, bool high) {
    EarlyCiterGroup g;
    g.name = name;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < max_q.size(); ++i)
      if ((max_q[i] >= table.split_q) == high) rows.push_back(i);
    if (rows.size() < 3) {
      if (q_constant) {
        g.n_papers = rows.size();
        for (std::size_t h = 0; h < options.horizons.size(); ++h)
          g.by_horizon.push_back({std::nullopt, "citer score is constant"});
        return g;
      }
      throw InvalidInput("early_citer_correlation: fewer than 3 papers in the " + name +
                         "-impact group");
    }
    g.n_papers = rows.size();
    std::vector<double> q_side;
    for (const auto r : rows) q_side.push_back(max_q[r]);
    for (std::size_t h = 0; h < options.horizons.size(); ++h) {
      std::vector<double> c_side;
      for (const auto r : rows) c_side.push_back(cum[r][h]);
      g.by_horizon.push_back(correlate(q_side, c_side, options.kind));
    }
    return g;
  };
  table.low = group_of("low", false);
  table.high = group_of("high", true);
  return table;
}

}  // namespace citeflux
