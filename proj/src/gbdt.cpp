#include "citeflux/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "citeflux/errors.hpp"
#include "citeflux/evaluation.hpp"
#include "citeflux/parallel.hpp"
#include "citeflux/prng.hpp"

namespace citeflux {

namespace {

// Accepted split gains must clear this fraction of the parent squared error;
// it absorbs the cancellation noise of the prefix-sum variance formula so a
// constant-residual node never splits.
constexpr double kGainTol = 1e-12;

double sse_of(double sum, double sum_sq, std::size_t n) {
  return sum_sq - sum * sum / static_cast<double>(n);
}

// Threshold strictly below the upper neighbor so `x <= t` reproduces the rank
// split exactly; halving first keeps the midpoint finite for extreme values.
double split_threshold(double below, double above) {
  double t = 0.5 * below + 0.5 * above;
  if (!(t < above)) t = below;
  return t;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  std::size_t n_left = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& rows,
              const std::vector<double>& residuals, const GbdtConfig& config)
      : rows_(rows), residuals_(residuals), config_(config) {}

  // Consumes `samples` as scratch; partitions it in place while growing.
  RegressionTree build(std::vector<std::size_t>& samples) {
    RegressionTree tree;
    grow(tree, samples, 0, samples.size(), 0);
    return tree;
  }

 private:
  std::int32_t grow(RegressionTree& tree, std::vector<std::size_t>& samples,
                    std::size_t lo, std::size_t hi, int depth) {
    const auto node_idx = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();

    const std::size_t count = hi - lo;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      const double r = residuals_[samples[p]];
      sum += r;
      sum_sq += r * r;
    }
    tree.nodes[node_idx].n_samples = static_cast<std::int32_t>(count);
    tree.nodes[node_idx].value = sum / static_cast<double>(count);

    const std::size_t min_leaf = static_cast<std::size_t>(config_.min_leaf_samples);
    if (depth >= config_.max_depth || count < 2 * min_leaf) return node_idx;

    const double parent_sse = sse_of(sum, sum_sq, count);
    const SplitChoice split = best_split(samples, lo, hi, sum, parent_sse, min_leaf);
    if (split.feature < 0) return node_idx;

    auto& node = tree.nodes[node_idx];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.gain = split.gain;
    node.value = 0.0;

    std::stable_partition(samples.begin() + static_cast<std::ptrdiff_t>(lo),
                          samples.begin() + static_cast<std::ptrdiff_t>(hi),
                          [&](std::size_t i) {
                            return rows_[i][static_cast<std::size_t>(split.feature)] <=
                                   split.threshold;
                          });

    const std::size_t mid = lo + split.n_left;
    const std::int32_t left = grow(tree, samples, lo, mid, depth + 1);
    const std::int32_t right = grow(tree, samples, mid, hi, depth + 1);
    tree.nodes[node_idx].left = left;
    tree.nodes[node_idx].right = right;
    return node_idx;
  }

  // Exhaustive scan over features and rank cut points. Strict `>` on gain plus
  // the ascending (feature, threshold) visit order makes exact ties resolve to
  // the smallest pair.
  SplitChoice best_split(const std::vector<std::size_t>& samples, std::size_t lo,
                         std::size_t hi, double total_sum, double parent_sse,
                         std::size_t min_leaf) {
    const std::size_t count = hi - lo;
    SplitChoice best;
    best.gain = kGainTol * std::max(1.0, parent_sse);

    order_.assign(samples.begin() + static_cast<std::ptrdiff_t>(lo),
                  samples.begin() + static_cast<std::ptrdiff_t>(hi));
    prefix_.resize(count);

    const std::size_t n_features = rows_.front().size();
    for (std::size_t f = 0; f < n_features; ++f) {
      std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
        const double va = rows_[a][f];
        const double vb = rows_[b][f];
        return va < vb || (va == vb && a < b);
      });

      double acc = 0.0;
      for (std::size_t p = 0; p < count; ++p) {
        acc += residuals_[order_[p]];
        prefix_[p] = acc;
      }

      for (std::size_t p = min_leaf; p + min_leaf <= count; ++p) {
        const double below = rows_[order_[p - 1]][f];
        const double above = rows_[order_[p]][f];
        if (!(below < above)) continue;
        const double left_sum = prefix_[p - 1];
        const double right_sum = total_sum - left_sum;
        const double gain =
            left_sum * left_sum / static_cast<double>(p) +
            right_sum * right_sum / static_cast<double>(count - p) -
            total_sum * total_sum / static_cast<double>(count);
        if (gain > best.gain) {
          best.feature = static_cast<int>(f);
          best.threshold = split_threshold(below, above);
          best.gain = gain;
          best.n_left = p;
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& rows_;
  const std::vector<double>& residuals_;
  const GbdtConfig& config_;
  std::vector<std::size_t> order_;
  std::vector<double> prefix_;
};

std::size_t subsample_count(double rate, std::size_t n) {
  const auto m = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  return std::clamp<std::size_t>(m, 1, n);
}

// Gains summed per feature across every tree; normalized when any split
// exists, all zeros otherwise.
std::vector<double> gain_totals(const std::vector<BoostedTree>& trees,
                                std::size_t n_features) {
  std::vector<double> totals(n_features, 0.0);
  double grand = 0.0;
  for (const auto& bt : trees) {
    for (const auto& node : bt.tree.nodes) {
      if (node.feature < 0) continue;
      totals[static_cast<std::size_t>(node.feature)] += node.gain;
      grand += node.gain;
    }
  }
  if (grand > 0.0) {
    for (auto& t : totals) t /= grand;
  }
  return totals;
}

int depth_below(const std::vector<TreeNode>& nodes, std::int32_t idx) {
  const TreeNode& node = nodes[static_cast<std::size_t>(idx)];
  if (node.feature < 0) return 0;
  return 1 + std::max(depth_below(nodes, node.left), depth_below(nodes, node.right));
}

double scored(const std::string& objective, std::span<const double> pred,
              std::span<const double> truth) {
  if (objective == "mae") return mae(pred, truth);
  if (objective == "rmse") return rmse(pred, truth);
  if (objective == "nrmse") return nrmse(pred, truth);
  if (objective == "mape") return mape(pred, truth);
  throw InvalidInput("grid_search: unknown objective '" + objective + "'");
}

}  // namespace

void GbdtConfig::validate() const {
  if (!(learning_rate > 0.0) || learning_rate > 1.0)
    throw InvalidInput("GbdtConfig: learning_rate must lie in (0, 1]");
  if (n_iterations < 0) throw InvalidInput("GbdtConfig: n_iterations must be >= 0");
  if (min_leaf_samples < 1)
    throw InvalidInput("GbdtConfig: min_leaf_samples must be >= 1");
  if (max_depth < 0) throw InvalidInput("GbdtConfig: max_depth must be >= 0");
  if (!(subsample_rate > 0.0) || subsample_rate > 1.0)
    throw InvalidInput("GbdtConfig: subsample_rate must lie in (0, 1]");
}

double RegressionTree::operator()(std::span<const double> row) const {
  if (nodes.empty()) return 0.0;
  std::size_t idx = 0;
  while (nodes[idx].feature >= 0) {
    const auto& node = nodes[idx];
    const double v = row[static_cast<std::size_t>(node.feature)];
    idx = static_cast<std::size_t>(v <= node.threshold ? node.left : node.right);
  }
  return nodes[idx].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  return depth_below(nodes, 0);
}

void FeatureMatrix::validate() const {
  if (names.empty()) throw InvalidInput("FeatureMatrix: no feature names");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != names.size()) {
      std::ostringstream msg;
      msg << "FeatureMatrix: row " << r << " has " << rows[r].size()
          << " entries, expected " << names.size();
      throw InvalidInput(msg.str());
    }
    for (double v : rows[r]) {
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "FeatureMatrix: non-finite value in row " << r;
        throw InvalidInput(msg.str());
      }
    }
  }
}

FeatureMatrix select_columns(const FeatureMatrix& source,
                             std::span<const std::size_t> columns) {
  for (std::size_t c : columns) {
    if (c >= source.names.size())
      throw InvalidInput("select_columns: column index out of range");
  }
  FeatureMatrix out;
  out.names.reserve(columns.size());
  for (std::size_t c : columns) out.names.push_back(source.names[c]);
  out.rows.reserve(source.rows.size());
  for (const auto& row : source.rows) {
    std::vector<double> picked;
    picked.reserve(columns.size());
    for (std::size_t c : columns) picked.push_back(row[c]);
    out.rows.push_back(std::move(picked));
  }
  return out;
}

Ensemble fit(const FeatureMatrix& data, std::span<const double> targets,
             const GbdtConfig& config) {
  config.validate();
  data.validate();
  const std::size_t n = data.rows.size();
  if (n == 0) throw InvalidInput("fit: empty training set");
  if (targets.size() != n) {
    std::ostringstream msg;
    msg << "fit: " << targets.size() << " targets for " << n << " rows";
    throw InvalidInput(msg.str());
  }
  for (double y : targets) {
    if (!std::isfinite(y)) throw InvalidInput("fit: non-finite target");
  }

  Ensemble model;
  model.config = config;
  model.feature_names = data.names;
  model.base = std::accumulate(targets.begin(), targets.end(), 0.0) /
               static_cast<double>(n);

  std::vector<double> preds(n, model.base);
  std::vector<double> residuals(n);
  std::vector<std::size_t> pool(n);
  std::vector<std::size_t> chosen;
  const std::size_t m = subsample_count(config.subsample_rate, n);

  model.trees.reserve(static_cast<std::size_t>(config.n_iterations));
  for (int round = 0; round < config.n_iterations; ++round) {
    for (std::size_t i = 0; i < n; ++i) residuals[i] = targets[i] - preds[i];

    if (m == n) {
      chosen.resize(n);
      std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    } else {
      // Partial Fisher-Yates: first m slots are a uniform draw without
      // replacement; re-sorting makes tree construction order canonical.
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      Rng g(derive_seed(config.seed, static_cast<std::uint64_t>(round)));
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(uniform_index(g, n - i));
        std::swap(pool[i], pool[j]);
      }
      chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
      std::sort(chosen.begin(), chosen.end());
    }

    TreeBuilder builder(data.rows, residuals, config);
    RegressionTree tree = builder.build(chosen);
    for (std::size_t i = 0; i < n; ++i)
      preds[i] += config.learning_rate * tree(data.rows[i]);
    model.trees.push_back(BoostedTree{std::move(tree), config.learning_rate});
  }

  model.importance = gain_totals(model.trees, data.names.size());
  return model;
}

double predict(const Ensemble& model, std::span<const double> row) {
  if (row.size() != model.feature_names.size()) {
    std::ostringstream msg;
    msg << "predict: row has " << row.size() << " features, model expects "
        << model.feature_names.size();
    throw InvalidInput(msg.str());
  }
  double out = model.base;
  for (const auto& bt : model.trees) out += bt.weight * bt.tree(row);
  return out;
}

std::vector<double> feature_importance(const Ensemble& model) {
  return gain_totals(model.trees, model.feature_names.size());
}

GridSpec GridSpec::paper_defaults(const GridStride& stride) {
  if (stride.learning_rate < 1 || stride.iterations < 1 || stride.min_leaf < 1 ||
      stride.depth < 1 || stride.subsample < 1)
    throw InvalidInput("GridStride: every stride must be >= 1");

  GridSpec spec;
  for (int k = 1; k <= 1000; k += stride.learning_rate)
    spec.learning_rates.push_back(static_cast<double>(k) * 0.0005);
  for (int it = 500; it <= 3000; it += 500 * stride.iterations)
    spec.iterations.push_back(it);
  for (int leaf = 10; leaf <= 80; leaf += 10 * stride.min_leaf)
    spec.min_leaf.push_back(leaf);
  for (int d = 5; d <= 7; d += stride.depth) spec.depths.push_back(d);
  for (int i = 0; i <= 5; i += stride.subsample)
    spec.subsamples.push_back(static_cast<double>(5 + i) / 10.0);
  return spec;
}

void GridSpec::validate() const {
  if (learning_rates.empty() || iterations.empty() || min_leaf.empty() ||
      depths.empty() || subsamples.empty())
    throw InvalidInput("GridSpec: every axis needs at least one value");
}

GridSearchResult grid_search(const GridSpec& grid, const FeatureMatrix& train_x,
                             std::span<const double> train_y,
                             const FeatureMatrix& val_x,
                             std::span<const double> val_y,
                             const std::string& objective, int jobs) {
  grid.validate();
  train_x.validate();
  val_x.validate();
  if (train_x.names != val_x.names)
    throw InvalidInput("grid_search: feature names differ between splits");
  if (train_x.rows.empty() || val_x.rows.empty())
    throw InvalidInput("grid_search: both splits need rows");
  if (train_y.size() != train_x.rows.size() || val_y.size() != val_x.rows.size())
    throw InvalidInput("grid_search: target length does not match its split");
  scored(objective, val_y, val_y);  // rejects unknown objectives up front

  std::vector<GbdtConfig> configs;
  configs.reserve(grid.learning_rates.size() * grid.iterations.size() *
                  grid.min_leaf.size() * grid.depths.size() *
                  grid.subsamples.size());
  for (double lr : grid.learning_rates)
    for (int it : grid.iterations)
      for (int leaf : grid.min_leaf)
        for (int d : grid.depths)
          for (double sub : grid.subsamples) {
            GbdtConfig c;
            c.learning_rate = lr;
            c.n_iterations = it;
            c.min_leaf_samples = leaf;
            c.max_depth = d;
            c.subsample_rate = sub;
            c.seed = grid.seed;
            configs.push_back(c);
          }

  std::vector<double> scores(configs.size(), 0.0);
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    const Ensemble model = fit(train_x, train_y, configs[i]);
    std::vector<double> preds;
    preds.reserve(val_x.rows.size());
    for (const auto& row : val_x.rows) preds.push_back(predict(model, row));
    scores[i] = scored(objective, preds, val_y);
  });

  GridSearchResult result;
  result.table.reserve(configs.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    result.table.push_back(GridPoint{configs[i], scores[i]});
    if (scores[i] < scores[best] ||
        (scores[i] == scores[best] && configs[i] < configs[best]))
      best = i;
  }
  result.best = configs[best];
  result.best_score = scores[best];
  return result;
}

std::vector<std::size_t> top_k_select(std::span<const double> scores, std::size_t k) {
  if (k > scores.size())
    throw InvalidInput("top_k_select: k exceeds the score count");
  for (double s : scores) {
    if (!std::isfinite(s)) throw InvalidInput("top_k_select: non-finite score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace citeflux
