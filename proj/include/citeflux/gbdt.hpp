#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace citeflux {

struct GbdtConfig {
  double learning_rate = 0.1;
  int n_iterations = 100;
  int min_leaf_samples = 10;
  int max_depth = 5;
  double subsample_rate = 1.0;
  std::uint64_t seed = 0;

  // Throws InvalidInput: learning_rate and subsample_rate in (0, 1],
  // n_iterations >= 0, min_leaf_samples >= 1, max_depth >= 0.
  void validate() const;

  friend auto tie(const GbdtConfig& c) {
    return std::make_tuple(c.learning_rate, c.n_iterations, c.min_leaf_samples,
                           c.max_depth, c.subsample_rate);
  }
  // Canonical ordering used for grid tie-breaks; seed is not part of it.
  friend bool operator<(const GbdtConfig& a, const GbdtConfig& b) {
    return tie(a) < tie(b);
  }
  friend bool operator==(const GbdtConfig& a, const GbdtConfig& b) {
    return tie(a) == tie(b) && a.seed == b.seed;
  }
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;  // leaf output; 0 on internal nodes
  std::int32_t left = -1;
  std::int32_t right = -1;
  double gain = 0.0;          // squared-error reduction of this split
  std::int32_t n_samples = 0;  // training rows reaching the node
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root; non-empty once fitted

  double operator()(std::span<const double> row) const;
  // Edges on the longest root-to-leaf path; 0 for a lone leaf.
  int depth() const;
};

struct BoostedTree {
  RegressionTree tree;
  double weight = 0.0;  // the learning rate it was added with
};

struct Ensemble {
  double base = 0.0;  // training-target mean
  std::vector<BoostedTree> trees;
  std::vector<std::string> feature_names;
  std::vector<double> importance;  // normalized; all zero when no split exists
  GbdtConfig config;
};

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;  // every row has names.size() entries

  // Throws InvalidInput on ragged rows, empty names, or non-finite entries.
  void validate() const;
};

// Columns of `source` selected by index, in the given order.
FeatureMatrix select_columns(const FeatureMatrix& source,
                             std::span<const std::size_t> columns);

// Squared-error boosting: base = mean(target); each round fits a
// variance-reduction CART on the current residuals over a per-round
// subsample drawn without replacement, and is added with weight
// learning_rate. Deterministic per (data, config).
Ensemble fit(const FeatureMatrix& data, std::span<const double> targets,
             const GbdtConfig& config = {});

// base + sum of weighted tree outputs. Throws InvalidInput on a row length
// mismatch.
double predict(const Ensemble& model, std::span<const double> row);

// Per-feature total split gain, normalized to sum 1; all zeros when every
// tree is degenerate.
std::vector<double> feature_importance(const Ensemble& model);

// Thinning factors applied to the reference hyperparameter ranges; 1 keeps
// an axis complete.
struct GridStride {
  int learning_rate = 100;
  int iterations = 1;
  int min_leaf = 1;
  int depth = 1;
  int subsample = 1;
};

struct GridSpec {
  std::vector<double> learning_rates;
  std::vector<int> iterations;
  std::vector<int> min_leaf;
  std::vector<int> depths;
  std::vector<double> subsamples;
  std::uint64_t seed = 0;  // seed handed to every grid-point fit

  // Reference ranges: learning rate 0.0005..0.5 step 0.0005, iterations
  // 500..3000 step 500, min leaf 10..80 step 10, depth 5..7, subsample
  // 0.5..1.0 step 0.1 — each axis thinned by its stride.
  static GridSpec paper_defaults(const GridStride& stride);

  // Throws InvalidInput when any axis is empty.
  void validate() const;
};

struct GridPoint {
  GbdtConfig config;
  double score = 0.0;
};

struct GridSearchResult {
  GbdtConfig best;
  double best_score = 0.0;
  std::vector<GridPoint> table;  // canonical enumeration order
};

// Trains every grid point on the training split and scores `objective`
// ("mae", "rmse", "nrmse" or "mape") on the validation split; returns the
// argmin, ties broken by the canonical config order. Grid points may be
// evaluated in parallel; results do not depend on jobs.
GridSearchResult grid_search(const GridSpec& grid, const FeatureMatrix& train_x,
                             std::span<const double> train_y,
                             const FeatureMatrix& val_x,
                             std::span<const double> val_y,
                             const std::string& objective = "rmse", int jobs = 1);

// Indices of the k largest scores (ties favor the smaller index), returned
// in ascending index order. k must not exceed the score count.
std::vector<std::size_t> top_k_select(std::span<const double> scores,
                                      std::size_t k = 10);

}  // namespace citeflux
