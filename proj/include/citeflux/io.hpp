#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "citeflux/corpus.hpp"
#include "citeflux/evaluation.hpp"
#include "citeflux/gbdt.hpp"
#include "citeflux/ppi_learner.hpp"
#include "citeflux/synth.hpp"

namespace citeflux {

inline constexpr std::string_view kToolVersion = "0.1.0";

// Whole-file helpers. Both throw IoError naming the path.
std::string read_text_file(const std::string& path);
// Creates missing parent directories.
void write_text_file(const std::string& path, std::string_view content);

// Machine-local corpus cache: magic "CFXC", format version, load statistics,
// then the raw records. Citation edges and indexes are rebuilt on load, so a
// round trip reproduces the corpus exactly. Not an interchange format; the
// byte order is the writing machine's.
void save_corpus_bin(const Corpus& corpus, const std::string& path);
// Throws IoError on open/truncation, SchemaError on bad magic or version.
Corpus load_corpus_bin(const std::string& path);

std::string cohort_to_json(const Cohort& cohort);
Cohort cohort_from_json(std::string_view text);  // SchemaError
void save_cohort_json(const Cohort& cohort, const std::string& path);
Cohort load_cohort_json(const std::string& path);

// features.csv: header "paper_id" plus the 24 canonical feature names, one
// row per paper. Numbers are written shortest-round-trip, so a load returns
// bit-identical values.
struct FeatureTable {
  std::vector<std::string> paper_ids;
  FeatureMatrix features;  // names match the canonical list
};
void save_features_csv(const FeatureTable& table, const std::string& path);
FeatureTable load_features_csv(const std::string& path);  // SchemaError

// targets.csv: "paper_id,horizon_year,target".
struct TargetRow {
  std::string paper_id;
  int horizon = 0;
  double value = 0.0;
};
void save_targets_csv(std::span<const TargetRow> rows, const std::string& path);
std::vector<TargetRow> load_targets_csv(const std::string& path);

// predictions.csv: "paper_id,horizon_year,predicted".
void save_predictions_csv(std::span<const HorizonPrediction> rows, const std::string& path);
std::vector<HorizonPrediction> load_predictions_csv(const std::string& path);

// params.json: {"beta":[...],"papers":{id:{"alpha":..,"w1":..,"w2":..,"s":[...]}}}.
struct ParamsFile {
  std::vector<double> beta;
  std::vector<FittedPaper> papers;  // sorted by id on write
};
std::string params_to_json(const ParamsFile& params);
ParamsFile params_from_json(std::string_view text);  // SchemaError
void save_params_json(const ParamsFile& params, const std::string& path);
ParamsFile load_params_json(const std::string& path);

// model.json: {"variant":..,"models":{horizon:{ensemble}}}; one ensemble per
// prediction horizon.
struct ModelFile {
  std::string variant;                          // "all" or "top10"
  std::vector<std::pair<int, Ensemble>> models;  // ascending horizons
};
std::string model_to_json(const ModelFile& model);
ModelFile model_from_json(std::string_view text);  // SchemaError
void save_model_json(const ModelFile& model, const std::string& path);
ModelFile load_model_json(const std::string& path);

// Evaluation report: {model: {horizon: {mae,rmse,nrmse,mape,accuracy,
// epsilon,n_used,n_excluded}}}.
std::string report_to_json(const ComparisonTable& table);

// Fixed-width text rendering of a comparison table, one row per model and
// horizon. Deterministic given equal inputs.
std::string format_comparison_table(const ComparisonTable& table);

// Restricted TOML reader for config files: flat `key = value` lines with
// `#` comments; values are numbers, booleans, or double-quoted strings.
// Section headers and arrays are rejected. Typed getters record the keys
// they consume so unknown keys can be reported.
class TomlTable {
 public:
  static TomlTable parse(std::string_view text);  // SchemaError

  double number(const std::string& key, double fallback);
  int integer(const std::string& key, int fallback);
  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string text(const std::string& key, std::string fallback);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  // Throws SchemaError naming the first key no getter asked for.
  void reject_unknown() const;

 private:
  struct Value {
    std::string raw;
    bool quoted = false;
  };
  std::map<std::string, Value> values_;
  std::map<std::string, bool> consumed_;
};

// Config readers: every key optional with the struct default, unknown keys
// rejected, result validated.
FitConfig fit_config_from_toml(std::string_view text);
SynthConfig synth_config_from_toml(std::string_view text);

// Grid settings: stride fields thin the reference axes; objective and the
// validation fraction drive the search.
struct GridFile {
  GridSpec spec;
  std::string objective = "rmse";
  double val_fraction = 0.25;
};
GridFile grid_from_toml(std::string_view text);

// Provenance sidecar written next to every output artifact as
// "<artifact>.manifest.json".
struct RunManifest {
  std::string subcommand;
  std::string tool_version{kToolVersion};
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::pair<std::string, std::string>> inputs;   // role, path
  std::vector<std::pair<std::string, std::string>> outputs;  // role, path
  std::map<std::string, std::string> config;                 // resolved values
  double wall_seconds = 0.0;
};
std::string manifest_to_json(const RunManifest& manifest);
void write_manifest_for(const RunManifest& manifest, const std::string& artifact_path);

}  // namespace citeflux
