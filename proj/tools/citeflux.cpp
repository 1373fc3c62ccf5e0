#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "citeflux/corpus.hpp"
#include "citeflux/errors.hpp"
#include "citeflux/evaluation.hpp"
#include "citeflux/gbdt.hpp"
#include "citeflux/indicators.hpp"
#include "citeflux/io.hpp"
#include "citeflux/parallel.hpp"
#include "citeflux/ppi_learner.hpp"
#include "citeflux/ppi_model.hpp"
#include "citeflux/prng.hpp"
#include "citeflux/synth.hpp"

namespace {

using namespace citeflux;

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };
LogLevel g_log_level = LogLevel::info;

LogLevel parse_log_level(const std::string& name) {
  if (name == "debug") return LogLevel::debug;
  if (name == "info") return LogLevel::info;
  if (name == "warn") return LogLevel::warn;
  if (name == "error") return LogLevel::error;
  throw InvalidInput("unknown log level \"" + name + "\"");
}

void log_at(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) < static_cast<int>(g_log_level)) return;
  static constexpr const char* kTags[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %s\n", kTags[static_cast<int>(level)], msg.c_str());
}
void log_debug(const std::string& msg) { log_at(LogLevel::debug, msg); }
void log_info(const std::string& msg) { log_at(LogLevel::info, msg); }

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Global flags shared by every subcommand. The option handles reveal whether
// a flag was given so config-file values win only when the flag is absent.
struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string log_level = "info";
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;

  bool seed_given() const { return seed_opt != nullptr && seed_opt->count() > 0; }
  bool jobs_given() const { return jobs_opt != nullptr && jobs_opt->count() > 0; }
};

void add_common(CLI::App* sub, Common& c) {
  c.seed_opt = sub->add_option("--seed", c.seed, "Seed fanned out to all stochastic steps");
  c.jobs_opt =
      sub->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::Range(1, 256));
  sub->add_option("--log-level", c.log_level, "debug, info, warn, or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
  sub->parse_complete_callback([&c] { g_log_level = parse_log_level(c.log_level); });
}

RunManifest base_manifest(const std::string& subcommand, const Common& c) {
  RunManifest m;
  m.subcommand = subcommand;
  m.seed = c.seed;
  m.jobs = c.jobs;
  return m;
}

std::vector<int> parse_horizons(const std::string& spec) {
  const auto parse_one = [&](std::string_view token) {
    int v = 0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
      throw InvalidInput("horizons: \"" + std::string(token) + "\" is not an integer");
    return v;
  };
  std::vector<int> out;
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const int lo = parse_one(std::string_view(spec).substr(0, dots));
    const int hi = parse_one(std::string_view(spec).substr(dots + 2));
    if (lo < 1 || hi < lo) throw InvalidInput("horizons: range must be ascending and >= 1");
    for (int h = lo; h <= hi; ++h) out.push_back(h);
    return out;
  }
  std::string_view rest = spec;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(parse_one(rest.substr(0, comma)));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (out.empty()) throw InvalidInput("horizons: empty specification");
  for (std::size_t i = 0; i + 1 < out.size(); ++i)
    if (out[i] >= out[i + 1]) throw InvalidInput("horizons: list must be strictly ascending");
  if (out.front() < 1) throw InvalidInput("horizons: values must be >= 1");
  return out;
}

Corpus load_bin_disambiguated(const std::string& path) {
  Corpus corpus = load_corpus_bin(path);
  disambiguate_authors(corpus);
  log_debug("disambiguated " + std::to_string(corpus.identities().size()) + " identities");
  return corpus;
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string input;
  std::string out;
  bool lenient = false;
  bool strict_flag = false;  // marker only; strict is the default
};

void run_ingest(const IngestArgs& a, const Common& c) {
  Timer timer;
  const Strictness mode = a.lenient ? Strictness::lenient : Strictness::strict;
  const Corpus corpus = load_corpus_from_json_text(read_text_file(a.input), mode);
  save_corpus_bin(corpus, a.out);

  RunManifest m = base_manifest("ingest", c);
  m.inputs.emplace_back("corpus_json", a.input);
  m.outputs.emplace_back("corpus_bin", a.out);
  m.config["strictness"] = a.lenient ? "lenient" : "strict";
  m.config["papers"] = std::to_string(corpus.size());
  m.config["warnings"] = std::to_string(corpus.stats().total_warnings());
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  log_info("ingest: " + std::to_string(corpus.size()) + " papers, " +
           std::to_string(corpus.stats().total_warnings()) + " warnings -> " + a.out);
}

// ---------------------------------------------------------------------------
// disambiguate

struct DisambiguateArgs {
  std::string corpus;
  std::string out;
};

void run_disambiguate(const DisambiguateArgs& a, const Common& c) {
  Timer timer;
  const Corpus corpus = load_bin_disambiguated(a.corpus);

  nlohmann::json arr = nlohmann::json::array();
  for (const AuthorIdentity& ident : corpus.identities()) {
    const AuthorMention& first = ident.mentions.front();
    const RawAuthor& author =
        corpus.paper(first.paper).authors[static_cast<std::size_t>(first.position)];
    nlohmann::json mentions = nlohmann::json::array();
    for (const AuthorMention& m : ident.mentions)
      mentions.push_back({{"paper", corpus.paper(m.paper).id}, {"position", m.position}});
    arr.push_back({{"identity", ident.id},
                   {"surname", author.surname},
                   {"given", author.given},
                   {"mentions", std::move(mentions)}});
  }
  write_text_file(a.out, arr.dump(1) + "\n");

  RunManifest m = base_manifest("disambiguate", c);
  m.inputs.emplace_back("corpus_bin", a.corpus);
  m.outputs.emplace_back("authors_json", a.out);
  m.config["identities"] = std::to_string(corpus.identities().size());
  m.config["mentions"] = std::to_string(corpus.mention_count());
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  log_info("disambiguate: " + std::to_string(corpus.mention_count()) + " mentions -> " +
           std::to_string(corpus.identities().size()) + " identities");
}

// ---------------------------------------------------------------------------
// cohort

struct CohortArgs {
  std::string corpus;
  std::string out;
  int year_min = 0;
  int year_max = 0;
  int min_early = 5;
  double train_window = 5.0;
  std::string horizons = "1..10";
};

void run_cohort(const CohortArgs& a, const Common& c) {
  Timer timer;
  const Corpus corpus = load_bin_disambiguated(a.corpus);
  const Cohort cohort = build_cohort(corpus, a.year_min, a.year_max, a.min_early,
                                     a.train_window, parse_horizons(a.horizons));
  save_cohort_json(cohort, a.out);

  RunManifest m = base_manifest("cohort", c);
  m.inputs.emplace_back("corpus_bin", a.corpus);
  m.outputs.emplace_back("cohort_json", a.out);
  m.config["pub_year_min"] = std::to_string(a.year_min);
  m.config["pub_year_max"] = std::to_string(a.year_max);
  m.config["min_early_citations"] = std::to_string(a.min_early);
  m.config["train_window"] = std::to_string(a.train_window);
  m.config["horizons"] = a.horizons;
  m.config["training_papers"] = std::to_string(cohort.training_papers.size());
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  log_info("cohort: " + std::to_string(cohort.training_papers.size()) + " papers -> " + a.out);
}

// ---------------------------------------------------------------------------
// features

struct FeaturesArgs {
  std::string corpus;
  std::string cohort;
  std::string out;
  double mu_p = 0.0;
  bool at_publication = false;
};

void run_features(const FeaturesArgs& a, const Common& c) {
  Timer timer;
  const Corpus corpus = load_bin_disambiguated(a.corpus);
  const Cohort cohort = load_cohort_json(a.cohort);

  FeatureOptions options;
  options.cutoff_years = cohort.train_window;
  options.mu_p = a.mu_p;
  options.at_publication = a.at_publication;

  FeatureTable table;
  table.paper_ids = cohort.training_papers;
  table.features.names.assign(kFeatureNames.begin(), kFeatureNames.end());
  table.features.rows.resize(table.paper_ids.size());
  parallel_for(table.paper_ids.size(), c.jobs, [&](std::size_t i) {
    const auto values = feature_vector(corpus, table.paper_ids[i], options).values();
    table.features.rows[i].assign(values.begin(), values.end());
  });
  save_features_csv(table, a.out);

  RunManifest m = base_manifest("features", c);
  m.inputs.emplace_back("corpus_bin", a.corpus);
  m.inputs.emplace_back("cohort_json", a.cohort);
  m.outputs.emplace_back("features_csv", a.out);
  m.config["cutoff_years"] = std::to_string(options.cutoff_years);
  m.config["mu_p"] = std::to_string(a.mu_p);
  m.config["at_publication"] = a.at_publication ? "true" : "false";
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  log_info("features: " + std::to_string(table.paper_ids.size()) + " rows -> " + a.out);
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string config;
  std::string out;
  std::string truth;
};

void run_synth(const SynthArgs& a, const Common& c) {
  Timer timer;
  SynthConfig config =
      a.config.empty() ? SynthConfig{} : synth_config_from_toml(read_text_file(a.config));
  if (c.seed_given()) config.seed = c.seed;

  const SynthResult result = generate(config);
  write_text_file(a.out, result.corpus_json);
  write_text_file(a.truth, truth_to_json(result.truth));

  RunManifest m = base_manifest("synth", c);
  m.seed = config.seed;
  if (!a.config.empty()) m.inputs.emplace_back("synth_toml", a.config);
  m.outputs.emplace_back("corpus_json", a.out);
  m.outputs.emplace_back("truth_json", a.truth);
  m.config["n_papers"] = std::to_string(config.n_papers);
  m.config["n_authors"] = std::to_string(config.n_authors);
  m.config["beta"] = std::to_string(config.beta);
  m.config["train_window"] = std::to_string(config.train_window);
  m.config["horizon_span"] = std::to_string(config.horizon_span);
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  write_manifest_for(m, a.truth);
  log_info("synth: " + std::to_string(config.n_papers) + " papers -> " + a.out);
}

// ---------------------------------------------------------------------------
// fit-ppi

struct FitPpiArgs {
  std::string corpus;
  std::string cohort;
  std::string config;
  std::string out;
  std::string report;
  double mu_p = 0.0;
  bool unit_marks = false;
};

void run_fit_ppi(const FitPpiArgs& a, const Common& c) {
  Timer timer;
  FitConfig config =
      a.config.empty() ? FitConfig{} : fit_config_from_toml(read_text_file(a.config));
  if (c.seed_given()) config.seed = c.seed;
  if (c.jobs_given()) config.jobs = c.jobs;

  const Corpus corpus = load_bin_disambiguated(a.corpus);
  const Cohort cohort = load_cohort_json(a.cohort);
  BuildFitOptions options;
  options.mu_p = a.mu_p;
  options.unit_marks = a.unit_marks;
  const std::vector<FitPaper> papers = build_fit_papers(corpus, cohort, options);
  log_info("fit-ppi: fitting " + std::to_string(papers.size()) + " papers" +
           (a.unit_marks ? " (unit marks)" : ""));

  const FitResult result = fit(papers, config);
  ParamsFile out;
  out.beta = result.beta;
  out.papers = result.papers;
  save_params_json(out, a.out);

  RunManifest m = base_manifest("fit-ppi", c);
  m.inputs.emplace_back("corpus_bin", a.corpus);
  m.inputs.emplace_back("cohort_json", a.cohort);
  if (!a.config.empty()) m.inputs.emplace_back("fit_toml", a.config);
  m.outputs.emplace_back("params_json", a.out);
  m.config["unit_marks"] = a.unit_marks ? "true" : "false";
  m.config["mu_p"] = std::to_string(a.mu_p);
  m.config["lambda_reg"] = std::to_string(config.lambda_reg);
  m.config["w_min"] = std::to_string(config.w_min);
  m.config["w_max"] = std::to_string(config.w_max);
  m.config["converged"] = result.report.converged ? "true" : "false";
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);

  if (!a.report.empty()) {
    nlohmann::json j;
    j["converged"] = result.report.converged;
    j["outer_iterations"] = result.report.outer_iterations;
    j["final_primal_residual"] = result.report.final_primal_residual;
    j["objective_trace"] = result.report.objective_trace;
    j["best_trace"] = result.report.best_trace;
    j["line_search_failures"] = result.report.line_search_failures;
    write_text_file(a.report, j.dump(1) + "\n");
    m.outputs.emplace_back("fit_report_json", a.report);
    write_manifest_for(m, a.report);
  }
  log_info("fit-ppi: " + std::string(result.report.converged ? "converged" : "iteration cap") +
           " after " + std::to_string(result.report.outer_iterations) + " passes -> " + a.out);
}

// ---------------------------------------------------------------------------
// fit-gbdt

struct FitGbdtArgs {
  std::string features;
  std::string targets;
  std::string grid;
  std::string variant = "all";
  std::string out;
};

void run_fit_gbdt(const FitGbdtArgs& a, const Common& c) {
  Timer timer;
  const FeatureTable table = load_features_csv(a.features);
  const std::vector<TargetRow> target_rows = load_targets_csv(a.targets);
  GridFile grid = grid_from_toml(read_text_file(a.grid));
  if (c.seed_given()) grid.spec.seed = c.seed;

  const std::size_t n = table.paper_ids.size();
  if (n < 4) throw InvalidInput("fit-gbdt: need at least 4 feature rows");

  std::map<int, std::unordered_map<std::string, double>> by_horizon;
  for (const TargetRow& r : target_rows)
    if (!by_horizon[r.horizon].emplace(r.paper_id, r.value).second)
      throw SchemaError("targets file: duplicate row for " + r.paper_id + " at horizon " +
                        std::to_string(r.horizon));
  if (by_horizon.empty()) throw SchemaError("targets file: no rows");

  // Deterministic validation split drawn once from the grid seed.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng g(derive_seed(grid.spec.seed, "split"));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(g, i + 1));
    std::swap(order[i], order[j]);
  }
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(grid.val_fraction * static_cast<double>(n))), 1,
      n - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  const auto subset_rows = [&](const std::vector<std::size_t>& idx) {
    FeatureMatrix out;
    out.names = table.features.names;
    out.rows.reserve(idx.size());
    for (const std::size_t i : idx) out.rows.push_back(table.features.rows[i]);
    return out;
  };
  const FeatureMatrix train_x = subset_rows(train_idx);
  const FeatureMatrix val_x = subset_rows(val_idx);

  ModelFile model;
  model.variant = a.variant;
  for (const auto& [horizon, values] : by_horizon) {
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = values.find(table.paper_ids[i]);
      if (it == values.end())
        throw SchemaError("targets file: missing " + table.paper_ids[i] + " at horizon " +
                          std::to_string(horizon));
      y[i] = it->second;
    }
    std::vector<double> train_y, val_y;
    train_y.reserve(train_idx.size());
    val_y.reserve(val_idx.size());
    for (const std::size_t i : train_idx) train_y.push_back(y[i]);
    for (const std::size_t i : val_idx) val_y.push_back(y[i]);

    const GridSearchResult search =
        grid_search(grid.spec, train_x, train_y, val_x, val_y, grid.objective, c.jobs);
    Ensemble ensemble = fit(table.features, y, search.best);
    if (a.variant == "top10") {
      const std::vector<std::size_t> top = top_k_select(feature_importance(ensemble), 10);
      ensemble = fit(select_columns(table.features, top), y, search.best);
    }
    log_debug("fit-gbdt: horizon " + std::to_string(horizon) + " best score " +
              std::to_string(search.best_score));
    model.models.emplace_back(horizon, std::move(ensemble));
  }
  save_model_json(model, a.out);

  RunManifest m = base_manifest("fit-gbdt", c);
  m.seed = grid.spec.seed;
  m.inputs.emplace_back("features_csv", a.features);
  m.inputs.emplace_back("targets_csv", a.targets);
  m.inputs.emplace_back("grid_toml", a.grid);
  m.outputs.emplace_back("model_json", a.out);
  m.config["variant"] = a.variant;
  m.config["objective"] = grid.objective;
  m.config["val_fraction"] = std::to_string(grid.val_fraction);
  m.config["grid_points"] =
      std::to_string(grid.spec.learning_rates.size() * grid.spec.iterations.size() *
                     grid.spec.min_leaf.size() * grid.spec.depths.size() *
                     grid.spec.subsamples.size());
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  log_info("fit-gbdt: " + std::to_string(model.models.size()) + " horizon models -> " + a.out);
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string params;
  std::string model;
  std::string features;
  std::string corpus;
  std::string out;
  std::string horizons = "1..10";
  std::string mode = "frozen";
  double train_window = 5.0;
  double mark_mean = 1.5;
  double mu_p = 0.0;
  bool unit_marks = false;
};

void predict_ppi(const PredictArgs& a, const Common& c, std::vector<HorizonPrediction>& rows) {
  const ParamsFile params = load_params_json(a.params);
  if (params.papers.empty()) throw InvalidInput("predict: params file lists no papers");
  const Corpus corpus = load_bin_disambiguated(a.corpus);

  Cohort pseudo;
  pseudo.train_window = a.train_window;
  for (const FittedPaper& p : params.papers) {
    corpus.require(p.id);
    pseudo.training_papers.push_back(p.id);
  }
  std::sort(pseudo.training_papers.begin(), pseudo.training_papers.end());

  BuildFitOptions options;
  options.mu_p = a.mu_p;
  options.unit_marks = a.unit_marks;
  const std::vector<FitPaper> histories = build_fit_papers(corpus, pseudo, options);
  if (histories.size() != params.papers.size())
    throw InvalidInput("predict: history set does not match the params file");
  for (std::size_t i = 0; i < histories.size(); ++i)
    if (histories[i].id != params.papers[i].id)
      throw InvalidInput("predict: history order does not match the params file");

  const std::vector<int> horizons = parse_horizons(a.horizons);
  PredictOptions po;
  po.mode = a.mode == "frozen" ? PredictionMode::frozen : PredictionMode::propagated;
  po.mark_mean = a.mark_mean;

  rows.resize(histories.size() * horizons.size());
  parallel_for(histories.size(), c.jobs, [&](std::size_t i) {
    PaperParams p;
    p.beta = params.beta;
    p.s = params.papers[i].s;
    p.alpha = params.papers[i].alpha;
    p.w1 = params.papers[i].w1;
    p.w2 = params.papers[i].w2;
    for (std::size_t k = 0; k < horizons.size(); ++k) {
      const double value =
          predict_citations(p, histories[i].events, a.train_window + horizons[k], po);
      rows[i * horizons.size() + k] = {histories[i].id, horizons[k], value};
    }
  });
}

void predict_gbdt(const PredictArgs& a, const Common& c, std::vector<HorizonPrediction>& rows) {
  const ModelFile model = load_model_json(a.model);
  const FeatureTable table = load_features_csv(a.features);
  if (model.models.empty()) throw InvalidInput("predict: model file has no horizons");

  std::vector<std::pair<int, const Ensemble*>> chosen;
  if (a.horizons.empty()) {
    for (const auto& [h, e] : model.models) chosen.emplace_back(h, &e);
  } else {
    for (const int h : parse_horizons(a.horizons)) {
      const auto it = std::find_if(model.models.begin(), model.models.end(),
                                   [&](const auto& kv) { return kv.first == h; });
      if (it == model.models.end())
        throw InvalidInput("predict: model has no horizon " + std::to_string(h));
      chosen.emplace_back(h, &it->second);
    }
  }

  // Column mapping per horizon model; a variant model names a feature subset.
  std::vector<std::vector<std::size_t>> columns(chosen.size());
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    for (const std::string& name : chosen[k].second->feature_names) {
      const auto it =
          std::find(table.features.names.begin(), table.features.names.end(), name);
      if (it == table.features.names.end())
        throw SchemaError("predict: features file lacks column \"" + name + "\"");
      columns[k].push_back(
          static_cast<std::size_t>(it - table.features.names.begin()));
    }
  }

  rows.resize(table.paper_ids.size() * chosen.size());
  parallel_for(table.paper_ids.size(), c.jobs, [&](std::size_t i) {
    std::vector<double> gathered;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      gathered.clear();
      for (const std::size_t col : columns[k]) gathered.push_back(table.features.rows[i][col]);
      rows[i * chosen.size() + k] = {table.paper_ids[i], chosen[k].first,
                                     predict(*chosen[k].second, gathered)};
    }
  });
}

void run_predict(const PredictArgs& a, const Common& c) {
  Timer timer;
  if (a.params.empty() == a.model.empty())
    throw InvalidInput("predict: exactly one of --params and --model is required");
  if (!a.model.empty() && a.features.empty())
    throw InvalidInput("predict: --model requires --features");
  if (!a.params.empty() && a.corpus.empty())
    throw InvalidInput("predict: --params requires --corpus");

  std::vector<HorizonPrediction> rows;
  if (!a.params.empty())
    predict_ppi(a, c, rows);
  else
    predict_gbdt(a, c, rows);
  save_predictions_csv(rows, a.out);

  RunManifest m = base_manifest("predict", c);
  if (!a.params.empty()) {
    m.inputs.emplace_back("params_json", a.params);
    m.inputs.emplace_back("corpus_bin", a.corpus);
    m.config["mode"] = a.mode;
    m.config["train_window"] = std::to_string(a.train_window);
    m.config["unit_marks"] = a.unit_marks ? "true" : "false";
  } else {
    m.inputs.emplace_back("model_json", a.model);
    m.inputs.emplace_back("features_csv", a.features);
  }
  m.outputs.emplace_back("predictions_csv", a.out);
  m.config["rows"] = std::to_string(rows.size());
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  log_info("predict: " + std::to_string(rows.size()) + " rows -> " + a.out);
}

// ---------------------------------------------------------------------------
// evaluate / compare

ZeroPolicy parse_zero_policy(const std::string& name) {
  if (name == "error") return ZeroPolicy::error;
  if (name == "skip") return ZeroPolicy::skip;
  throw InvalidInput("unknown zero policy \"" + name + "\"");
}

struct EvaluateArgs {
  std::string corpus;
  std::string cohort;
  std::string predictions;
  std::string model_name = "model";
  std::string zero_policy = "error";
  double epsilon = 0.2;
  std::string out;
};

void run_evaluate(const EvaluateArgs& a, const Common& c) {
  Timer timer;
  const Corpus corpus = load_corpus_bin(a.corpus);
  const Cohort cohort = load_cohort_json(a.cohort);
  const auto predictions = load_predictions_csv(a.predictions);
  const HorizonReport report = evaluate_model(a.model_name, predictions, corpus, cohort,
                                              a.epsilon, parse_zero_policy(a.zero_policy));
  const ComparisonTable table = compare_models({report});
  write_text_file(a.out, report_to_json(table));

  RunManifest m = base_manifest("evaluate", c);
  m.inputs.emplace_back("corpus_bin", a.corpus);
  m.inputs.emplace_back("cohort_json", a.cohort);
  m.inputs.emplace_back("predictions_csv", a.predictions);
  m.outputs.emplace_back("report_json", a.out);
  m.config["model"] = a.model_name;
  m.config["epsilon"] = std::to_string(a.epsilon);
  m.config["zero_policy"] = a.zero_policy;
  m.wall_seconds = timer.seconds();
  write_manifest_for(m, a.out);
  log_info("evaluate: " + a.model_name + " over " + std::to_string(report.horizons.size()) +
           " horizons -> " + a.out);
}

struct CompareArgs {
  std::string corpus;
  std::string cohort;
  std::vector<std::string> predictions;  // name=path
  std::string external;
  std::string external_name = "PLI";
  std::string zero_policy = "error";
  double epsilon = 0.2;
  std::string out;
  std::string report;
};

void run_compare(const CompareArgs& a, const Common& c) {
  Timer timer;
  const Corpus corpus = load_corpus_bin(a.corpus);
  const Cohort cohort = load_cohort_json(a.cohort);
  const ZeroPolicy policy = parse_zero_policy(a.zero_policy);

  std::vector<std::pair<std::string, std::string>> sources;
  for (const std::string& spec : a.predictions) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw InvalidInput("compare: --predictions expects NAME=path, got \"" + spec + "\"");
    sources.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
  }
  if (!a.external.empty()) sources.emplace_back(a.external_name, a.external);
  if (sources.empty()) throw InvalidInput("compare: no prediction files given");

  std::vector<HorizonReport> reports;
  for (const auto& [name, path] : sources)
    reports.push_back(evaluate_model(name, load_predictions_csv(path), corpus, cohort,
                                     a.epsilon, policy));
  const ComparisonTable table = compare_models(std::move(reports));
  const std::string rendered = format_comparison_table(table);
  std::cout << rendered;

  RunManifest m = base_manifest("compare", c);
  m.inputs.emplace_back("corpus_bin", a.corpus);
  m.inputs.emplace_back("cohort_json", a.cohort);
  for (const auto& [name, path] : sources) m.inputs.emplace_back(name, path);
  m.config["epsilon"] = std::to_string(a.epsilon);
  m.config["zero_policy"] = a.zero_policy;
  m.wall_seconds = timer.seconds();
  if (!a.out.empty()) {
    write_text_file(a.out, rendered);
    m.outputs.emplace_back("comparison_txt", a.out);
    write_manifest_for(m, a.out);
  }
  if (!a.report.empty()) {
    write_text_file(a.report, report_to_json(table));
    m.outputs.emplace_back("report_json", a.report);
    write_manifest_for(m, a.report);
  }
  log_info("compare: " + std::to_string(table.models.size()) + " models at " +
           std::to_string(table.horizons.size()) + " horizons");
}

// ---------------------------------------------------------------------------
// demo

struct DemoArgs {
  std::string out_dir = "demo_out";
  double epsilon = 0.2;
};

void run_demo(const DemoArgs& a, const Common& c) {
  Timer timer;
  const auto at = [&](const char* name) { return a.out_dir + "/" + name; };

  log_info("demo: 1/8 synthesize corpus");
  run_synth({"", at("corpus.json"), at("truth.json")}, c);

  log_info("demo: 2/8 ingest");
  run_ingest({at("corpus.json"), at("corpus.bin"), false, false}, c);

  log_info("demo: 3/8 cohort");
  CohortArgs cohort_args;
  cohort_args.corpus = at("corpus.bin");
  cohort_args.out = at("cohort.json");
  cohort_args.year_min = 1980;
  cohort_args.year_max = 1980;
  cohort_args.min_early = 10;
  run_cohort(cohort_args, c);

  log_info("demo: 4/8 features and targets");
  run_features({at("corpus.bin"), at("cohort.json"), at("features.csv"), 0.0, false}, c);
  {
    const Corpus corpus = load_corpus_bin(at("corpus.bin"));
    const Cohort cohort = load_cohort_json(at("cohort.json"));
    std::vector<TargetRow> targets;
    for (const std::string& id : cohort.training_papers) {
      const auto idx = corpus.require(id);
      for (const int h : cohort.test_horizons)
        targets.push_back({id, h,
                           static_cast<double>(corpus.citations_within(
                               idx, cohort.train_window + h))});
    }
    save_targets_csv(targets, at("targets.csv"));
    RunManifest m = base_manifest("demo", c);
    m.inputs.emplace_back("corpus_bin", at("corpus.bin"));
    m.inputs.emplace_back("cohort_json", at("cohort.json"));
    m.outputs.emplace_back("targets_csv", at("targets.csv"));
    write_manifest_for(m, at("targets.csv"));
  }

  // Equal decay bounds pin the rates; per-paper rate freedom is not
  // identifiable at cohort event counts.
  write_text_file(at("fit.toml"), "w_min = 2.0\nw_max = 2.0\n");

  log_info("demo: 5/8 fit citation model (marked and unit variants)");
  run_fit_ppi({at("corpus.bin"), at("cohort.json"), at("fit.toml"), at("params_ppi.json"),
               at("fit_report_ppi.json"), 0.0, false},
              c);
  run_fit_ppi({at("corpus.bin"), at("cohort.json"), at("fit.toml"), at("params_necai.json"),
               at("fit_report_necai.json"), 0.0, true},
              c);

  log_info("demo: 6/8 predict");
  PredictArgs ppi_predict;
  ppi_predict.params = at("params_ppi.json");
  ppi_predict.corpus = at("corpus.bin");
  ppi_predict.out = at("pred_ppi.csv");
  run_predict(ppi_predict, c);
  PredictArgs necai_predict = ppi_predict;
  necai_predict.params = at("params_necai.json");
  necai_predict.out = at("pred_necai.csv");
  necai_predict.unit_marks = true;
  run_predict(necai_predict, c);

  log_info("demo: 7/8 boosted-tree baseline");
  write_text_file(at("grid.toml"),
                  "learning_rate_stride = 400\n"
                  "iterations_stride = 6\n"
                  "min_leaf_stride = 8\n"
                  "depth_stride = 3\n"
                  "subsample_stride = 6\n"
                  "objective = \"rmse\"\n"
                  "val_fraction = 0.25\n");
  run_fit_gbdt({at("features.csv"), at("targets.csv"), at("grid.toml"), "all",
                at("model_gbdt.json")},
               c);
  PredictArgs gbdt_predict;
  gbdt_predict.model = at("model_gbdt.json");
  gbdt_predict.features = at("features.csv");
  gbdt_predict.out = at("pred_gbdt.csv");
  gbdt_predict.horizons.clear();  // all horizons in the model
  run_predict(gbdt_predict, c);

  log_info("demo: 8/8 compare");
  CompareArgs compare_args;
  compare_args.corpus = at("corpus.bin");
  compare_args.cohort = at("cohort.json");
  compare_args.predictions = {"PPI=" + at("pred_ppi.csv"),
                              "PPI_NECAI=" + at("pred_necai.csv"),
                              "GBDT_All=" + at("pred_gbdt.csv")};
  compare_args.epsilon = a.epsilon;
  compare_args.out = at("comparison.txt");
  compare_args.report = at("report.json");
  run_compare(compare_args, c);

  log_info("demo: done in " + std::to_string(timer.seconds()) + " s -> " + a.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citeflux: citation dynamics modeling and prediction"};
  app.set_version_flag("--version", std::string("citeflux ") + std::string(kToolVersion));
  app.require_subcommand(0, 1);

  IngestArgs ingest_args;
  Common ingest_common;
  auto* ingest = app.add_subcommand("ingest", "Parse corpus JSON into the binary cache");
  ingest->add_option("--input", ingest_args.input, "Corpus JSON file")->required();
  ingest->add_option("--out", ingest_args.out, "Binary cache path")->required();
  auto* lenient =
      ingest->add_flag("--lenient", ingest_args.lenient, "Skip malformed records with warnings");
  ingest->add_flag("--strict", ingest_args.strict_flag, "Fail on malformed records (default)")
      ->excludes(lenient);
  add_common(ingest, ingest_common);
  ingest->callback([&] { run_ingest(ingest_args, ingest_common); });

  DisambiguateArgs dis_args;
  Common dis_common;
  auto* dis = app.add_subcommand("disambiguate", "Resolve author mentions to identities");
  dis->add_option("--corpus", dis_args.corpus, "Binary corpus cache")->required();
  dis->add_option("--out", dis_args.out, "Identity table JSON")->required();
  add_common(dis, dis_common);
  dis->callback([&] { run_disambiguate(dis_args, dis_common); });

  CohortArgs cohort_args;
  Common cohort_common;
  auto* cohort = app.add_subcommand("cohort", "Select the training cohort");
  cohort->add_option("--corpus", cohort_args.corpus, "Binary corpus cache")->required();
  cohort->add_option("--year-min", cohort_args.year_min, "First publication year")->required();
  cohort->add_option("--year-max", cohort_args.year_max, "Last publication year")->required();
  cohort->add_option("--min-early", cohort_args.min_early, "Citation floor inside the window");
  cohort->add_option("--train-window", cohort_args.train_window, "Training window in years");
  cohort->add_option("--horizons", cohort_args.horizons, "Test horizons, e.g. 1..10 or 1,2,5");
  cohort->add_option("--out", cohort_args.out, "Cohort JSON path")->required();
  add_common(cohort, cohort_common);
  cohort->callback([&] { run_cohort(cohort_args, cohort_common); });

  FeaturesArgs features_args;
  Common features_common;
  auto* features = app.add_subcommand("features", "Extract the canonical feature table");
  features->add_option("--corpus", features_args.corpus, "Binary corpus cache")->required();
  features->add_option("--cohort", features_args.cohort, "Cohort JSON")->required();
  features->add_option("--out", features_args.out, "Feature CSV path")->required();
  features->add_option("--mu-p", features_args.mu_p, "Log-citation offset for author scores");
  features->add_flag("--at-publication", features_args.at_publication,
                     "Author indicators at publication instead of the cutoff");
  add_common(features, features_common);
  features->callback([&] { run_features(features_args, features_common); });

  SynthArgs synth_args;
  Common synth_common;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
  synth->add_option("--config", synth_args.config, "Generator settings (TOML)");
  synth->add_option("--out", synth_args.out, "Corpus JSON path")->required();
  synth->add_option("--truth", synth_args.truth, "Ground truth JSON path")->required();
  add_common(synth, synth_common);
  synth->callback([&] { run_synth(synth_args, synth_common); });

  FitPpiArgs fit_ppi_args;
  Common fit_ppi_common;
  auto* fit_ppi = app.add_subcommand("fit-ppi", "Fit the citation intensity model");
  fit_ppi->add_option("--corpus", fit_ppi_args.corpus, "Binary corpus cache")->required();
  fit_ppi->add_option("--cohort", fit_ppi_args.cohort, "Cohort JSON")->required();
  fit_ppi->add_option("--config", fit_ppi_args.config, "Fit settings (TOML)");
  fit_ppi->add_option("--out", fit_ppi_args.out, "Fitted parameters JSON")->required();
  fit_ppi->add_option("--report", fit_ppi_args.report, "Fit diagnostics JSON");
  fit_ppi->add_option("--mu-p", fit_ppi_args.mu_p, "Log-citation offset for author scores");
  fit_ppi->add_flag("--unit-marks", fit_ppi_args.unit_marks,
                    "Ignore citer impact (the no-author-impact variant)");
  add_common(fit_ppi, fit_ppi_common);
  fit_ppi->callback([&] { run_fit_ppi(fit_ppi_args, fit_ppi_common); });

  FitGbdtArgs fit_gbdt_args;
  Common fit_gbdt_common;
  auto* fit_gbdt = app.add_subcommand("fit-gbdt", "Fit boosted trees per horizon");
  fit_gbdt->add_option("--features", fit_gbdt_args.features, "Feature CSV")->required();
  fit_gbdt->add_option("--targets", fit_gbdt_args.targets, "Target CSV")->required();
  fit_gbdt->add_option("--grid", fit_gbdt_args.grid, "Grid settings (TOML)")->required();
  fit_gbdt->add_option("--variant", fit_gbdt_args.variant, "all or top10")
      ->check(CLI::IsMember({"all", "top10"}));
  fit_gbdt->add_option("--out", fit_gbdt_args.out, "Model JSON path")->required();
  add_common(fit_gbdt, fit_gbdt_common);
  fit_gbdt->callback([&] { run_fit_gbdt(fit_gbdt_args, fit_gbdt_common); });

  PredictArgs predict_args;
  Common predict_common;
  auto* predict = app.add_subcommand("predict", "Predict cumulative citations per horizon");
  predict->add_option("--params", predict_args.params, "Fitted parameters JSON");
  predict->add_option("--model", predict_args.model, "Boosted-tree model JSON");
  predict->add_option("--features", predict_args.features, "Feature CSV (with --model)");
  predict->add_option("--corpus", predict_args.corpus, "Binary corpus cache (with --params)");
  predict->add_option("--horizons", predict_args.horizons, "Horizons, e.g. 1..10");
  predict->add_option("--mode", predict_args.mode, "frozen or propagated")
      ->check(CLI::IsMember({"frozen", "propagated"}));
  predict->add_option("--train-window", predict_args.train_window, "History cutoff in years");
  predict->add_option("--mark-mean", predict_args.mark_mean,
                      "Mean future mark for propagated mode");
  predict->add_option("--mu-p", predict_args.mu_p, "Log-citation offset for author scores");
  predict->add_flag("--unit-marks", predict_args.unit_marks,
                    "Rebuild history with unit marks");
  predict->add_option("--out", predict_args.out, "Predictions CSV path")->required();
  add_common(predict, predict_common);
  predict->callback([&] { run_predict(predict_args, predict_common); });

  EvaluateArgs evaluate_args;
  Common evaluate_common;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against the corpus");
  evaluate->add_option("--corpus", evaluate_args.corpus, "Binary corpus cache")->required();
  evaluate->add_option("--cohort", evaluate_args.cohort, "Cohort JSON")->required();
  evaluate->add_option("--predictions", evaluate_args.predictions, "Predictions CSV")
      ->required();
  evaluate->add_option("--model-name", evaluate_args.model_name, "Label in the report");
  evaluate->add_option("--epsilon", evaluate_args.epsilon, "Accuracy tolerance");
  evaluate->add_option("--zero-policy", evaluate_args.zero_policy, "error or skip")
      ->check(CLI::IsMember({"error", "skip"}));
  evaluate->add_option("--out", evaluate_args.out, "Report JSON path")->required();
  add_common(evaluate, evaluate_common);
  evaluate->callback([&] { run_evaluate(evaluate_args, evaluate_common); });

  CompareArgs compare_args;
  Common compare_common;
  auto* compare = app.add_subcommand("compare", "Evaluate several models side by side");
  compare->add_option("--corpus", compare_args.corpus, "Binary corpus cache")->required();
  compare->add_option("--cohort", compare_args.cohort, "Cohort JSON")->required();
  compare->add_option("--predictions", compare_args.predictions,
                      "NAME=predictions.csv (repeatable)");
  compare->add_option("--external", compare_args.external, "External predictions CSV");
  compare->add_option("--external-name", compare_args.external_name,
                      "Label for the external model");
  compare->add_option("--epsilon", compare_args.epsilon, "Accuracy tolerance");
  compare->add_option("--zero-policy", compare_args.zero_policy, "error or skip")
      ->check(CLI::IsMember({"error", "skip"}));
  compare->add_option("--out", compare_args.out, "Comparison table text path");
  compare->add_option("--report", compare_args.report, "Comparison report JSON path");
  add_common(compare, compare_common);
  compare->callback([&] { run_compare(compare_args, compare_common); });

  DemoArgs demo_args;
  Common demo_common;
  auto* demo = app.add_subcommand("demo", "Full synthetic pipeline in one command");
  demo->add_option("--out", demo_args.out_dir, "Output directory");
  demo->add_option("--epsilon", demo_args.epsilon, "Accuracy tolerance");
  add_common(demo, demo_common);
  demo->callback([&] { run_demo(demo_args, demo_common); });

  try {
    app.parse(argc, argv);
    if (app.get_subcommands().empty()) {
      std::cout << app.help();
      return 2;
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const IoError& e) {
    log_at(LogLevel::error, e.what());
    return 3;
  } catch (const NumericError& e) {
    log_at(LogLevel::error, e.what());
    return 4;
  } catch (const SchemaError& e) {
    log_at(LogLevel::error, e.what());
    return 5;
  } catch (const InvalidInput& e) {
    log_at(LogLevel::error, e.what());
    return 2;
  } catch (const std::exception& e) {
    log_at(LogLevel::error, std::string("unexpected failure: ") + e.what());
    return 1;
  }
}
