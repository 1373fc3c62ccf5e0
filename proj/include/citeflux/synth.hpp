#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace citeflux {

// Generator scale and parameter distributions. Citing-author scores are
// integers drawn from a rounded log-normal clamped to [1, q_cap]; cohort
// papers draw their background feature from the same log-normal clamped to
// [star_q_min, star_q_max]; alpha and the decay rates are uniform on their
// ranges (equal bounds pin a value).
struct SynthConfig {
  int n_papers = 500;    // cohort papers with simulated citation dynamics
  int n_authors = 300;   // citing-author pool
  int n_journals = 3;
  int pub_year_min = 1980;
  int pub_year_max = 1980;

  double q_log_mean = 1.0;  // citing-author score source, log scale
  double q_log_sigma = 0.7;
  int q_cap = 8;

  double star_q_min = 4.0;  // cohort-paper author score range
  double star_q_max = 10.0;

  double beta = 12.0;       // shared background coefficient
  double alpha_min = 0.15;  // self-excitation range
  double alpha_max = 1.15;
  double w1_min = 2.0;  // decay-rate ranges, 1/years
  double w1_max = 2.0;
  double w2_min = 2.0;
  double w2_max = 2.0;

  double train_window = 5.0;   // years of history the fit sees
  double horizon_span = 10.0;  // simulated years past the window
  int portfolio_size = 12;     // prior papers per cohort-paper author
  std::uint64_t seed = 0;

  // Throws InvalidInput: counts >= 1 (n_papers >= 0), ordered positive
  // ranges, year span within the id alphabet.
  void validate() const;
};

struct PaperTruth {
  double alpha = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
  double s = 0.0;  // background feature the simulation used
};

// Keys are corpus paper ids (papers) and author surnames (author_q), both
// unique by construction.
struct GroundTruth {
  double beta = 0.0;
  double train_window = 0.0;
  double horizon_span = 0.0;
  std::map<std::string, PaperTruth> papers;
  std::map<std::string, double> author_q;
};

struct SynthResult {
  std::string corpus_json;  // corpus.json schema, records sorted by id
  GroundTruth truth;
};

// Simulates every cohort paper's citation process over
// train_window + horizon_span and materializes the events as real corpus
// records: each citation becomes a citing paper whose author's score is
// realized exactly (score - 1 reference-list citations from filler papers
// published at the window edge), so the pipeline's recomputed marks and
// background features reproduce the generative ones. The first citation of
// every paper comes from the top-score author, which pins the per-paper mark
// normalizer. Cohort-paper author scores are realized to a few percent by a
// portfolio of prior papers sized against the paper's own window citations.
// Deterministic per config; single-year ranges make citer scores exact,
// multi-year ranges blur scores across year boundaries.
// Throws NumericError when alpha_max * mean mark / w2_min >= 1.
SynthResult generate(const SynthConfig& config);

std::string truth_to_json(const GroundTruth& truth);
// Throws SchemaError on malformed input.
GroundTruth truth_from_json(std::string_view text);

}  // namespace citeflux
