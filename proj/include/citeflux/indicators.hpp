#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "citeflux/corpus.hpp"

namespace citeflux {

// Six-number summary used for every per-author feature family.
struct StatBlock {
  double sum = 0.0;
  double max = 0.0;
  double min = 0.0;
  double avg = 0.0;
  double med = 0.0;
  double dev = 0.0;  // population standard deviation
};

// Throws InvalidInput on an empty input.
StatBlock make_stat_block(std::span<const double> values);

struct QScore {
  std::int32_t identity_id = -1;
  double q = 0.0;  // > 0 with the default log offset
  std::size_t n_papers = 0;
};

// Author productivity score: exp(mean over the author's papers of
// ln(c + log_offset) - mu_p), with c the paper's citation count up to
// citation_cutoff (absolute fractional years since epoch; all time when
// nullopt). log_offset = 0 is a test hook for scale checks; any paper whose
// offset count is not positive then raises NumericError.
QScore q_value(const Corpus& corpus, std::int32_t identity_id, double mu_p = 0.0,
               std::optional<double> citation_cutoff = std::nullopt,
               double log_offset = 1.0);

// Corpus-wide mean of ln(c + 1) at the cutoff; the natural mu_p estimate.
double estimate_mu_p(const Corpus& corpus,
                     std::optional<double> citation_cutoff = std::nullopt);

// Largest H such that at least H entries are >= H.
int h_index(std::span<const int> citation_counts);

// Citations received in calendar year `year` by the identity's papers
// published in [year - delta_t, year - 1], divided by the number of such
// papers; 0.0 when there are none.
double aif(const Corpus& corpus, std::int32_t identity_id, int year, int delta_t = 5);

// Two-year impact factor of a journal at `year`: citations in `year` to its
// papers published in the prior two calendar years over the count of those
// papers; 0.0 when it published none. Unknown journal raises InvalidInput.
double jif(const Corpus& corpus, const std::string& journal_id, int year);

// Mark carried by a citation event: 1 + q_citer / q_max, in (1, 2].
double citer_impact(double q_citer, double q_max);

inline constexpr std::array<std::string_view, 24> kFeatureNames = {
    "c1",      "c2",      "c3",      "c4",      "c5",       //
    "q_sum",   "q_max",   "q_min",   "q_avg",   "q_med",   "q_dev",
    "h_sum",   "h_max",   "h_min",   "h_avg",   "h_med",   "h_dev",
    "aif_sum", "aif_max", "aif_min", "aif_avg", "aif_med", "aif_dev",
    "jif"};

struct FeatureVector {
  std::array<int, 5> c{};  // citations in year k after publication, [k-1, k)
  StatBlock q;             // over the paper's authors
  StatBlock h;
  StatBlock aif;
  double jif = 0.0;  // paper's journal at publication year

  // Canonical order matching kFeatureNames.
  std::array<double, 24> values() const;
};

struct FeatureOptions {
  double cutoff_years = 5.0;    // author indicators use data up to pub + cutoff
  double mu_p = 0.0;
  int delta_t = 5;              // AIF window
  bool at_publication = false;  // author indicators at publication date instead
};

// Table of per-paper model inputs. c1..c5 always cover the first five years
// after publication; author stat blocks honor the cutoff mode; a paper with
// no authors gets all-zero blocks.
FeatureVector feature_vector(const Corpus& corpus, std::string_view paper_id,
                             const FeatureOptions& options = {});

}  // namespace citeflux
