#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "citeflux/dates.hpp"

namespace citeflux {

struct RawAuthor {
  std::string surname;  // non-empty
  std::string given;    // may be a single initial, possibly dotted
  std::vector<std::string> affiliations;
};

struct PaperRecord {
  std::string id;
  std::string title;
  CivilDate date;
  std::string journal;
  std::vector<RawAuthor> authors;
  std::vector<std::string> references;  // paper ids, no duplicates
  double pub_time = 0.0;                // fractional years since 1970-01-01
};

struct AuthorMention {
  std::int32_t paper = -1;
  std::int32_t position = -1;

  friend bool operator==(const AuthorMention&, const AuthorMention&) = default;
  friend bool operator<(const AuthorMention& a, const AuthorMention& b) {
    return a.paper != b.paper ? a.paper < b.paper : a.position < b.position;
  }
};

struct AuthorIdentity {
  std::int32_t id = -1;
  std::vector<AuthorMention> mentions;  // sorted
};

struct CitationEdge {
  std::int32_t citing = -1;
  std::int32_t cited = -1;
  double time = 0.0;  // citing pub_time minus cited pub_time, >= 0
};

struct CorpusStats {
  std::size_t records_skipped = 0;
  std::size_t duplicate_ids_skipped = 0;
  std::size_t duplicate_refs_dropped = 0;
  std::size_t dangling_refs = 0;
  std::size_t negative_edges_dropped = 0;

  std::size_t total_warnings() const {
    return records_skipped + duplicate_ids_skipped + duplicate_refs_dropped +
           dangling_refs + negative_edges_dropped;
  }
};

enum class Strictness { strict, lenient };

// Immutable once loaded and disambiguated; safe for concurrent reads.
class Corpus {
 public:
  Corpus() = default;

  // Validates records, builds the id index, the citation edges (negative-time
  // edges dropped and counted) and the journal index. `stats` carries counts
  // accumulated during parsing.
  static Corpus from_records(std::vector<PaperRecord> records, CorpusStats stats);

  std::size_t size() const { return papers_.size(); }
  const PaperRecord& paper(std::int32_t idx) const { return papers_[static_cast<std::size_t>(idx)]; }
  const std::vector<PaperRecord>& papers() const { return papers_; }

  std::optional<std::int32_t> find(std::string_view paper_id) const;
  // Throws InvalidInput naming the id when absent.
  std::int32_t require(std::string_view paper_id) const;

  const std::vector<CitationEdge>& edges() const { return edges_; }
  const CitationEdge& edge(std::int32_t e) const { return edges_[static_cast<std::size_t>(e)]; }

  // Edge indexes into edges(), sorted by (time, citing paper id).
  std::span<const std::int32_t> citers_of(std::int32_t paper) const;

  // Citations with edge time <= rel_time (relative to the cited paper).
  std::size_t citations_within(std::int32_t paper, double rel_time) const;
  // Citations whose citing paper was published on or before cutoff_time
  // (absolute, fractional years since epoch); all citations when nullopt.
  std::size_t citations_until(std::int32_t paper, std::optional<double> cutoff_time) const;

  const std::unordered_map<std::string, std::vector<std::int32_t>>& journals() const {
    return journals_;
  }

  bool disambiguated() const { return !identities_.empty() || mention_count_ == 0; }
  const std::vector<AuthorIdentity>& identities() const { return identities_; }
  // Identity of the mention at (paper, author position); -1 before disambiguation.
  std::int32_t identity_of(std::int32_t paper, std::int32_t position) const;
  std::size_t mention_count() const { return mention_count_; }

  const CorpusStats& stats() const { return stats_; }

 private:
  friend void disambiguate_authors(Corpus&, const struct DisambiguationConfig&);

  std::vector<PaperRecord> papers_;
  std::unordered_map<std::string, std::int32_t> index_;
  std::vector<CitationEdge> edges_;
  std::vector<std::int32_t> citer_offsets_;  // CSR layout over citer_edges_
  std::vector<std::int32_t> citer_edges_;
  std::unordered_map<std::string, std::vector<std::int32_t>> journals_;
  std::vector<AuthorIdentity> identities_;
  std::vector<std::vector<std::int32_t>> mention_identity_;  // [paper][position]
  std::size_t mention_count_ = 0;
  CorpusStats stats_;
};

// corpus.json: UTF-8 array of {"id","title","date","journal","authors":[...],
// "references":[...]}. Lenient mode skips and counts malformed records;
// strict mode throws SchemaError on the first one.
Corpus load_corpus(const std::string& path, Strictness strictness);
Corpus load_corpus_from_json_text(std::string_view text, Strictness strictness);

struct DisambiguationConfig {
  // Token-set Jaccard threshold for "similar affiliation".
  double affiliation_jaccard = 0.5;
};

// Merges author mentions into identities. Two mentions merge iff surnames
// match, given names are compatible (equal, or one is the other's initial)
// and the mentions are linked by a citation between their papers, a shared
// co-author, or a similar affiliation. Closure is transitive. Deterministic
// and idempotent.
void disambiguate_authors(Corpus& corpus, const DisambiguationConfig& config = {});

struct CitationHistory {
  std::vector<double> times;         // ascending; ties by citing paper id
  std::vector<std::int32_t> citing;  // paper indexes aligned with times
  double observation_end = 0.0;
};

// Citation times of `paper` in years since its publication, truncated at
// `cutoff` (inclusive) when given.
CitationHistory citation_history(const Corpus& corpus, std::string_view paper_id,
                                 std::optional<double> cutoff);
CitationHistory citation_history(const Corpus& corpus, std::int32_t paper,
                                 std::optional<double> cutoff);

struct Cohort {
  std::vector<std::string> training_papers;  // sorted by id
  double train_window = 5.0;
  std::vector<int> test_horizons;  // years past the train window
  int pub_year_min = 0;
  int pub_year_max = 0;
  int min_early_citations = 5;
};

std::vector<int> default_horizons();  // 1..10

// Training set: papers published in [pub_year_min, pub_year_max] with at
// least min_early_citations citations within train_window of publication.
Cohort build_cohort(const Corpus& corpus, int pub_year_min, int pub_year_max,
                    int min_early_citations = 5, double train_window = 5.0,
                    std::vector<int> test_horizons = default_horizons());

// Name normalization used by disambiguation: diacritics folded, lowercased,
// punctuation stripped. Exposed for tests and for co-author keys.
std::string normalize_name(std::string_view s);
bool given_names_compatible(std::string_view a_norm, std::string_view b_norm);

}  // namespace citeflux
