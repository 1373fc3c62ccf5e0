#include "citeflux/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "citeflux/errors.hpp"
#include "citeflux/stats.hpp"

namespace citeflux {

namespace {

// Unique paper indexes an identity appears on.
std::vector<std::int32_t> identity_papers(const Corpus& corpus, std::int32_t identity_id) {
  if (identity_id < 0 ||
      static_cast<std::size_t>(identity_id) >= corpus.identities().size())
    throw InvalidInput("unknown author identity " + std::to_string(identity_id));
  const auto& mentions = corpus.identities()[static_cast<std::size_t>(identity_id)].mentions;
  std::vector<std::int32_t> papers;
  papers.reserve(mentions.size());
  for (const auto& m : mentions)
    if (papers.empty() || papers.back() != m.paper) papers.push_back(m.paper);
  return papers;  // mentions are sorted by (paper, position)
}

int pub_year_of_edge(const Corpus& corpus, const CitationEdge& e) {
  return corpus.paper(e.citing).date.year;
}

}  // namespace

StatBlock make_stat_block(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("make_stat_block: empty input");
  StatBlock b;
  b.sum = 0.0;
  b.max = values[0];
  b.min = values[0];
  for (double v : values) {
    b.sum += v;
    b.max = std::max(b.max, v);
    b.min = std::min(b.min, v);
  }
  b.avg = b.sum / static_cast<double>(values.size());
  b.med = median_of(std::vector<double>(values.begin(), values.end()));
  b.dev = pop_stddev(values, b.avg);
  return b;
}

QScore q_value(const Corpus& corpus, std::int32_t identity_id, double mu_p,
               std::optional<double> citation_cutoff, double log_offset) {
  // Papers not yet published at the cutoff are outside the author's record.
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto p : identity_papers(corpus, identity_id)) {
    if (citation_cutoff && corpus.paper(p).pub_time > *citation_cutoff) continue;
    const double c =
        static_cast<double>(corpus.citations_until(p, citation_cutoff)) + log_offset;
    if (!(c > 0.0))
      throw NumericError("q_value: non-positive citation count under log offset " +
                         std::to_string(log_offset));
    acc += std::log(c);
    ++n;
  }
  if (n == 0)
    throw InvalidInput("q_value: identity " + std::to_string(identity_id) +
                       " has no papers at the cutoff");
  QScore s;
  s.identity_id = identity_id;
  s.n_papers = n;
  s.q = std::exp(acc / static_cast<double>(n) - mu_p);
  return s;
}

double estimate_mu_p(const Corpus& corpus, std::optional<double> citation_cutoff) {
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto p = static_cast<std::int32_t>(i);
    if (citation_cutoff && corpus.paper(p).pub_time > *citation_cutoff) continue;
    acc += std::log1p(static_cast<double>(corpus.citations_until(p, citation_cutoff)));
    ++n;
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

int h_index(std::span<const int> citation_counts) {
  std::vector<int> sorted(citation_counts.begin(), citation_counts.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<int>());
  int h = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] >= static_cast<int>(i) + 1) h = static_cast<int>(i) + 1;
    else break;
  }
  return h;
}

double aif(const Corpus& corpus, std::int32_t identity_id, int year, int delta_t) {
  if (delta_t < 1) throw InvalidInput("aif: delta_t must be >= 1");
  const auto papers = identity_papers(corpus, identity_id);
  std::size_t in_window = 0;
  std::size_t cites = 0;
  for (const auto p : papers) {
    const int py = corpus.paper(p).date.year;
    if (py < year - delta_t || py > year - 1) continue;
    ++in_window;
    for (const auto e : corpus.citers_of(p))
      if (pub_year_of_edge(corpus, corpus.edge(e)) == year) ++cites;
  }
  if (in_window == 0) return 0.0;
  return static_cast<double>(cites) / static_cast<double>(in_window);
}

double jif(const Corpus& corpus, const std::string& journal_id, int year) {
  const auto it = corpus.journals().find(journal_id);
  if (it == corpus.journals().end())
    throw InvalidInput("unknown journal \"" + journal_id + "\"");
  std::size_t in_window = 0;
  std::size_t cites = 0;
  for (const auto p : it->second) {
    const int py = corpus.paper(p).date.year;
    if (py != year - 1 && py != year - 2) continue;
    ++in_window;
    for (const auto e : corpus.citers_of(p))
      if (pub_year_of_edge(corpus, corpus.edge(e)) == year) ++cites;
  }
  if (in_window == 0) return 0.0;
  return static_cast<double>(cites) / static_cast<double>(in_window);
}

double citer_impact(double q_citer, double q_max) {
  if (!(q_max > 0.0)) throw InvalidInput("citer_impact: q_max must be positive");
  if (q_citer < 0.0 || q_citer > q_max)
    throw InvalidInput("citer_impact: q_citer outside [0, q_max]");
  return 1.0 + q_citer / q_max;
}

std::array<double, 24> FeatureVector::values() const {
  return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2]),
          static_cast<double>(c[3]), static_cast<double>(c[4]),
          q.sum,   q.max,   q.min,   q.avg,   q.med,   q.dev,
          h.sum,   h.max,   h.min,   h.avg,   h.med,   h.dev,
          aif.sum, aif.max, aif.min, aif.avg, aif.med, aif.dev,
          jif};
}

FeatureVector feature_vector(const Corpus& corpus, std::string_view paper_id,
                             const FeatureOptions& options) {
  if (!corpus.disambiguated())
    throw InvalidInput("feature_vector requires a disambiguated corpus");
  if (!options.at_publication && options.cutoff_years < 5.0)
    throw InvalidInput("feature_vector: cutoff must cover the five-year counts");
  const auto p = corpus.require(paper_id);
  const auto& rec = corpus.paper(p);

  FeatureVector fv;
  for (const auto e : corpus.citers_of(p)) {
    const double t = corpus.edge(e).time;
    if (t >= 5.0) break;  // citers are time-sorted
    ++fv.c[static_cast<std::size_t>(t)];
  }

  const double cutoff_abs =
      options.at_publication ? rec.pub_time : rec.pub_time + options.cutoff_years;
  const int aif_year =
      options.at_publication
          ? rec.date.year
          : civil_from_days(days_from_civil(rec.date) +
                            static_cast<std::int64_t>(options.cutoff_years * kDaysPerYear))
                .year;

  std::set<std::int32_t> identities;
  for (std::size_t pos = 0; pos < rec.authors.size(); ++pos)
    identities.insert(corpus.identity_of(p, static_cast<std::int32_t>(pos)));

  if (!identities.empty()) {
    std::vector<double> qs, hs, aifs;
    for (const auto id : identities) {
      qs.push_back(q_value(corpus, id, options.mu_p, cutoff_abs).q);
      std::vector<int> counts;
      for (const auto ap : identity_papers(corpus, id)) {
        if (corpus.paper(ap).pub_time > cutoff_abs) continue;
        counts.push_back(static_cast<int>(corpus.citations_until(ap, cutoff_abs)));
      }
      hs.push_back(static_cast<double>(h_index(counts)));
      aifs.push_back(aif(corpus, id, aif_year, options.delta_t));
    }
    fv.q = make_stat_block(qs);
    fv.h = make_stat_block(hs);
    fv.aif = make_stat_block(aifs);
  }

  fv.jif = jif(corpus, rec.journal, rec.date.year);
  return fv;
}

}  // namespace citeflux
