#include "citeflux/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <json.hpp>

#include "citeflux/dates.hpp"
#include "citeflux/errors.hpp"
#include "citeflux/ppi_model.hpp"
#include "citeflux/prng.hpp"

namespace citeflux {

namespace {

// Fixed-width base-26 id segment; alphabetic because name normalization in
// the disambiguator drops every non-letter.
std::string letters(std::size_t value, int width) {
  std::string out(static_cast<std::size_t>(width), 'a');
  for (int i = width - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<char>('a' + value % 26);
    value /= 26;
  }
  return out;
}

struct Rec {
  std::string id;
  CivilDate date;
  std::string journal;
  bool has_author = false;
  std::string surname;
  std::string affiliation;
  std::vector<std::string> refs;
};

// All emitted strings are [A-Za-z ] by construction, so no JSON escaping.
void emit_record(std::string& out, const Rec& r) {
  out += "{\"id\":\"";
  out += r.id;
  out += "\",\"date\":\"";
  out += format_iso_date(r.date);
  out += "\",\"journal\":\"";
  out += r.journal;
  out += "\"";
  if (r.has_author) {
    out += ",\"authors\":[{\"surname\":\"";
    out += r.surname;
    out += "\",\"given\":\"Q\",\"affiliations\":[\"";
    out += r.affiliation;
    out += "\"]}]";
  }
  if (!r.refs.empty()) {
    out += ",\"references\":[";
    for (std::size_t i = 0; i < r.refs.size(); ++i) {
      if (i) out += ",";
      out += "\"";
      out += r.refs[i];
      out += "\"";
    }
    out += "]";
  }
  out += "}";
}

int journal_of(std::uint64_t seed, const std::string& id, int n_journals) {
  Rng g(derive_seed(seed, "jnl/" + id));
  return static_cast<int>(uniform_index(g, static_cast<std::uint64_t>(n_journals)));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_papers < 0 || n_papers > 400000)
    throw InvalidInput("SynthConfig: n_papers outside [0, 400000]");
  if (n_authors < 1 || n_authors > 400000)
    throw InvalidInput("SynthConfig: n_authors outside [1, 400000]");
  if (n_journals < 1 || n_journals > 676)
    throw InvalidInput("SynthConfig: n_journals outside [1, 676]");
  if (pub_year_min > pub_year_max || pub_year_min < 1800 || pub_year_max > 2400)
    throw InvalidInput("SynthConfig: publication years must be ordered within [1800, 2400]");
  if (pub_year_max - pub_year_min >= 600)
    throw InvalidInput("SynthConfig: publication year span exceeds the id alphabet");
  if (!std::isfinite(q_log_mean) || !(q_log_sigma >= 0.0))
    throw InvalidInput("SynthConfig: citer score distribution is malformed");
  if (q_cap < 1) throw InvalidInput("SynthConfig: q_cap must be >= 1");
  if (!(star_q_min > 0.0) || !(star_q_min <= star_q_max))
    throw InvalidInput("SynthConfig: cohort author score range must be positive and ordered");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw InvalidInput("SynthConfig: beta must be finite and >= 0");
  if (!(alpha_min >= 0.0) || !(alpha_min <= alpha_max) || !std::isfinite(alpha_max))
    throw InvalidInput("SynthConfig: alpha range must be ordered and >= 0");
  if (!(w1_min > 0.0) || !(w1_min <= w1_max) || !(w2_min > 0.0) || !(w2_min <= w2_max))
    throw InvalidInput("SynthConfig: decay ranges must be positive and ordered");
  if (!(train_window > 0.0) || !(horizon_span >= 0.0))
    throw InvalidInput("SynthConfig: observation spans must be positive");
  if (portfolio_size < 1 || portfolio_size > 600)
    throw InvalidInput("SynthConfig: portfolio_size outside [1, 600]");
}

SynthResult generate(const SynthConfig& config) {
  config.validate();

  SynthResult out;
  out.truth.beta = config.beta;
  out.truth.train_window = config.train_window;
  out.truth.horizon_span = config.horizon_span;
  if (config.n_papers == 0) {
    out.corpus_json = "[]\n";
    return out;
  }

  const auto n_authors = static_cast<std::size_t>(config.n_authors);
  std::vector<int> pool_q(n_authors, 1);
  {
    Rng g(derive_seed(config.seed, "pool"));
    for (auto& q : pool_q) {
      const auto draw = std::llround(lognormal(g, config.q_log_mean, config.q_log_sigma));
      q = static_cast<int>(std::clamp<long long>(draw, 1, config.q_cap));
    }
  }
  const int q_top = *std::max_element(pool_q.begin(), pool_q.end());
  const std::size_t anchor = static_cast<std::size_t>(
      std::max_element(pool_q.begin(), pool_q.end()) - pool_q.begin());
  double q_sum = 0.0;
  for (int q : pool_q) q_sum += q;
  const double mark_mean = 1.0 + (q_sum / static_cast<double>(n_authors)) / q_top;

  // Worst draw must stay subcritical or the simulation cannot terminate.
  if (config.alpha_max * mark_mean / config.w2_min >= 1.0)
    throw NumericError("generate: supercritical configuration (alpha_max * mean mark >= w2_min)");

  for (std::size_t a = 0; a < n_authors; ++a)
    out.truth.author_q["A" + letters(a, 4)] = static_cast<double>(pool_q[a]);

  const auto window_days =
      static_cast<std::int64_t>(std::floor(config.train_window * kDaysPerYear));
  const double total_span = config.train_window + config.horizon_span;
  const int year_span = config.pub_year_max - config.pub_year_min + 1;

  std::vector<Rec> recs;
  // Filler demand per publication year: (cited id, citations owed).
  std::vector<std::vector<std::pair<std::string, int>>> needs(
      static_cast<std::size_t>(year_span));
  int first_year_idx = year_span;

  for (int d = 0; d < config.n_papers; ++d) {
    const std::string paper_id = "P" + letters(static_cast<std::size_t>(d), 4);
    const std::string star = "S" + letters(static_cast<std::size_t>(d), 4);

    Rng pr(derive_seed(config.seed, "par/" + paper_id));
    const int year_idx =
        static_cast<int>(uniform_index(pr, static_cast<std::uint64_t>(year_span)));
    const int year = config.pub_year_min + year_idx;
    const double s = std::clamp(lognormal(pr, config.q_log_mean, config.q_log_sigma),
                                config.star_q_min, config.star_q_max);
    const double alpha = uniform(pr, config.alpha_min, config.alpha_max);
    const double w1 = uniform(pr, config.w1_min, config.w1_max);
    const double w2 = uniform(pr, config.w2_min, config.w2_max);
    first_year_idx = std::min(first_year_idx, year_idx);

    std::vector<std::size_t> citers;
    MarkSampler sampler;
    sampler.mean = mark_mean;
    // First accepted citation comes from the top-score author, which makes
    // every paper's recomputed mark normalizer equal q_top.
    sampler.draw = [&citers, &pool_q, anchor, q_top, n_authors,
                    first = true](Rng& g) mutable {
      const std::size_t a = first ? anchor : uniform_index(g, n_authors);
      first = false;
      citers.push_back(a);
      return 1.0 + static_cast<double>(pool_q[a]) / q_top;
    };

    PaperParams params;
    params.beta = {config.beta};
    params.s = {s};
    params.alpha = alpha;
    params.w1 = w1;
    params.w2 = w2;
    const MarkedEventSequence events =
        simulate(params, total_span, sampler, derive_seed(config.seed, "sim/" + paper_id));
    if (events.size() >= 17000)
      throw NumericError("generate: event count exceeded the id alphabet");
    if (citers.size() != events.size())
      throw NumericError("generate: mark draws out of step with accepted events");

    out.truth.papers[paper_id] = PaperTruth{alpha, w1, w2, s};
    out.truth.author_q[star] = s;

    const std::int64_t pub_days = days_from_civil(CivilDate{year, 1, 1});
    Rec subject;
    subject.id = paper_id;
    subject.date = CivilDate{year, 1, 1};
    subject.journal = "J" + letters(static_cast<std::size_t>(
                                        journal_of(config.seed, paper_id, config.n_journals)),
                                    2);
    subject.has_author = true;
    subject.surname = star;
    subject.affiliation = "s" + letters(static_cast<std::size_t>(d), 4);
    recs.push_back(std::move(subject));

    std::size_t n_window = 0;
    for (std::size_t e = 0; e < events.size(); ++e) {
      const double t = events.times[e];
      std::int64_t day = std::llround(t * kDaysPerYear);
      // Day rounding must not move an event across the window edge.
      if (t <= config.train_window)
        day = std::min(day, window_days);
      else
        day = std::max(day, window_days + 1);
      const bool in_window = day <= window_days;
      n_window += in_window ? 1 : 0;

      const std::size_t a = citers[e];
      Rec citing;
      citing.id = "C" + letters(static_cast<std::size_t>(d), 4) + letters(e, 3);
      citing.date = civil_from_days(pub_days + day);
      citing.journal =
          "J" + letters(static_cast<std::size_t>(
                            journal_of(config.seed, citing.id, config.n_journals)),
                        2);
      citing.has_author = true;
      citing.surname = "A" + letters(a, 4);
      citing.affiliation = "a" + letters(a, 4);
      citing.refs = {paper_id};
      if (in_window && pool_q[a] > 1)
        needs[static_cast<std::size_t>(year_idx)].emplace_back(citing.id, pool_q[a] - 1);
      recs.push_back(std::move(citing));
    }

    // Portfolio levels chosen so the author's realized score, subject paper
    // included, lands on s up to integer rounding: the product of (c + 1)
    // over P prior papers times (n_window + 1) targets s^(P+1).
    const int P = config.portfolio_size;
    const double u = std::pow(s, P + 1) / static_cast<double>(n_window + 1);
    const auto level =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(
                                      std::pow(u, 1.0 / static_cast<double>(P)))));
    const double log_ratio = std::log1p(1.0 / static_cast<double>(level));
    const auto raised = static_cast<int>(std::clamp<long long>(
        std::llround((std::log(u) - P * std::log(static_cast<double>(level))) / log_ratio),
        0, P));
    for (int i = 0; i < P; ++i) {
      const auto cites_owed = static_cast<int>(level) - (i < raised ? 0 : 1);
      Rec prior;
      prior.id = "F" + letters(static_cast<std::size_t>(d), 4) +
                 letters(static_cast<std::size_t>(i), 2);
      prior.date = CivilDate{config.pub_year_min - 10, 1, 1};
      prior.journal =
          "J" + letters(static_cast<std::size_t>(
                            journal_of(config.seed, prior.id, config.n_journals)),
                        2);
      prior.has_author = true;
      prior.surname = star;
      prior.affiliation = "s" + letters(static_cast<std::size_t>(d), 4);
      if (cites_owed > 0)
        needs[static_cast<std::size_t>(first_year_idx)].emplace_back(prior.id, cites_owed);
      recs.push_back(std::move(prior));
    }
  }

  // Portfolio demand was queued under first_year_idx before later papers
  // could lower it; requeue everything onto the final earliest year.
  if (first_year_idx < year_span) {
    auto& earliest = needs[static_cast<std::size_t>(first_year_idx)];
    for (int y = 0; y < year_span; ++y) {
      if (y == first_year_idx) continue;
      auto& bucket = needs[static_cast<std::size_t>(y)];
      std::vector<std::pair<std::string, int>> kept;
      for (auto& item : bucket) {
        if (item.first[0] == 'F')
          earliest.push_back(std::move(item));
        else
          kept.push_back(std::move(item));
      }
      bucket = std::move(kept);
    }
  }

  // Fillers sit on the last in-window day of their year's cohort, so the
  // citations they carry are all visible at that cohort's train cutoff.
  for (int y = 0; y < year_span; ++y) {
    auto& bucket = needs[static_cast<std::size_t>(y)];
    if (bucket.empty()) continue;
    std::sort(bucket.begin(), bucket.end());
    int max_need = 0;
    for (const auto& [id, need] : bucket) max_need = std::max(max_need, need);
    if (max_need >= 17576)
      throw NumericError("generate: filler demand exceeded the id alphabet");
    const std::int64_t batch_days =
        days_from_civil(CivilDate{config.pub_year_min + y, 1, 1}) + window_days;
    for (int f = 0; f < max_need; ++f) {
      Rec filler;
      filler.id = "Z" + letters(static_cast<std::size_t>(y), 2) +
                  letters(static_cast<std::size_t>(f), 3);
      filler.date = civil_from_days(batch_days);
      filler.journal =
          "J" + letters(static_cast<std::size_t>(
                            journal_of(config.seed, filler.id, config.n_journals)),
                        2);
      for (const auto& [id, need] : bucket)
        if (need > f) filler.refs.push_back(id);
      recs.push_back(std::move(filler));
    }
  }

  std::sort(recs.begin(), recs.end(),
            [](const Rec& a, const Rec& b) { return a.id < b.id; });

  std::string& json = out.corpus_json;
  json.reserve(recs.size() * 160);
  json += "[\n";
  for (std::size_t i = 0; i < recs.size(); ++i) {
    emit_record(json, recs[i]);
    json += i + 1 < recs.size() ? ",\n" : "\n";
  }
  json += "]\n";
  return out;
}

std::string truth_to_json(const GroundTruth& truth) {
  nlohmann::json j;
  j["beta"] = truth.beta;
  j["train_window"] = truth.train_window;
  j["horizon_span"] = truth.horizon_span;
  auto& papers = j["papers"] = nlohmann::json::object();
  for (const auto& [id, t] : truth.papers)
    papers[id] = {{"alpha", t.alpha}, {"w1", t.w1}, {"w2", t.w2}, {"s", t.s}};
  auto& authors = j["author_q"] = nlohmann::json::object();
  for (const auto& [name, q] : truth.author_q) authors[name] = q;
  return j.dump(1) + "\n";
}

GroundTruth truth_from_json(std::string_view text) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw SchemaError("truth file: not a JSON object");
  GroundTruth truth;
  try {
    truth.beta = j.at("beta").get<double>();
    truth.train_window = j.at("train_window").get<double>();
    truth.horizon_span = j.at("horizon_span").get<double>();
    for (const auto& [id, t] : j.at("papers").items()) {
      PaperTruth pt;
      pt.alpha = t.at("alpha").get<double>();
      pt.w1 = t.at("w1").get<double>();
      pt.w2 = t.at("w2").get<double>();
      pt.s = t.at("s").get<double>();
      truth.papers[id] = pt;
    }
    for (const auto& [name, q] : j.at("author_q").items())
      truth.author_q[name] = q.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("truth file: ") + e.what());
  }
  return truth;
}

}  // namespace citeflux
