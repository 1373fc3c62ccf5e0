#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "citeflux/corpus.hpp"
#include "citeflux/errors.hpp"

using namespace citeflux;

namespace {

PaperRecord make_paper(std::string id, double pub_time, std::vector<std::string> refs = {},
                       std::vector<RawAuthor> authors = {}, std::string journal = "J1") {
  PaperRecord r;
  r.id = std::move(id);
  r.pub_time = pub_time;
  r.date.year = 1970 + static_cast<int>(pub_time);
  r.date.month = 1;
  r.date.day = 1;
  r.journal = std::move(journal);
  r.references = std::move(refs);
  r.authors = std::move(authors);
  return r;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("empty corpus has no papers and no edges") {
  const auto corpus = load_corpus_from_json_text("[]", Strictness::strict);
  CHECK(corpus.size() == 0);
  CHECK(corpus.edges().empty());
  CHECK(corpus.stats().total_warnings() == 0);
  CHECK(corpus.disambiguated());  // no mentions to assign
}

TEST_CASE("reference two years later yields one edge with time 2.0") {
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("A", 10.0));
  recs.push_back(make_paper("B", 12.0, {"A"}));
  const auto corpus = Corpus::from_records(std::move(recs), {});
  REQUIRE(corpus.edges().size() == 1);
  const auto& e = corpus.edges()[0];
  CHECK(corpus.paper(e.citing).id == "B");
  CHECK(corpus.paper(e.cited).id == "A");
  CHECK(e.time == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("backwards reference is dropped with one counted warning") {
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("A", 12.0));
  recs.push_back(make_paper("B", 10.0, {"A"}));  // B predates A
  const auto corpus = Corpus::from_records(std::move(recs), {});
  CHECK(corpus.edges().empty());
  CHECK(corpus.stats().negative_edges_dropped == 1);
  CHECK(corpus.stats().total_warnings() == 1);
}

TEST_CASE("same-day citation is kept with time zero") {
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("A", 10.0));
  recs.push_back(make_paper("B", 10.0, {"A"}));
  const auto corpus = Corpus::from_records(std::move(recs), {});
  REQUIRE(corpus.edges().size() == 1);
  CHECK(corpus.edges()[0].time == 0.0);
  CHECK(corpus.stats().total_warnings() == 0);
}

TEST_CASE("json loading") {
  SUBCASE("valid record parses dates and builds edges") {
    const auto corpus = load_corpus_from_json_text(R"([
      {"id":"A","title":"Alpha","date":"1980-01-01","journal":"PRL",
       "authors":[{"given":"John","surname":"Smith","affiliations":["MIT"]}],
       "references":[]},
      {"id":"B","title":"Beta","date":"1982-01-01","journal":"PRB",
       "authors":[],"references":["A"]}
    ])", Strictness::strict);
    REQUIRE(corpus.size() == 2);
    REQUIRE(corpus.edges().size() == 1);
    // 731 civil days between the two dates.
    CHECK(corpus.edges()[0].time == doctest::Approx(731.0 / 365.25).epsilon(1e-12));
    CHECK(corpus.paper(corpus.require("A")).authors.size() == 1);
    CHECK(corpus.journals().at("PRL").size() == 1);
  }

  SUBCASE("strict mode rejects malformed records") {
    CHECK_THROWS_AS(load_corpus_from_json_text("{}", Strictness::strict), SchemaError);
    CHECK_THROWS_AS(load_corpus_from_json_text(R"([{"title":"no id","date":"1980-01-01"}])",
                                               Strictness::strict),
                    SchemaError);
    CHECK_THROWS_AS(load_corpus_from_json_text(R"([{"id":"A","date":"1980-13-01"}])",
                                               Strictness::strict),
                    SchemaError);
    CHECK_THROWS_AS(load_corpus_from_json_text(R"([{"id":"A","date":"1981-02-29"}])",
                                               Strictness::strict),
                    SchemaError);
    CHECK_THROWS_AS(load_corpus_from_json_text(
                        R"([{"id":"A","date":"1980-01-01"},{"id":"A","date":"1981-01-01"}])",
                        Strictness::strict),
                    SchemaError);
    CHECK_THROWS_AS(load_corpus_from_json_text(
                        R"([{"id":"A","date":"1980-01-01","references":["X","X"]}])",
                        Strictness::strict),
                    SchemaError);
    CHECK_THROWS_AS(load_corpus_from_json_text("not json", Strictness::strict), SchemaError);
  }

  SUBCASE("lenient mode skips and counts") {
    const auto corpus = load_corpus_from_json_text(R"([
      {"id":"A","date":"1980-01-01"},
      {"title":"no id","date":"1980-01-01"},
      {"id":"A","date":"1981-01-01"},
      {"id":"B","date":"1982-02-30"},
      {"id":"C","date":"1983-01-01","references":["A","A","missing"]}
    ])", Strictness::lenient);
    CHECK(corpus.size() == 2);  // A and C survive
    CHECK(corpus.stats().records_skipped == 2);      // missing id, bad date
    CHECK(corpus.stats().duplicate_ids_skipped == 1);
    CHECK(corpus.stats().duplicate_refs_dropped == 1);
    CHECK(corpus.stats().dangling_refs == 1);
    CHECK(corpus.stats().total_warnings() == 5);
    CHECK(corpus.edges().size() == 1);  // C -> A survives
  }

  SUBCASE("leap day parses in leap years only") {
    CHECK_NOTHROW(load_corpus_from_json_text(R"([{"id":"A","date":"1980-02-29"}])",
                                             Strictness::strict));
    CHECK_NOTHROW(load_corpus_from_json_text(R"([{"id":"A","date":"2000-02-29"}])",
                                             Strictness::strict));
    CHECK_THROWS_AS(load_corpus_from_json_text(R"([{"id":"A","date":"1900-02-29"}])",
                                               Strictness::strict),
                    SchemaError);
  }

  SUBCASE("missing file raises IoError with the path") {
    try {
      load_corpus("/no/such/file.json", Strictness::strict);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("/no/such/file.json") != std::string::npos);
    }
  }

  SUBCASE("file round-trip") {
    const auto path = write_temp("citeflux_corpus_rt.json",
                                 R"([{"id":"A","date":"1980-06-15"}])");
    const auto corpus = load_corpus(path, Strictness::strict);
    CHECK(corpus.size() == 1);
    std::remove(path.c_str());
  }
}

TEST_CASE("name normalization") {
  CHECK(normalize_name("Smith") == "smith");
  CHECK(normalize_name("  SMITH ") == "smith");
  CHECK(normalize_name("Müller") == "muller");
  CHECK(normalize_name("Škoda") == "skoda");
  CHECK(normalize_name("O'Brien") == "obrien");
  CHECK(normalize_name("Jean-Pierre") == "jean pierre");
  CHECK(normalize_name("J.") == "j");
  CHECK(normalize_name("van der Berg") == "van der berg");
  CHECK(normalize_name("") == "");

  CHECK(given_names_compatible("john", "john"));
  CHECK(given_names_compatible("j", "john"));
  CHECK(given_names_compatible("john", "j"));
  CHECK_FALSE(given_names_compatible("john", "jane"));
  CHECK_FALSE(given_names_compatible("jo", "john"));
  CHECK(given_names_compatible("", "john"));  // absent given matches
  CHECK_FALSE(given_names_compatible("j", "paul"));
}

namespace {

RawAuthor author(std::string surname, std::string given,
                 std::vector<std::string> affiliations = {}) {
  return {std::move(surname), std::move(given), std::move(affiliations)};
}

}  // namespace

TEST_CASE("disambiguation merge rules") {
  SUBCASE("initial plus shared co-author merges") {
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper("P1", 10.0, {}, {author("Smith", "J."), author("Doe", "Alice")}));
    recs.push_back(make_paper("P2", 11.0, {}, {author("Smith", "John"), author("Doe", "Alice")}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    // Smith mentions merged, Doe mentions merged (shared co-author both ways).
    CHECK(corpus.identities().size() == 2);
    CHECK(corpus.identity_of(0, 0) == corpus.identity_of(1, 0));
    CHECK(corpus.identity_of(0, 1) == corpus.identity_of(1, 1));
  }

  SUBCASE("different given names never merge") {
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper("P1", 10.0, {}, {author("Smith", "John"), author("Doe", "Alice")}));
    recs.push_back(make_paper("P2", 11.0, {}, {author("Smith", "Jane"), author("Doe", "Alice")}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    CHECK(corpus.identity_of(0, 0) != corpus.identity_of(1, 0));
    // The Doe mentions also stay apart: their only would-be link is a shared
    // co-author, and Smith John vs Smith Jane are different people.
    CHECK(corpus.identity_of(0, 1) != corpus.identity_of(1, 1));
    CHECK(corpus.identities().size() == 4);
  }

  SUBCASE("identical names without any link stay separate") {
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper("P1", 10.0, {}, {author("Smith", "John", {"MIT"})}));
    recs.push_back(make_paper("P2", 11.0, {}, {author("Smith", "John", {"Caltech"})}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    CHECK(corpus.identity_of(0, 0) != corpus.identity_of(1, 0));
  }

  SUBCASE("citation link merges") {
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper("P1", 10.0, {}, {author("Smith", "John", {"MIT"})}));
    recs.push_back(make_paper("P2", 11.0, {"P1"}, {author("Smith", "John", {"Caltech"})}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    CHECK(corpus.identity_of(0, 0) == corpus.identity_of(1, 0));
  }

  SUBCASE("similar affiliation merges, dissimilar does not") {
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper(
        "P1", 10.0, {}, {author("Smith", "John", {"Department of Physics, Harvard University"})}));
    recs.push_back(make_paper(
        "P2", 11.0, {}, {author("Smith", "John", {"Physics Department, Harvard University"})}));
    recs.push_back(make_paper(
        "P3", 12.0, {}, {author("Smith", "John", {"Institute for Advanced Study"})}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    CHECK(corpus.identity_of(0, 0) == corpus.identity_of(1, 0));
    CHECK(corpus.identity_of(0, 0) != corpus.identity_of(2, 0));
  }

  SUBCASE("diacritic variant with shared co-author merges") {
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper("P1", 10.0, {}, {author("Müller", "K."), author("Rossi", "P.")}));
    recs.push_back(make_paper("P2", 11.0, {}, {author("Muller", "Karl"), author("Rossi", "P.")}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    CHECK(corpus.identity_of(0, 0) == corpus.identity_of(1, 0));
  }

  SUBCASE("transitive closure chains merges") {
    // A~B share a co-author, B~C share an affiliation; A and C share nothing
    // directly but end up in one identity.
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper("P1", 10.0, {}, {author("Smith", "John", {"Lab One"}),
                                               author("Doe", "Alice")}));
    recs.push_back(make_paper("P2", 11.0, {}, {author("Smith", "John", {"Desk Two"}),
                                               author("Doe", "Alice")}));
    recs.push_back(make_paper("P3", 12.0, {}, {author("Smith", "John", {"Desk Two"})}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    CHECK(corpus.identity_of(0, 0) == corpus.identity_of(2, 0));
  }
}

TEST_CASE("disambiguation properties") {
  // A mixed fixture: shared names, links of every kind, some singletons.
  auto build = [](bool extra_edge) {
    std::vector<PaperRecord> recs;
    recs.push_back(make_paper("P1", 10.0, {}, {author("Adams", "Rita", {"Oak Lab"}),
                                               author("Baker", "Tom")}));
    recs.push_back(make_paper("P2", 11.0, {"P1"}, {author("Adams", "R.", {"Pine Lab"})}));
    recs.push_back(make_paper("P3", 12.0, {}, {author("Adams", "Rita", {"Elm Lab"})}));
    recs.push_back(make_paper("P4", 13.0, extra_edge ? std::vector<std::string>{"P3"}
                                                     : std::vector<std::string>{},
                              {author("Adams", "Rita", {"Birch Lab"})}));
    recs.push_back(make_paper("P5", 14.0, {}, {author("Baker", "Tom"), author("Cole", "Ann")}));
    auto corpus = Corpus::from_records(std::move(recs), {});
    disambiguate_authors(corpus);
    return corpus;
  };

  SUBCASE("identities partition the mentions") {
    const auto corpus = build(false);
    std::size_t total = 0;
    std::set<std::pair<std::int32_t, std::int32_t>> seen;
    for (const auto& identity : corpus.identities()) {
      total += identity.mentions.size();
      for (const auto& m : identity.mentions)
        CHECK(seen.insert({m.paper, m.position}).second);
    }
    CHECK(total == corpus.mention_count());
  }

  SUBCASE("idempotent") {
    auto corpus = build(false);
    std::vector<AuthorIdentity> first = corpus.identities();
    disambiguate_authors(corpus);
    REQUIRE(corpus.identities().size() == first.size());
    for (std::size_t i = 0; i < first.size(); ++i)
      CHECK(corpus.identities()[i].mentions == first[i].mentions);
  }

  SUBCASE("adding a citation edge only merges, never splits") {
    const auto before = build(false);
    const auto after = build(true);
    CHECK(after.identities().size() <= before.identities().size());
    // Pairs merged before stay merged after.
    for (const auto& identity : before.identities()) {
      for (std::size_t i = 1; i < identity.mentions.size(); ++i) {
        const auto& a = identity.mentions[0];
        const auto& b = identity.mentions[i];
        CHECK(after.identity_of(a.paper, a.position) == after.identity_of(b.paper, b.position));
      }
    }
    // And P3/P4 actually did merge via the added edge.
    CHECK(before.identity_of(2, 0) != before.identity_of(3, 0));
    CHECK(after.identity_of(2, 0) == after.identity_of(3, 0));
  }
}

TEST_CASE("citation history") {
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("T", 10.0));
  recs.push_back(make_paper("C1", 10.5, {"T"}));
  recs.push_back(make_paper("C2", 12.0, {"T"}));
  recs.push_back(make_paper("C3", 17.0, {"T"}));
  recs.push_back(make_paper("L", 20.0));  // no citers
  const auto corpus = Corpus::from_records(std::move(recs), {});

  SUBCASE("no citers gives empty sequence") {
    const auto h = citation_history(corpus, "L", std::nullopt);
    CHECK(h.times.empty());
  }

  SUBCASE("cutoff truncates inclusively") {
    const auto h = citation_history(corpus, "T", 5.0);
    REQUIRE(h.times.size() == 2);
    CHECK(h.times[0] == doctest::Approx(0.5));
    CHECK(h.times[1] == doctest::Approx(2.0));
    CHECK(h.observation_end == 5.0);
  }

  SUBCASE("no cutoff keeps everything") {
    const auto h = citation_history(corpus, "T", std::nullopt);
    CHECK(h.times.size() == 3);
    CHECK(h.times.size() == corpus.citers_of(corpus.require("T")).size());
  }

  SUBCASE("unknown paper raises") {
    CHECK_THROWS_AS(citation_history(corpus, "nope", std::nullopt), InvalidInput);
  }
}

TEST_CASE("tied citation times order by citing paper id") {
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("T", 10.0));
  recs.push_back(make_paper("Zed", 11.0, {"T"}));
  recs.push_back(make_paper("Ann", 11.0, {"T"}));
  const auto corpus = Corpus::from_records(std::move(recs), {});
  const auto h = citation_history(corpus, "T", std::nullopt);
  REQUIRE(h.times.size() == 2);
  CHECK(corpus.paper(h.citing[0]).id == "Ann");
  CHECK(corpus.paper(h.citing[1]).id == "Zed");
}

TEST_CASE("cohort boundary") {
  // Target year 1980; five citers within the 5-year window for T5, four for T4.
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("T5", 10.0));
  recs.push_back(make_paper("T4", 10.0));
  for (int i = 0; i < 5; ++i)
    recs.push_back(make_paper("C5" + std::to_string(i), 11.0 + 0.5 * i, {"T5"}));
  for (int i = 0; i < 4; ++i)
    recs.push_back(make_paper("C4" + std::to_string(i), 11.0 + 0.5 * i, {"T4"}));
  auto corpus = Corpus::from_records(std::move(recs), {});
  disambiguate_authors(corpus);
  const auto cohort = build_cohort(corpus, 1975, 1985);
  CHECK(cohort.training_papers == std::vector<std::string>{"T5"});
  CHECK(cohort.train_window == 5.0);
  CHECK(cohort.test_horizons == default_horizons());
}

TEST_CASE("twenty-paper fixture yields a twelve-paper cohort") {
  // Fourteen candidate papers inside the year range, six late citers outside
  // it. Candidate k is cited by the five citers whose index differs from
  // k mod 6; candidate 12 by only four; candidate 13 by none.
  std::vector<PaperRecord> recs;
  for (int k = 0; k < 14; ++k)
    recs.push_back(make_paper("T" + std::string(1, static_cast<char>('A' + k)), 25.2));  // 1995
  for (int c = 0; c < 6; ++c) {
    std::vector<std::string> refs;
    for (int k = 0; k < 12; ++k)
      if (k % 6 != c) refs.push_back("T" + std::string(1, static_cast<char>('A' + k)));
    if (c < 4) refs.push_back("TM");  // candidate 12 gets four citations
    recs.push_back(make_paper("Z" + std::to_string(c), 29.4, std::move(refs)));  // 1999
  }
  REQUIRE(recs.size() == 20);
  auto corpus = Corpus::from_records(std::move(recs), {});
  disambiguate_authors(corpus);

  const auto cohort = build_cohort(corpus, 1978, 1998);

  // Oracle: direct scan over the raw edge list, no index involved.
  std::vector<std::string> expected;
  for (const auto& p : corpus.papers()) {
    if (p.date.year < 1978 || p.date.year > 1998) continue;
    std::size_t early = 0;
    for (const auto& e : corpus.edges()) {
      if (corpus.paper(e.cited).id == p.id && e.time <= 5.0) ++early;
    }
    if (early >= 5) expected.push_back(p.id);
  }
  std::sort(expected.begin(), expected.end());

  CHECK(cohort.training_papers.size() == 12);
  CHECK(cohort.training_papers == expected);
}

TEST_CASE("cohort requires disambiguation") {
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("A", 10.0, {}, {author("Smith", "John")}));
  const auto corpus = Corpus::from_records(std::move(recs), {});
  CHECK_THROWS_AS(build_cohort(corpus, 1975, 1985), InvalidInput);
}

TEST_CASE("citations_until uses absolute time") {
  std::vector<PaperRecord> recs;
  recs.push_back(make_paper("T", 10.0));
  recs.push_back(make_paper("C1", 11.0, {"T"}));
  recs.push_back(make_paper("C2", 14.0, {"T"}));
  const auto corpus = Corpus::from_records(std::move(recs), {});
  const auto t = corpus.require("T");
  CHECK(corpus.citations_until(t, 12.0) == 1);
  CHECK(corpus.citations_until(t, 9.0) == 0);
  CHECK(corpus.citations_until(t, std::nullopt) == 2);
  CHECK(corpus.citations_until(t, 14.0) == 2);
}
