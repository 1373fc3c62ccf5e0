#include "citeflux/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "citeflux/errors.hpp"

namespace citeflux {

namespace {

using nlohmann::json;

std::string schema_msg(std::size_t record_index, const std::string& what) {
  std::ostringstream os;
  os << "corpus record " << record_index << ": " << what;
  return os.str();
}

// Returns nullopt when the record is malformed (lenient mode skips it).
std::optional<PaperRecord> parse_record(const json& j, std::size_t index,
                                        Strictness strictness, CorpusStats& stats) {
  auto fail = [&](const std::string& what) -> std::optional<PaperRecord> {
    if (strictness == Strictness::strict) throw SchemaError(schema_msg(index, what));
    ++stats.records_skipped;
    return std::nullopt;
  };

  if (!j.is_object()) return fail("not an object");
  if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
    return fail("missing or empty \"id\"");
  if (!j.contains("date") || !j["date"].is_string())
    return fail("missing \"date\"");

  PaperRecord rec;
  rec.id = j["id"].get<std::string>();
  const auto date = parse_iso_date(j["date"].get<std::string>());
  if (!date) return fail("\"date\" is not a valid ISO-8601 calendar date");
  rec.date = *date;
  rec.pub_time = years_since_epoch(rec.date);

  if (j.contains("title")) {
    if (!j["title"].is_string()) return fail("\"title\" is not a string");
    rec.title = j["title"].get<std::string>();
  }
  if (j.contains("journal")) {
    if (!j["journal"].is_string()) return fail("\"journal\" is not a string");
    rec.journal = j["journal"].get<std::string>();
  }

  if (j.contains("authors")) {
    if (!j["authors"].is_array()) return fail("\"authors\" is not an array");
    for (const auto& a : j["authors"]) {
      if (!a.is_object() || !a.contains("surname") || !a["surname"].is_string() ||
          a["surname"].get<std::string>().empty())
        return fail("author without a surname");
      RawAuthor author;
      author.surname = a["surname"].get<std::string>();
      if (a.contains("given")) {
        if (!a["given"].is_string()) return fail("author \"given\" is not a string");
        author.given = a["given"].get<std::string>();
      }
      if (a.contains("affiliations")) {
        if (!a["affiliations"].is_array()) return fail("\"affiliations\" is not an array");
        for (const auto& aff : a["affiliations"]) {
          if (!aff.is_string()) return fail("affiliation is not a string");
          author.affiliations.push_back(aff.get<std::string>());
        }
      }
      rec.authors.push_back(std::move(author));
    }
  }

  if (j.contains("references")) {
    if (!j["references"].is_array()) return fail("\"references\" is not an array");
    std::unordered_set<std::string> seen;
    for (const auto& r : j["references"]) {
      if (!r.is_string()) return fail("reference is not a string");
      auto id = r.get<std::string>();
      if (!seen.insert(id).second) {
        if (strictness == Strictness::strict)
          throw SchemaError(schema_msg(index, "duplicate reference \"" + id + "\""));
        ++stats.duplicate_refs_dropped;
        continue;
      }
      rec.references.push_back(std::move(id));
    }
  }
  return rec;
}

}  // namespace

Corpus Corpus::from_records(std::vector<PaperRecord> records, CorpusStats stats) {
  Corpus c;
  c.papers_ = std::move(records);
  c.stats_ = stats;

  c.index_.reserve(c.papers_.size());
  for (std::size_t i = 0; i < c.papers_.size(); ++i) {
    auto [it, inserted] = c.index_.emplace(c.papers_[i].id, static_cast<std::int32_t>(i));
    if (!inserted)
      throw SchemaError("duplicate paper id \"" + c.papers_[i].id + "\"");
  }

  for (std::size_t i = 0; i < c.papers_.size(); ++i) {
    const auto& p = c.papers_[i];
    c.journals_[p.journal].push_back(static_cast<std::int32_t>(i));
    c.mention_count_ += p.authors.size();
    for (const auto& ref : p.references) {
      const auto it = c.index_.find(ref);
      if (it == c.index_.end()) {
        ++c.stats_.dangling_refs;
        continue;
      }
      const auto cited = it->second;
      const double t = p.pub_time - c.papers_[static_cast<std::size_t>(cited)].pub_time;
      if (t < 0.0) {
        ++c.stats_.negative_edges_dropped;
        continue;
      }
      c.edges_.push_back({static_cast<std::int32_t>(i), cited, t});
    }
  }

  // CSR citer lists per cited paper, ordered by (time, citing paper id).
  std::vector<std::int32_t> order(c.edges_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
    const auto& ea = c.edges_[static_cast<std::size_t>(a)];
    const auto& eb = c.edges_[static_cast<std::size_t>(b)];
    if (ea.cited != eb.cited) return ea.cited < eb.cited;
    if (ea.time != eb.time) return ea.time < eb.time;
    return c.papers_[static_cast<std::size_t>(ea.citing)].id <
           c.papers_[static_cast<std::size_t>(eb.citing)].id;
  });
  c.citer_offsets_.assign(c.papers_.size() + 1, 0);
  for (const auto& e : c.edges_) ++c.citer_offsets_[static_cast<std::size_t>(e.cited) + 1];
  for (std::size_t i = 1; i < c.citer_offsets_.size(); ++i)
    c.citer_offsets_[i] += c.citer_offsets_[i - 1];
  c.citer_edges_ = std::move(order);

  return c;
}

std::optional<std::int32_t> Corpus::find(std::string_view paper_id) const {
  const auto it = index_.find(std::string(paper_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::int32_t Corpus::require(std::string_view paper_id) const {
  const auto idx = find(paper_id);
  if (!idx) throw InvalidInput("unknown paper id \"" + std::string(paper_id) + "\"");
  return *idx;
}

std::span<const std::int32_t> Corpus::citers_of(std::int32_t paper) const {
  const auto lo = static_cast<std::size_t>(citer_offsets_[static_cast<std::size_t>(paper)]);
  const auto hi = static_cast<std::size_t>(citer_offsets_[static_cast<std::size_t>(paper) + 1]);
  return {citer_edges_.data() + lo, hi - lo};
}

std::size_t Corpus::citations_within(std::int32_t paper, double rel_time) const {
  std::size_t n = 0;
  for (const auto e : citers_of(paper)) {
    if (edges_[static_cast<std::size_t>(e)].time <= rel_time) ++n;
  }
  return n;
}

std::size_t Corpus::citations_until(std::int32_t paper, std::optional<double> cutoff_time) const {
  if (!cutoff_time) return citers_of(paper).size();
  const double rel = *cutoff_time - papers_[static_cast<std::size_t>(paper)].pub_time;
  if (rel < 0.0) return 0;
  return citations_within(paper, rel);
}

std::int32_t Corpus::identity_of(std::int32_t paper, std::int32_t position) const {
  if (mention_identity_.empty()) return -1;
  return mention_identity_[static_cast<std::size_t>(paper)][static_cast<std::size_t>(position)];
}

Corpus load_corpus(const std::string& path, Strictness strictness) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_corpus_from_json_text(buf.str(), strictness);
}

Corpus load_corpus_from_json_text(std::string_view text, Strictness strictness) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("corpus is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw SchemaError("corpus root must be a JSON array");

  CorpusStats stats;
  std::vector<PaperRecord> records;
  records.reserve(doc.size());
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    auto rec = parse_record(doc[i], i, strictness, stats);
    if (!rec) continue;
    if (!ids.insert(rec->id).second) {
      if (strictness == Strictness::strict)
        throw SchemaError(schema_msg(i, "duplicate paper id \"" + rec->id + "\""));
      ++stats.duplicate_ids_skipped;
      continue;
    }
    records.push_back(std::move(*rec));
  }
  return Corpus::from_records(std::move(records), stats);
}

// ---------------------------------------------------------------------------
// Author name disambiguation
// ---------------------------------------------------------------------------

namespace {

// Latin-1 / Latin Extended-A diacritics folded to ASCII; other non-ASCII
// codepoints are dropped.
void append_folded(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
    return;
  }
  struct Range {
    char32_t lo, hi;
    char c;
  };
  static constexpr Range ranges[] = {
      {0xC0, 0xC5, 'a'}, {0xC7, 0xC7, 'c'}, {0xC8, 0xCB, 'e'}, {0xCC, 0xCF, 'i'},
      {0xD1, 0xD1, 'n'}, {0xD2, 0xD6, 'o'}, {0xD8, 0xD8, 'o'}, {0xD9, 0xDC, 'u'},
      {0xDD, 0xDD, 'y'}, {0xE0, 0xE5, 'a'}, {0xE7, 0xE7, 'c'}, {0xE8, 0xEB, 'e'},
      {0xEC, 0xEF, 'i'}, {0xF1, 0xF1, 'n'}, {0xF2, 0xF6, 'o'}, {0xF8, 0xF8, 'o'},
      {0xF9, 0xFC, 'u'}, {0xFD, 0xFF, 'y'}, {0x100, 0x105, 'a'}, {0x106, 0x10D, 'c'},
      {0x10E, 0x111, 'd'}, {0x112, 0x11B, 'e'}, {0x11C, 0x123, 'g'}, {0x124, 0x127, 'h'},
      {0x128, 0x131, 'i'}, {0x134, 0x135, 'j'}, {0x136, 0x138, 'k'}, {0x139, 0x142, 'l'},
      {0x143, 0x14B, 'n'}, {0x14C, 0x151, 'o'}, {0x154, 0x159, 'r'}, {0x15A, 0x161, 's'},
      {0x162, 0x167, 't'}, {0x168, 0x173, 'u'}, {0x174, 0x175, 'w'}, {0x176, 0x178, 'y'},
      {0x179, 0x17E, 'z'},
  };
  for (const auto& r : ranges) {
    if (cp >= r.lo && cp <= r.hi) {
      out.push_back(r.c);
      return;
    }
  }
  if (cp == 0xDF) out += "ss";  // sharp s
}

std::string fold_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const unsigned char b = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t len = 1;
    if (b < 0x80) {
      cp = b;
    } else if ((b >> 5) == 0x6 && i + 1 < s.size()) {
      cp = static_cast<char32_t>((b & 0x1F) << 6 |
                                 (static_cast<unsigned char>(s[i + 1]) & 0x3F));
      len = 2;
    } else if ((b >> 4) == 0xE && i + 2 < s.size()) {
      cp = static_cast<char32_t>((b & 0x0F) << 12 |
                                 (static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6 |
                                 (static_cast<unsigned char>(s[i + 2]) & 0x3F));
      len = 3;
    } else {
      ++i;
      continue;  // invalid or 4-byte sequence, dropped
    }
    append_folded(out, cp);
    i += len;
  }
  return out;
}

bool is_affiliation_stopword(const std::string& w) {
  static const std::unordered_set<std::string> kStop = {
      "of", "the", "and", "for", "de", "la", "at", "in", "on", "du", "der"};
  return kStop.count(w) > 0;
}

std::set<std::string> affiliation_tokens(std::string_view aff) {
  std::set<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !is_affiliation_stopword(cur)) tokens.insert(cur);
    cur.clear();
  };
  for (char ch : fold_utf8(aff)) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    else
      flush();
  }
  flush();
  return tokens;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

struct UnionFind {
  std::vector<std::int32_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::int32_t find(std::int32_t x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);  // smaller index wins, keeps ids canonical
    parent[static_cast<std::size_t>(b)] = a;
  }
};

struct MentionInfo {
  AuthorMention mention;
  std::string given_norm;
  std::vector<std::set<std::string>> affiliation_token_sets;
  // Normalized (surname, given) of the other authors on the paper, sorted by
  // surname. Two mentions share a co-author when a pair matches on surname
  // with compatible given names.
  std::vector<std::pair<std::string, std::string>> coauthors;
};

}  // namespace

std::string normalize_name(std::string_view s) {
  std::string folded = fold_utf8(s);
  std::string out;
  out.reserve(folded.size());
  bool pending_space = false;
  for (char ch : folded) {
    const unsigned char u = static_cast<unsigned char>(ch);
    if (std::isalpha(u)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(u)));
    } else if (ch == ' ' || ch == '-' || ch == '.') {
      pending_space = true;
    }
  }
  return out;
}

bool given_names_compatible(std::string_view a, std::string_view b) {
  if (a.empty() || b.empty()) return true;  // an absent given name matches anything
  if (a == b) return true;
  // Initials compare on the first character only.
  const bool a_initial = a.size() == 1;
  const bool b_initial = b.size() == 1;
  if (a_initial || b_initial) return a[0] == b[0];
  return false;
}

void disambiguate_authors(Corpus& corpus, const DisambiguationConfig& config) {
  corpus.identities_.clear();
  corpus.mention_identity_.assign(corpus.papers_.size(), {});
  for (std::size_t p = 0; p < corpus.papers_.size(); ++p)
    corpus.mention_identity_[p].assign(corpus.papers_[p].authors.size(), -1);
  if (corpus.mention_count_ == 0) return;

  // Directed citation pairs; the "cited each other" link is read as a
  // citation in either direction between the two mentions' papers.
  std::unordered_set<std::int64_t> cites;
  cites.reserve(corpus.edges_.size() * 2);
  for (const auto& e : corpus.edges_)
    cites.insert(static_cast<std::int64_t>(e.citing) << 32 | static_cast<std::uint32_t>(e.cited));
  auto linked_by_citation = [&](std::int32_t a, std::int32_t b) {
    return cites.count(static_cast<std::int64_t>(a) << 32 | static_cast<std::uint32_t>(b)) > 0 ||
           cites.count(static_cast<std::int64_t>(b) << 32 | static_cast<std::uint32_t>(a)) > 0;
  };

  // Surname groups, in deterministic (surname, mention) order.
  std::vector<MentionInfo> mentions;
  std::vector<std::string> surnames;
  for (std::size_t p = 0; p < corpus.papers_.size(); ++p) {
    const auto& authors = corpus.papers_[p].authors;
    for (std::size_t pos = 0; pos < authors.size(); ++pos) {
      MentionInfo info;
      info.mention = {static_cast<std::int32_t>(p), static_cast<std::int32_t>(pos)};
      info.given_norm = normalize_name(authors[pos].given);
      for (const auto& aff : authors[pos].affiliations)
        info.affiliation_token_sets.push_back(affiliation_tokens(aff));
      for (std::size_t other = 0; other < authors.size(); ++other) {
        if (other == pos) continue;
        info.coauthors.emplace_back(normalize_name(authors[other].surname),
                                    normalize_name(authors[other].given));
      }
      std::sort(info.coauthors.begin(), info.coauthors.end());
      surnames.push_back(normalize_name(authors[pos].surname));
      mentions.push_back(std::move(info));
    }
  }

  std::map<std::string, std::vector<std::int32_t>> by_surname;
  for (std::size_t i = 0; i < mentions.size(); ++i)
    by_surname[surnames[i]].push_back(static_cast<std::int32_t>(i));

  auto share_coauthor = [&](const MentionInfo& a, const MentionInfo& b) {
    for (const auto& [sx, gx] : a.coauthors)
      for (const auto& [sy, gy] : b.coauthors)
        if (sx == sy && given_names_compatible(gx, gy)) return true;
    return false;
  };
  auto similar_affiliation = [&](const MentionInfo& a, const MentionInfo& b) {
    for (const auto& ta : a.affiliation_token_sets)
      for (const auto& tb : b.affiliation_token_sets)
        if (jaccard(ta, tb) >= config.affiliation_jaccard) return true;
    return false;
  };

  UnionFind uf(mentions.size());
  for (const auto& [surname, group] : by_surname) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        const auto& a = mentions[static_cast<std::size_t>(group[i])];
        const auto& b = mentions[static_cast<std::size_t>(group[j])];
        if (!given_names_compatible(a.given_norm, b.given_norm)) continue;
        if (linked_by_citation(a.mention.paper, b.mention.paper) || share_coauthor(a, b) ||
            similar_affiliation(a, b))
          uf.unite(group[i], group[j]);
      }
    }
  }

  // Identities numbered by their smallest mention, in mention order.
  std::unordered_map<std::int32_t, std::int32_t> root_to_identity;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const auto root = uf.find(static_cast<std::int32_t>(i));
    auto [it, inserted] = root_to_identity.emplace(
        root, static_cast<std::int32_t>(corpus.identities_.size()));
    if (inserted) {
      AuthorIdentity identity;
      identity.id = it->second;
      corpus.identities_.push_back(std::move(identity));
    }
    auto& identity = corpus.identities_[static_cast<std::size_t>(it->second)];
    identity.mentions.push_back(mentions[i].mention);
    corpus.mention_identity_[static_cast<std::size_t>(mentions[i].mention.paper)]
                            [static_cast<std::size_t>(mentions[i].mention.position)] =
        it->second;
  }
  for (auto& identity : corpus.identities_)
    std::sort(identity.mentions.begin(), identity.mentions.end());
}

// ---------------------------------------------------------------------------
// Histories and cohorts
// ---------------------------------------------------------------------------

CitationHistory citation_history(const Corpus& corpus, std::string_view paper_id,
                                 std::optional<double> cutoff) {
  return citation_history(corpus, corpus.require(paper_id), cutoff);
}

CitationHistory citation_history(const Corpus& corpus, std::int32_t paper,
                                 std::optional<double> cutoff) {
  CitationHistory h;
  double last = 0.0;
  for (const auto e : corpus.citers_of(paper)) {
    const auto& edge = corpus.edge(e);
    if (cutoff && edge.time > *cutoff) break;  // citers are time-sorted
    h.times.push_back(edge.time);
    h.citing.push_back(edge.citing);
    last = edge.time;
  }
  h.observation_end = cutoff ? *cutoff : last;
  return h;
}

std::vector<int> default_horizons() {
  std::vector<int> h(10);
  std::iota(h.begin(), h.end(), 1);
  return h;
}

Cohort build_cohort(const Corpus& corpus, int pub_year_min, int pub_year_max,
                    int min_early_citations, double train_window,
                    std::vector<int> test_horizons) {
  if (!corpus.disambiguated())
    throw InvalidInput("build_cohort requires a disambiguated corpus");
  if (pub_year_max < pub_year_min)
    throw InvalidInput("build_cohort: empty publication year range");

  Cohort cohort;
  cohort.train_window = train_window;
  cohort.test_horizons = std::move(test_horizons);
  cohort.pub_year_min = pub_year_min;
  cohort.pub_year_max = pub_year_max;
  cohort.min_early_citations = min_early_citations;

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& p = corpus.paper(static_cast<std::int32_t>(i));
    if (p.date.year < pub_year_min || p.date.year > pub_year_max) continue;
    if (corpus.citations_within(static_cast<std::int32_t>(i), train_window) <
        static_cast<std::size_t>(min_early_citations))
      continue;
    cohort.training_papers.push_back(p.id);
  }
  std::sort(cohort.training_papers.begin(), cohort.training_papers.end());
  return cohort;
}

}  // namespace citeflux
