#include "citeflux/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "citeflux/dates.hpp"
#include "citeflux/errors.hpp"
#include "citeflux/indicators.hpp"

namespace citeflux {

namespace {

using nlohmann::json;

void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory \"" + parent.string() + "\": " + ec.message());
}

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double_token(std::string_view token, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw SchemaError(context + ": \"" + std::string(token) + "\" is not a number");
  return v;
}

int parse_int_token(std::string_view token, const std::string& context) {
  int v = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size())
    throw SchemaError(context + ": \"" + std::string(token) + "\" is not an integer");
  return v;
}

// Lines of a CSV body, final newline optional, CR tolerated.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = eol + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

constexpr char kCorpusMagic[4] = {'C', 'F', 'X', 'C'};
constexpr std::uint32_t kCorpusBinVersion = 1;
constexpr std::uint32_t kMaxBinCount = 1u << 27;

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : path_(path) {
    ensure_parent_dir(path);
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open \"" + path + "\" for writing");
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void i32(std::int32_t v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    if (s.size() > kMaxBinCount) throw IoError("string too long for corpus cache");
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void close() {
    out_.flush();
    if (!out_) throw IoError("write failed for \"" + path_ + "\"");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : path_(path) {
    in_.open(path, std::ios::binary);
    if (!in_) throw IoError("cannot open \"" + path + "\"");
  }
  void bytes(void* p, std::size_t n) {
    if (!in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
      throw IoError("truncated corpus cache \"" + path_ + "\"");
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  std::int32_t i32() {
    std::int32_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint32_t count() {
    const std::uint32_t v = u32();
    if (v > kMaxBinCount) throw SchemaError("corrupt corpus cache \"" + path_ + "\"");
    return v;
  }
  std::string str() {
    std::string s(count(), '\0');
    if (!s.empty()) bytes(s.data(), s.size());
    return s;
  }

 private:
  std::string path_;
  std::ifstream in_;
};

json ensemble_to_json(const Ensemble& e) {
  json j;
  j["base"] = e.base;
  j["config"] = {{"learning_rate", e.config.learning_rate},
                 {"n_iterations", e.config.n_iterations},
                 {"min_leaf_samples", e.config.min_leaf_samples},
                 {"max_depth", e.config.max_depth},
                 {"subsample_rate", e.config.subsample_rate},
                 {"seed", e.config.seed}};
  j["feature_names"] = e.feature_names;
  j["importance"] = e.importance;
  json trees = json::array();
  for (const BoostedTree& bt : e.trees) {
    json nodes = json::array();
    for (const TreeNode& n : bt.tree.nodes)
      nodes.push_back({n.feature, n.threshold, n.value, n.left, n.right, n.gain, n.n_samples});
    trees.push_back({{"weight", bt.weight}, {"nodes", std::move(nodes)}});
  }
  j["trees"] = std::move(trees);
  return j;
}

Ensemble ensemble_from_json(const json& j) {
  Ensemble e;
  e.base = j.at("base").get<double>();
  const json& c = j.at("config");
  e.config.learning_rate = c.at("learning_rate").get<double>();
  e.config.n_iterations = c.at("n_iterations").get<int>();
  e.config.min_leaf_samples = c.at("min_leaf_samples").get<int>();
  e.config.max_depth = c.at("max_depth").get<int>();
  e.config.subsample_rate = c.at("subsample_rate").get<double>();
  e.config.seed = c.at("seed").get<std::uint64_t>();
  e.config.validate();
  e.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  e.importance = j.at("importance").get<std::vector<double>>();
  if (e.importance.size() != e.feature_names.size())
    throw SchemaError("model file: importance length mismatch");
  const auto n_features = static_cast<int>(e.feature_names.size());
  for (const json& jt : j.at("trees")) {
    BoostedTree bt;
    bt.weight = jt.at("weight").get<double>();
    const json& nodes = jt.at("nodes");
    const auto n_nodes = static_cast<std::int32_t>(nodes.size());
    if (nodes.empty() || nodes.size() > kMaxBinCount)
      throw SchemaError("model file: malformed tree");
    for (const json& jn : nodes) {
      if (!jn.is_array() || jn.size() != 7) throw SchemaError("model file: malformed node");
      TreeNode n;
      n.feature = jn[0].get<int>();
      n.threshold = jn[1].get<double>();
      n.value = jn[2].get<double>();
      n.left = jn[3].get<std::int32_t>();
      n.right = jn[4].get<std::int32_t>();
      n.gain = jn[5].get<double>();
      n.n_samples = jn[6].get<std::int32_t>();
      const bool leaf = n.feature == -1;
      const auto child_ok = [&](std::int32_t k) { return k >= 0 && k < n_nodes; };
      if (leaf ? (n.left != -1 || n.right != -1)
               : (n.feature < 0 || n.feature >= n_features || !child_ok(n.left) ||
                  !child_ok(n.right)))
        throw SchemaError("model file: malformed tree");
      bt.tree.nodes.push_back(n);
    }
    e.trees.push_back(std::move(bt));
  }
  return e;
}

json parse_json_or_throw(std::string_view text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw SchemaError(what + ": not valid JSON");
  return j;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (!in.good() && !in.eof()) throw IoError("read failed for \"" + path + "\"");
  return std::move(buf).str();
}

void write_text_file(const std::string& path, std::string_view content) {
  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open \"" + path + "\" for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("write failed for \"" + path + "\"");
}

void save_corpus_bin(const Corpus& corpus, const std::string& path) {
  BinWriter w(path);
  w.bytes(kCorpusMagic, sizeof kCorpusMagic);
  w.u32(kCorpusBinVersion);
  const CorpusStats& st = corpus.stats();
  w.u64(st.records_skipped);
  w.u64(st.duplicate_ids_skipped);
  w.u64(st.duplicate_refs_dropped);
  w.u64(st.dangling_refs);
  w.u64(st.negative_edges_dropped);
  w.u64(corpus.size());
  for (const PaperRecord& p : corpus.papers()) {
    w.str(p.id);
    w.str(p.title);
    w.i32(p.date.year);
    w.i32(p.date.month);
    w.i32(p.date.day);
    w.str(p.journal);
    w.u32(static_cast<std::uint32_t>(p.authors.size()));
    for (const RawAuthor& a : p.authors) {
      w.str(a.surname);
      w.str(a.given);
      w.u32(static_cast<std::uint32_t>(a.affiliations.size()));
      for (const std::string& aff : a.affiliations) w.str(aff);
    }
    w.u32(static_cast<std::uint32_t>(p.references.size()));
    for (const std::string& ref : p.references) w.str(ref);
  }
  w.close();
}

Corpus load_corpus_bin(const std::string& path) {
  BinReader r(path);
  char magic[4] = {};
  r.bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 4, kCorpusMagic))
    throw SchemaError("\"" + path + "\" is not a corpus cache");
  if (r.u32() != kCorpusBinVersion)
    throw SchemaError("unsupported corpus cache version in \"" + path + "\"");
  CorpusStats stats;
  stats.records_skipped = r.u64();
  stats.duplicate_ids_skipped = r.u64();
  stats.duplicate_refs_dropped = r.u64();
  stats.dangling_refs = r.u64();
  stats.negative_edges_dropped = r.u64();
  // Graph-derived counts are recomputed while the edges are rebuilt.
  stats.dangling_refs = 0;
  stats.negative_edges_dropped = 0;

  const std::uint64_t n = r.u64();
  if (n > kMaxBinCount) throw SchemaError("corrupt corpus cache \"" + path + "\"");
  std::vector<PaperRecord> records;
  records.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    PaperRecord p;
    p.id = r.str();
    p.title = r.str();
    p.date.year = r.i32();
    p.date.month = r.i32();
    p.date.day = r.i32();
    if (p.date.month < 1 || p.date.month > 12 || p.date.day < 1 || p.date.day > 31)
      throw SchemaError("corrupt date in corpus cache \"" + path + "\"");
    p.journal = r.str();
    const std::uint32_t n_authors = r.count();
    p.authors.reserve(n_authors);
    for (std::uint32_t a = 0; a < n_authors; ++a) {
      RawAuthor author;
      author.surname = r.str();
      author.given = r.str();
      const std::uint32_t n_aff = r.count();
      author.affiliations.reserve(n_aff);
      for (std::uint32_t k = 0; k < n_aff; ++k) author.affiliations.push_back(r.str());
      p.authors.push_back(std::move(author));
    }
    const std::uint32_t n_refs = r.count();
    p.references.reserve(n_refs);
    for (std::uint32_t k = 0; k < n_refs; ++k) p.references.push_back(r.str());
    p.pub_time = years_since_epoch(p.date);
    records.push_back(std::move(p));
  }
  return Corpus::from_records(std::move(records), stats);
}

std::string cohort_to_json(const Cohort& cohort) {
  json j;
  j["train_window"] = cohort.train_window;
  j["pub_year_min"] = cohort.pub_year_min;
  j["pub_year_max"] = cohort.pub_year_max;
  j["min_early_citations"] = cohort.min_early_citations;
  j["test_horizons"] = cohort.test_horizons;
  j["training_papers"] = cohort.training_papers;
  return j.dump(1) + "\n";
}

Cohort cohort_from_json(std::string_view text) {
  const json j = parse_json_or_throw(text, "cohort file");
  Cohort c;
  try {
    c.train_window = j.at("train_window").get<double>();
    c.pub_year_min = j.at("pub_year_min").get<int>();
    c.pub_year_max = j.at("pub_year_max").get<int>();
    c.min_early_citations = j.at("min_early_citations").get<int>();
    c.test_horizons = j.at("test_horizons").get<std::vector<int>>();
    c.training_papers = j.at("training_papers").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("cohort file: ") + e.what());
  }
  if (!(c.train_window > 0.0)) throw SchemaError("cohort file: train_window must be > 0");
  if (!std::is_sorted(c.training_papers.begin(), c.training_papers.end()))
    throw SchemaError("cohort file: training_papers must be sorted");
  return c;
}

void save_cohort_json(const Cohort& cohort, const std::string& path) {
  write_text_file(path, cohort_to_json(cohort));
}

Cohort load_cohort_json(const std::string& path) {
  return cohort_from_json(read_text_file(path));
}

void save_features_csv(const FeatureTable& table, const std::string& path) {
  table.features.validate();
  if (table.paper_ids.size() != table.features.rows.size())
    throw InvalidInput("feature table: id column does not match the rows");
  std::string out = "paper_id";
  for (const std::string& name : table.features.names) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (std::size_t i = 0; i < table.paper_ids.size(); ++i) {
    out += table.paper_ids[i];
    for (double v : table.features.rows[i]) {
      out += ',';
      append_double(out, v);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

FeatureTable load_features_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw SchemaError("features file \"" + path + "\": empty");

  std::string expected = "paper_id";
  for (const auto name : kFeatureNames) {
    expected += ',';
    expected += name;
  }
  if (lines[0] != expected)
    throw SchemaError("features file \"" + path + "\": unexpected header");

  FeatureTable table;
  table.features.names.assign(kFeatureNames.begin(), kFeatureNames.end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != kFeatureNames.size() + 1 || fields[0].empty())
      throw SchemaError("features file \"" + path + "\": malformed row " + std::to_string(i));
    table.paper_ids.emplace_back(fields[0]);
    std::vector<double> row;
    row.reserve(kFeatureNames.size());
    for (std::size_t f = 1; f < fields.size(); ++f)
      row.push_back(parse_double_token(fields[f], "features file \"" + path + "\""));
    table.features.rows.push_back(std::move(row));
  }
  table.features.validate();
  return table;
}

void save_targets_csv(std::span<const TargetRow> rows, const std::string& path) {
  std::string out = "paper_id,horizon_year,target\n";
  for (const TargetRow& r : rows) {
    out += r.paper_id;
    out += ',';
    out += std::to_string(r.horizon);
    out += ',';
    append_double(out, r.value);
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<TargetRow> load_targets_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "paper_id,horizon_year,target")
    throw SchemaError("targets file \"" + path + "\": unexpected header");
  std::vector<TargetRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 3 || fields[0].empty())
      throw SchemaError("targets file \"" + path + "\": malformed row " + std::to_string(i));
    TargetRow r;
    r.paper_id = std::string(fields[0]);
    r.horizon = parse_int_token(fields[1], "targets file \"" + path + "\"");
    r.value = parse_double_token(fields[2], "targets file \"" + path + "\"");
    rows.push_back(std::move(r));
  }
  return rows;
}

void save_predictions_csv(std::span<const HorizonPrediction> rows, const std::string& path) {
  std::string out = "paper_id,horizon_year,predicted\n";
  for (const HorizonPrediction& r : rows) {
    out += r.paper_id;
    out += ',';
    out += std::to_string(r.horizon);
    out += ',';
    append_double(out, r.predicted);
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<HorizonPrediction> load_predictions_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0] != "paper_id,horizon_year,predicted")
    throw SchemaError("predictions file \"" + path + "\": unexpected header");
  std::vector<HorizonPrediction> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 3 || fields[0].empty())
      throw SchemaError("predictions file \"" + path + "\": malformed row " + std::to_string(i));
    HorizonPrediction r;
    r.paper_id = std::string(fields[0]);
    r.horizon = parse_int_token(fields[1], "predictions file \"" + path + "\"");
    r.predicted = parse_double_token(fields[2], "predictions file \"" + path + "\"");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string params_to_json(const ParamsFile& params) {
  json j;
  j["beta"] = params.beta;
  auto& papers = j["papers"] = json::object();
  for (const FittedPaper& p : params.papers)
    papers[p.id] = {{"alpha", p.alpha}, {"w1", p.w1}, {"w2", p.w2}, {"s", p.s}};
  return j.dump(1) + "\n";
}

ParamsFile params_from_json(std::string_view text) {
  const json j = parse_json_or_throw(text, "params file");
  ParamsFile out;
  try {
    out.beta = j.at("beta").get<std::vector<double>>();
    for (const auto& [id, p] : j.at("papers").items()) {
      FittedPaper fp;
      fp.id = id;
      fp.alpha = p.at("alpha").get<double>();
      fp.w1 = p.at("w1").get<double>();
      fp.w2 = p.at("w2").get<double>();
      fp.s = p.at("s").get<std::vector<double>>();
      out.papers.push_back(std::move(fp));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("params file: ") + e.what());
  }
  if (out.beta.empty()) throw SchemaError("params file: beta is empty");
  for (const FittedPaper& p : out.papers)
    if (p.s.size() != out.beta.size())
      throw SchemaError("params file: paper \"" + p.id + "\" feature length mismatch");
  return out;
}

void save_params_json(const ParamsFile& params, const std::string& path) {
  write_text_file(path, params_to_json(params));
}

ParamsFile load_params_json(const std::string& path) {
  return params_from_json(read_text_file(path));
}

std::string model_to_json(const ModelFile& model) {
  json j;
  j["variant"] = model.variant;
  auto& models = j["models"] = json::object();
  for (const auto& [horizon, ensemble] : model.models)
    models[std::to_string(horizon)] = ensemble_to_json(ensemble);
  return j.dump(1) + "\n";
}

ModelFile model_from_json(std::string_view text) {
  const json j = parse_json_or_throw(text, "model file");
  ModelFile out;
  try {
    out.variant = j.at("variant").get<std::string>();
    for (const auto& [key, value] : j.at("models").items())
      out.models.emplace_back(parse_int_token(key, "model file horizon"), ensemble_from_json(value));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
  if (out.variant != "all" && out.variant != "top10")
    throw SchemaError("model file: unknown variant \"" + out.variant + "\"");
  std::sort(out.models.begin(), out.models.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void save_model_json(const ModelFile& model, const std::string& path) {
  write_text_file(path, model_to_json(model));
}

ModelFile load_model_json(const std::string& path) {
  return model_from_json(read_text_file(path));
}

std::string report_to_json(const ComparisonTable& table) {
  json j = json::object();
  for (const HorizonReport& rep : table.models) {
    auto& m = j[rep.model] = json::object();
    for (std::size_t i = 0; i < rep.horizons.size(); ++i) {
      const MetricBundle& b = rep.bundles[i];
      m[std::to_string(rep.horizons[i])] = {
          {"mae", b.mae},           {"rmse", b.rmse},
          {"nrmse", b.nrmse},       {"mape", b.mape},
          {"accuracy", b.accuracy}, {"epsilon", b.epsilon},
          {"n_used", b.n_used},     {"n_excluded", b.n_excluded}};
    }
  }
  return j.dump(1) + "\n";
}

std::string format_comparison_table(const ComparisonTable& table) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %7s %12s %12s %12s %12s %9s %7s %11s\n", "model",
                "horizon", "mae", "rmse", "nrmse", "mape", "accuracy", "n_used",
                "n_excluded");
  out += buf;
  for (const HorizonReport& rep : table.models) {
    for (std::size_t i = 0; i < rep.horizons.size(); ++i) {
      const MetricBundle& b = rep.bundles[i];
      std::snprintf(buf, sizeof buf, "%-12s %7d %12.6f %12.6f %12.6f %12.6f %9.6f %7zu %11zu\n",
                    rep.model.c_str(), rep.horizons[i], b.mae, b.rmse, b.nrmse, b.mape,
                    b.accuracy, b.n_used, b.n_excluded);
      out += buf;
    }
  }
  return out;
}

TomlTable TomlTable::parse(std::string_view text) {
  TomlTable table;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    const std::string where = "config line " + std::to_string(line_no);

    // Strip the comment, respecting quoted strings.
    bool in_string = false;
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (in_string && c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = !in_string;
      } else if (!in_string && c == '#') {
        cut = i;
        break;
      }
    }
    line.resize(cut);

    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') throw SchemaError(where + ": sections are not supported");

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty() || key.find_first_not_of(
                           "abcdefghijklmnopqrstuvwxyz"
                           "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_") != std::string::npos)
      throw SchemaError(where + ": malformed key");
    if (raw.empty()) throw SchemaError(where + ": missing value");

    Value v;
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"')
        throw SchemaError(where + ": unterminated string");
      v.quoted = true;
      for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        if (raw[i] == '\\') {
          ++i;
          if (i + 1 >= raw.size() || (raw[i] != '"' && raw[i] != '\\'))
            throw SchemaError(where + ": unsupported escape");
        } else if (raw[i] == '"') {
          throw SchemaError(where + ": stray quote");
        }
        v.raw.push_back(raw[i]);
      }
    } else {
      v.raw = raw;
    }
    if (!table.values_.emplace(key, std::move(v)).second)
      throw SchemaError(where + ": duplicate key \"" + key + "\"");
  }
  return table;
}

double TomlTable::number(const std::string& key, double fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.quoted)
    throw SchemaError("config key \"" + key + "\": expected a number");
  return parse_double_token(it->second.raw, "config key \"" + key + "\"");
}

int TomlTable::integer(const std::string& key, int fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.quoted)
    throw SchemaError("config key \"" + key + "\": expected an integer");
  return parse_int_token(it->second.raw, "config key \"" + key + "\"");
}

std::uint64_t TomlTable::unsigned64(const std::string& key, std::uint64_t fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& raw = it->second.raw;
  std::uint64_t v = 0;
  const auto res = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (it->second.quoted || res.ec != std::errc{} || res.ptr != raw.data() + raw.size())
    throw SchemaError("config key \"" + key + "\": expected an unsigned integer");
  return v;
}

bool TomlTable::boolean(const std::string& key, bool fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (!it->second.quoted && it->second.raw == "true") return true;
  if (!it->second.quoted && it->second.raw == "false") return false;
  throw SchemaError("config key \"" + key + "\": expected true or false");
}

std::string TomlTable::text(const std::string& key, std::string fallback) {
  consumed_[key] = true;
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (!it->second.quoted)
    throw SchemaError("config key \"" + key + "\": expected a quoted string");
  return it->second.raw;
}

void TomlTable::reject_unknown() const {
  for (const auto& [key, value] : values_)
    if (consumed_.find(key) == consumed_.end())
      throw SchemaError("config: unknown key \"" + key + "\"");
}

FitConfig fit_config_from_toml(std::string_view text) {
  TomlTable t = TomlTable::parse(text);
  FitConfig c;
  c.rho = t.number("rho", c.rho);
  c.lambda_reg = t.number("lambda_reg", c.lambda_reg);
  c.outer_max = t.integer("outer_max", c.outer_max);
  c.em_max = t.integer("em_max", c.em_max);
  c.em_tol = t.number("em_tol", c.em_tol);
  c.gd_step = t.number("gd_step", c.gd_step);
  c.gd_backtrack = t.number("gd_backtrack", c.gd_backtrack);
  c.gd_max_backtracks = t.integer("gd_max_backtracks", c.gd_max_backtracks);
  c.w_min = t.number("w_min", c.w_min);
  c.w_max = t.number("w_max", c.w_max);
  c.tol_objective = t.number("tol_objective", c.tol_objective);
  c.tol_residual = t.number("tol_residual", c.tol_residual);
  c.literal_alpha = t.boolean("literal_alpha", c.literal_alpha);
  c.seed = t.unsigned64("seed", c.seed);
  c.jobs = t.integer("jobs", c.jobs);
  t.reject_unknown();
  c.validate();
  return c;
}

SynthConfig synth_config_from_toml(std::string_view text) {
  TomlTable t = TomlTable::parse(text);
  SynthConfig c;
  c.n_papers = t.integer("n_papers", c.n_papers);
  c.n_authors = t.integer("n_authors", c.n_authors);
  c.n_journals = t.integer("n_journals", c.n_journals);
  c.pub_year_min = t.integer("pub_year_min", c.pub_year_min);
  c.pub_year_max = t.integer("pub_year_max", c.pub_year_max);
  c.q_log_mean = t.number("q_log_mean", c.q_log_mean);
  c.q_log_sigma = t.number("q_log_sigma", c.q_log_sigma);
  c.q_cap = t.integer("q_cap", c.q_cap);
  c.star_q_min = t.number("star_q_min", c.star_q_min);
  c.star_q_max = t.number("star_q_max", c.star_q_max);
  c.beta = t.number("beta", c.beta);
  c.alpha_min = t.number("alpha_min", c.alpha_min);
  c.alpha_max = t.number("alpha_max", c.alpha_max);
  c.w1_min = t.number("w1_min", c.w1_min);
  c.w1_max = t.number("w1_max", c.w1_max);
  c.w2_min = t.number("w2_min", c.w2_min);
  c.w2_max = t.number("w2_max", c.w2_max);
  c.train_window = t.number("train_window", c.train_window);
  c.horizon_span = t.number("horizon_span", c.horizon_span);
  c.portfolio_size = t.integer("portfolio_size", c.portfolio_size);
  c.seed = t.unsigned64("seed", c.seed);
  t.reject_unknown();
  c.validate();
  return c;
}

GridFile grid_from_toml(std::string_view text) {
  TomlTable t = TomlTable::parse(text);
  GridStride stride;
  stride.learning_rate = t.integer("learning_rate_stride", stride.learning_rate);
  stride.iterations = t.integer("iterations_stride", stride.iterations);
  stride.min_leaf = t.integer("min_leaf_stride", stride.min_leaf);
  stride.depth = t.integer("depth_stride", stride.depth);
  stride.subsample = t.integer("subsample_stride", stride.subsample);
  GridFile g;
  g.spec = GridSpec::paper_defaults(stride);
  g.spec.seed = t.unsigned64("seed", g.spec.seed);
  g.objective = t.text("objective", g.objective);
  g.val_fraction = t.number("val_fraction", g.val_fraction);
  t.reject_unknown();
  g.spec.validate();
  if (!(g.val_fraction > 0.0 && g.val_fraction < 1.0))
    throw SchemaError("grid config: val_fraction must lie in (0, 1)");
  return g;
}

std::string manifest_to_json(const RunManifest& manifest) {
  json j;
  j["subcommand"] = manifest.subcommand;
  j["tool_version"] = manifest.tool_version;
  j["seed"] = manifest.seed;
  j["jobs"] = manifest.jobs;
  auto files = [](const std::vector<std::pair<std::string, std::string>>& list) {
    json arr = json::array();
    for (const auto& [role, path] : list) arr.push_back({{"role", role}, {"path", path}});
    return arr;
  };
  j["inputs"] = files(manifest.inputs);
  j["outputs"] = files(manifest.outputs);
  j["config"] = manifest.config;
  j["wall_seconds"] = manifest.wall_seconds;
  return j.dump(1) + "\n";
}

void write_manifest_for(const RunManifest& manifest, const std::string& artifact_path) {
  write_text_file(artifact_path + ".manifest.json", manifest_to_json(manifest));
}

}  // namespace citeflux
