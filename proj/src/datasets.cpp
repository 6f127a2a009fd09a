#include "panel/datasets.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "panel/error.hpp"
#include "panel/text.hpp"

#ifndef PANEL_DEFAULT_SCHEMAS_DIR
#define PANEL_DEFAULT_SCHEMAS_DIR "schemas"
#endif

namespace panel::datasets {

using nlohmann::json;

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTest: return "test";
    case Split::kAll: return "all";
    case Split::kZeroShot: return "zero_shot";
  }
  return "all";
}

Split parse_split(std::string_view s) {
  for (auto sp : {Split::kTrain, Split::kTest, Split::kAll, Split::kZeroShot}) {
    if (to_string(sp) == s) return sp;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown split '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Schemas

std::filesystem::path default_schemas_dir() {
  if (const char* env = std::getenv("PANEL_SCHEMAS_DIR"); env && *env) return env;
  return PANEL_DEFAULT_SCHEMAS_DIR;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read schema " + path.string());
  try {
    const json cfg = json::parse(in);
    Schema schema;
    schema.name = cfg.value("name", path.stem().string());
    schema.task = cfg.value("task", std::string{});
    const auto format = cfg.value("format", std::string("delimited"));
    if (format == "jsonl") {
      schema.format = Schema::Format::kJsonl;
    } else if (format != "delimited") {
      throw Error(ErrorCode::kInvalidConfig, path.string() + ": unknown format " + format);
    }
    const auto delim = cfg.value("delimiter", std::string(","));
    if (delim.size() != 1) {
      throw Error(ErrorCode::kInvalidConfig, path.string() + ": delimiter must be one character");
    }
    schema.delimiter = delim[0];
    const auto& cols = cfg.at("columns");
    schema.id_column = cols.value("id", std::string{});
    schema.document_column = cols.at("document").get<std::string>();
    schema.target_column = cols.at("target").get<std::string>();
    schema.label_column = cols.value("label", std::string{});
    if (cfg.contains("filter")) {
      schema.filter = std::make_pair(cfg["filter"].at("column").get<std::string>(),
                                     cfg["filter"].at("equals").get<std::string>());
    }
    schema.split = parse_split(cfg.value("split", std::string("all")));
    schema.metric = cfg.value("metric", std::string{});
    return schema;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
}

Schema resolve_schema(std::string_view name_or_path, const std::filesystem::path& root) {
  std::filesystem::path p(name_or_path);
  if (p.has_extension() || name_or_path.find('/') != std::string_view::npos) {
    return load_schema(p);
  }
  return load_schema(root / (std::string(name_or_path) + ".json"));
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// RFC 4180 style: quoted fields may contain delimiters, doubled quotes and
// newlines. CRLF is accepted.
std::vector<Row> parse_delimited(std::string_view data, char delim) {
  std::vector<Row> rows;
  if (data.substr(0, 3) == "\xEF\xBB\xBF") data.remove_prefix(3);
  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  row.line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank = row.fields.size() == 1 && row.fields[0].empty();
    if (!blank) rows.push_back(std::move(row));
    row = Row{};
    row.line = line;
  };

  for (std::size_t i = 0; i < data.size(); ++i) {
    const char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      ++line;
      end_row();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (!field.empty() || !row.fields.empty()) end_row();
  return rows;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read corpus " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.filename().string() + ":" + std::to_string(line) + ": ";
}

class CorpusBuilder {
 public:
  CorpusBuilder(const std::filesystem::path& path, const LabelSet& labels)
      : path_(path), labels_(labels) {}

  void add(std::size_t line, std::string_view document, std::string_view target,
           std::optional<std::string_view> raw_label, std::string_view raw_id) {
    if (text::trim(document).empty()) {
      throw Error(ErrorCode::kEmptyDocument, where(path_, line) + "empty document");
    }
    if (text::trim(target).empty()) {
      throw Error(ErrorCode::kEmptyDocument, where(path_, line) + "empty target");
    }
    std::optional<std::string_view> gold;
    if (raw_label && !text::trim(*raw_label).empty()) gold = raw_label;
    Instance inst;
    try {
      inst = make_instance(document, target, gold, labels_, std::string(text::trim(raw_id)));
    } catch (const Error& e) {
      throw Error(e.code(), where(path_, line) + e.what());
    }
    // Datasets repeat (document, target) pairs; ids must stay unique.
    std::string id = inst.id;
    for (int n = 2; !ids_.insert(id).second; ++n) id = inst.id + "~" + std::to_string(n);
    inst.id = std::move(id);
    instances_.push_back(std::move(inst));
  }

  std::vector<Instance> take() { return std::move(instances_); }

 private:
  const std::filesystem::path& path_;
  const LabelSet& labels_;
  std::set<std::string> ids_;
  std::vector<Instance> instances_;
};

std::vector<Instance> load_rows(const std::filesystem::path& path, const Schema& schema,
                                const LabelSet& labels) {
  const auto rows = parse_delimited(read_file(path), schema.delimiter);
  if (rows.empty()) {
    throw Error(ErrorCode::kSchemaMismatch, path.string() + ": no header row");
  }
  const auto& header = rows.front().fields;
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    if (name.empty()) {
      if (required) throw Error(ErrorCode::kSchemaMismatch, "schema lacks a required column");
      return std::nullopt;
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (text::trim(header[i]) == name) return i;
    }
    throw Error(ErrorCode::kSchemaMismatch,
                path.string() + ": header has no column '" + name + "'");
  };
  const auto doc_col = *column(schema.document_column, true);
  const auto target_col = *column(schema.target_column, true);
  const auto label_col = column(schema.label_column, false);
  const auto id_col = column(schema.id_column, false);
  std::optional<std::size_t> filter_col;
  if (schema.filter) filter_col = column(schema.filter->first, true);

  CorpusBuilder builder(path, labels);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto get = [&](std::size_t col, const std::string& name) -> const std::string& {
      if (col >= row.fields.size()) {
        throw Error(ErrorCode::kSchemaMismatch,
                    where(path, row.line) + "row has no '" + name + "' field");
      }
      return row.fields[col];
    };
    if (filter_col && text::trim(get(*filter_col, schema.filter->first)) != schema.filter->second) {
      continue;
    }
    std::optional<std::string_view> label;
    if (label_col) label = get(*label_col, schema.label_column);
    builder.add(row.line, get(doc_col, schema.document_column),
                get(target_col, schema.target_column), label,
                id_col ? std::string_view(get(*id_col, schema.id_column)) : std::string_view());
  }
  return builder.take();
}

std::string json_field(const json& obj, const std::string& name) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

std::vector<Instance> load_jsonl(const std::filesystem::path& path, const Schema& schema,
                                 const LabelSet& labels) {
  std::istringstream in(read_file(path));
  CorpusBuilder builder(path, labels);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw Error(ErrorCode::kSchemaMismatch, where(path, line_no) + "not a JSON object");
    }
    for (const auto* name : {&schema.document_column, &schema.target_column}) {
      if (!obj.contains(*name)) {
        throw Error(ErrorCode::kSchemaMismatch, where(path, line_no) + "missing '" + *name + "'");
      }
    }
    if (schema.filter && json_field(obj, schema.filter->first) != schema.filter->second) continue;
    std::optional<std::string> label;
    if (!schema.label_column.empty()) label = json_field(obj, schema.label_column);
    const auto id = schema.id_column.empty() ? std::string() : json_field(obj, schema.id_column);
    const auto doc = json_field(obj, schema.document_column);
    const auto target = json_field(obj, schema.target_column);
    builder.add(line_no, doc, target,
                label ? std::optional<std::string_view>(*label) : std::nullopt, id);
  }
  return builder.take();
}

}  // namespace

Corpus load_delimited(const std::filesystem::path& path, const Schema& schema,
                      const LabelSet& labels, std::string task_name) {
  Corpus corpus;
  corpus.name = path.stem().string();
  corpus.task_name = task_name.empty() ? schema.task : std::move(task_name);
  corpus.split = schema.split;
  corpus.instances = schema.format == Schema::Format::kJsonl ? load_jsonl(path, schema, labels)
                                                             : load_rows(path, schema, labels);
  return corpus;
}

// ---------------------------------------------------------------------------
// Stats

namespace {

int tenths_of_percent(std::size_t count, std::size_t total) {
  if (total == 0) return 0;
  // round(count * 1000 / total), halves up, in integers.
  return static_cast<int>((2 * count * 1000 + total) / (2 * total));
}

void finish(TargetStats& s) {
  std::size_t labeled = 0;
  for (auto c : s.counts) labeled += c;
  s.tenths.clear();
  for (auto c : s.counts) s.tenths.push_back(tenths_of_percent(c, labeled));
  s.total = labeled + s.unlabeled;
}

std::string format_tenths(int tenths) {
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

}  // namespace

CorpusStats stats(const Corpus& corpus, const LabelSet& labels) {
  if (corpus.instances.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "stats of an empty corpus");
  }
  CorpusStats out;
  for (const auto& l : labels.labels()) out.labels.push_back(l.name);
  out.overall.target = "all";
  out.overall.counts.assign(labels.size(), 0);

  std::map<std::string, std::size_t> index;
  for (const auto& inst : corpus.instances) {
    auto [it, inserted] = index.emplace(inst.target, out.targets.size());
    if (inserted) {
      TargetStats t;
      t.target = inst.target;
      t.counts.assign(labels.size(), 0);
      out.targets.push_back(std::move(t));
    }
    auto& t = out.targets[it->second];
    if (!inst.gold) {
      ++t.unlabeled;
      ++out.overall.unlabeled;
      continue;
    }
    const auto idx = labels.index_of(*inst.gold);
    if (!idx) throw Error(ErrorCode::kUnknownLabel, "gold '" + *inst.gold + "' not in label set");
    ++t.counts[*idx];
    ++out.overall.counts[*idx];
  }
  for (auto& t : out.targets) finish(t);
  finish(out.overall);
  return out;
}

std::string render_stats(const CorpusStats& s) {
  std::size_t width = 6;
  for (const auto& t : s.targets) width = std::max(width, t.target.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "Target";
  for (const auto& l : s.labels) out << "  " << std::setw(16) << l;
  out << "  Total\n";
  auto row = [&](const TargetStats& t) {
    out << std::left << std::setw(static_cast<int>(width)) << t.target;
    for (std::size_t i = 0; i < t.counts.size(); ++i) {
      std::ostringstream cell;
      cell << t.counts[i] << " (" << format_tenths(t.tenths[i]) << "%)";
      out << "  " << std::setw(16) << cell.str();
    }
    out << "  " << t.total;
    if (t.unlabeled) out << " (" << t.unlabeled << " unlabeled)";
    out << '\n';
  };
  for (const auto& t : s.targets) row(t);
  if (s.targets.size() > 1) row(s.overall);
  return out.str();
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

// Uniform integer in [0, bound) by rejection; identical on every platform,
// unlike std::uniform_int_distribution.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[bounded(rng, i)]);
  }
}

}  // namespace

Corpus sample(const Corpus& corpus, std::size_t n, std::uint64_t seed, const LabelSet& labels) {
  const std::size_t size = corpus.instances.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "sample size must be positive");
  if (n > size) {
    throw Error(ErrorCode::kSampleTooLarge, "sample of " + std::to_string(n) + " from a corpus of " +
                                                std::to_string(size));
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;

  const bool stratify = std::all_of(corpus.instances.begin(), corpus.instances.end(),
                                    [](const Instance& i) { return i.gold.has_value(); });
  if (stratify) {
    std::vector<std::vector<std::size_t>> groups(labels.size());
    for (std::size_t i = 0; i < size; ++i) {
      const auto idx = labels.index_of(*corpus.instances[i].gold);
      if (!idx) throw Error(ErrorCode::kUnknownLabel, "gold label outside the label set");
      groups[*idx].push_back(i);
    }
    // Largest remainder: floor of each exact quota, then one extra to the
    // groups with the biggest fractional parts (label order breaks ties).
    std::vector<std::size_t> quota(groups.size());
    std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, group)
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const std::size_t scaled = n * groups[g].size();
      quota[g] = scaled / size;
      assigned += quota[g];
      remainders.emplace_back(scaled % size, g);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++quota[remainders[k].second];

    for (std::size_t g = 0; g < groups.size(); ++g) {
      shuffle(groups[g], rng);
      chosen.insert(chosen.end(), groups[g].begin(), groups[g].begin() + quota[g]);
    }
  } else {
    std::vector<std::size_t> all(size);
    std::iota(all.begin(), all.end(), 0);
    shuffle(all, rng);
    chosen.assign(all.begin(), all.begin() + n);
  }
  std::sort(chosen.begin(), chosen.end());

  Corpus out;
  out.name = corpus.name + "-sample" + std::to_string(n) + "-seed" + std::to_string(seed);
  out.task_name = corpus.task_name;
  out.split = corpus.split;
  for (auto i : chosen) out.instances.push_back(corpus.instances[i]);
  return out;
}

void write_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const auto& inst : corpus.instances) {
    json obj{{"id", inst.id}, {"document", inst.document}, {"target", inst.target}};
    obj["label"] = inst.gold ? json(*inst.gold) : json(nullptr);
    out << obj.dump() << '\n';
  }
}

}  // namespace panel::datasets
