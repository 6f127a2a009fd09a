#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "panel/domain.hpp"

namespace panel::datasets {

enum class Split { kTrain, kTest, kAll, kZeroShot };

std::string_view to_string(Split s) noexcept;
Split parse_split(std::string_view s);

struct Corpus {
  std::string name;
  std::string task_name;
  std::vector<Instance> instances;
  Split split = Split::kAll;
};

/// Column mapping for one on-disk dataset layout. Presets live in schemas/.
struct Schema {
  enum class Format { kDelimited, kJsonl };

  std::string name;
  std::string task;  // suggested task, may be empty
  Format format = Format::kDelimited;
  char delimiter = ',';
  std::string id_column;  // optional
  std::string document_column;
  std::string target_column;
  std::string label_column;  // optional for unlabeled corpora
  // Keep only rows whose `first` column equals `second` (VAST zero-shot).
  std::optional<std::pair<std::string, std::string>> filter;
  Split split = Split::kAll;
  std::string metric;  // "f_avg", "macro_f1" or empty
};

std::filesystem::path default_schemas_dir();
Schema load_schema(const std::filesystem::path& path);
// A preset name ("sem16", "pstance", "vast", "jsonl") or a path to a schema file.
Schema resolve_schema(std::string_view name_or_path,
                      const std::filesystem::path& root = default_schemas_dir());

/// Loads a delimited (header row, quoted fields) or JSON-lines file. Labels
/// are normalized through `labels`; text is kept as-is apart from outer
/// whitespace. Errors: kSchemaMismatch, kUnknownLabel, kEmptyDocument, each
/// naming the offending line.
Corpus load_delimited(const std::filesystem::path& path, const Schema& schema,
                      const LabelSet& labels, std::string task_name = {});

struct TargetStats {
  std::string target;
  std::vector<std::size_t> counts;  // label-set order
  std::vector<int> tenths;          // percent * 10, half-up rounded
  std::size_t unlabeled = 0;
  std::size_t total = 0;            // labeled + unlabeled
};

struct CorpusStats {
  std::vector<std::string> labels;
  std::vector<TargetStats> targets;  // first-appearance order
  TargetStats overall;
};

CorpusStats stats(const Corpus& corpus, const LabelSet& labels);
std::string render_stats(const CorpusStats& stats);

/// Deterministic sample of `n` instances. When every instance has a gold
/// label the draw is stratified with largest-remainder allocation. Selected
/// instances keep corpus order.
Corpus sample(const Corpus& corpus, std::size_t n, std::uint64_t seed, const LabelSet& labels);

// One {"id","document","target","label"} object per line; readable with the
// "jsonl" schema preset.
void write_jsonl(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace panel::datasets
