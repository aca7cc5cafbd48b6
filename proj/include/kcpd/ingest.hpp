#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kcpd/kernels.hpp"
#include "kcpd/segmentation.hpp"

namespace kcpd {

struct DatasetEntry {
  EmbeddingSequence seq;
  std::optional<Segmentation> gold;
  std::vector<std::string> texts;  // empty unless every row carried "text"
};

struct Dataset {
  std::string name;
  std::vector<DatasetEntry> sequences;
};

/// One JSON object per line: {"vec": [...], "text": "...", "boundary_after": bool}.
/// "text" and "boundary_after" are optional. A gold segmentation is attached
/// when any row carries "boundary_after"; a flag on the last row is ignored.
/// Blank lines are skipped. Errors name the 1-based line.
DatasetEntry load_jsonl(const std::filesystem::path& path);

/// Writes rows in the load_jsonl schema; doubles round-trip exactly.
void save_jsonl(const std::filesystem::path& path, const EmbeddingSequence& seq,
                const std::optional<Segmentation>& gold = std::nullopt,
                const std::vector<std::string>& texts = {});

/// Numeric CSV, one observation per row, dot decimal separator regardless
/// of locale. Errors carry 1-based row and column.
EmbeddingSequence load_csv_matrix(const std::filesystem::path& path, bool skip_header = false);

/// 17 significant digits per value.
void save_csv_matrix(const std::filesystem::path& path, const EmbeddingSequence& seq);

/// Picks the loader from the extension: .jsonl/.ndjson or .csv.
DatasetEntry load_sequence_file(const std::filesystem::path& path, bool skip_header = false);

/// Scales every row to unit Euclidean norm. Zero rows are rejected with their
/// 1-based index.
EmbeddingSequence normalize_rows(const EmbeddingSequence& seq);

}  // namespace kcpd
