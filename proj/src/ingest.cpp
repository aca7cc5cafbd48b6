#include "kcpd/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "kcpd/error.hpp"

namespace kcpd {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open '" + path.string() + "'");
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot write '" + path.string() + "'");
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ": line " + std::to_string(line) + ": ";
}

// Strips surrounding blanks and a trailing carriage return.
std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

DatasetEntry load_jsonl(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<double> values;
  std::size_t dim = 0;
  std::size_t rows = 0;
  bool any_flag = false;
  std::vector<std::size_t> boundaries;
  std::vector<std::string> texts;
  std::size_t text_rows = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where(path, line_no) + "malformed JSON: " + e.what());
    }
    if (!row.is_object() || !row.contains("vec") || !row["vec"].is_array()) {
      throw ValidationError(where(path, line_no) + "expected an object with a \"vec\" array");
    }
    const json& vec = row["vec"];
    if (rows == 0) {
      dim = vec.size();
      if (dim == 0) throw ValidationError(where(path, line_no) + "empty vector");
    } else if (vec.size() != dim) {
      throw ValidationError(where(path, line_no) + "vector has dimension " +
                            std::to_string(vec.size()) + ", expected " + std::to_string(dim));
    }
    for (const json& v : vec) {
      if (!v.is_number()) {
        throw ValidationError(where(path, line_no) + "non-numeric vector entry");
      }
      const double x = v.get<double>();
      if (!std::isfinite(x)) {
        throw ValidationError(where(path, line_no) + "non-finite vector entry");
      }
      values.push_back(x);
    }
    ++rows;
    if (auto it = row.find("text"); it != row.end()) {
      if (!it->is_string()) throw ValidationError(where(path, line_no) + "\"text\" must be a string");
      texts.resize(rows);
      texts.back() = it->get<std::string>();
      ++text_rows;
    }
    if (auto it = row.find("boundary_after"); it != row.end()) {
      if (!it->is_boolean()) {
        throw ValidationError(where(path, line_no) + "\"boundary_after\" must be a boolean");
      }
      any_flag = true;
      if (it->get<bool>()) boundaries.push_back(rows);
    }
  }
  if (rows == 0) {
    throw ValidationError(path.string() + ": no observations");
  }
  DatasetEntry entry{EmbeddingSequence(rows, dim, std::move(values)), std::nullopt, {}};
  if (any_flag) {
    if (!boundaries.empty() && boundaries.back() == rows) boundaries.pop_back();
    entry.gold = Segmentation(rows, std::move(boundaries));
  }
  if (text_rows == rows) {
    texts.resize(rows);
    entry.texts = std::move(texts);
  }
  return entry;
}

void save_jsonl(const std::filesystem::path& path, const EmbeddingSequence& seq,
                const std::optional<Segmentation>& gold, const std::vector<std::string>& texts) {
  if (gold && gold->length() != seq.length()) {
    throw ValidationError("gold segmentation length does not match the sequence");
  }
  if (!texts.empty() && texts.size() != seq.length()) {
    throw ValidationError("text count does not match the sequence");
  }
  std::ofstream out = open_output(path);
  std::size_t next_boundary = 0;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const auto row = seq.row(t);
    json obj;
    obj["vec"] = std::vector<double>(row.begin(), row.end());
    if (!texts.empty()) obj["text"] = texts[t];
    if (gold) {
      const auto& cps = gold->change_points();
      const bool flag = next_boundary < cps.size() && cps[next_boundary] == t + 1;
      if (flag) ++next_boundary;
      obj["boundary_after"] = flag;
    }
    out << obj.dump() << '\n';
  }
}

EmbeddingSequence load_csv_matrix(const std::filesystem::path& path, bool skip_header) {
  std::ifstream in = open_input(path);
  std::vector<double> values;
  std::size_t dim = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    const std::string_view content = trim(line);
    if (content.empty()) continue;
    std::size_t col = 0;
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = content.find(',', pos);
      const std::string_view field =
          trim(content.substr(pos, comma == std::string_view::npos ? comma : comma - pos));
      ++col;
      double x = 0.0;
      const char* begin = field.data();
      const char* end = field.data() + field.size();
      if (!field.empty() && *begin == '+') ++begin;
      const auto [ptr, ec] = std::from_chars(begin, end, x);
      if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(x)) {
        throw ValidationError(path.string() + ": row " + std::to_string(line_no) + ", column " +
                              std::to_string(col) + ": cannot parse '" + std::string(field) +
                              "' as a finite number");
      }
      values.push_back(x);
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (rows == 0) {
      dim = col;
    } else if (col != dim) {
      throw ValidationError(path.string() + ": row " + std::to_string(line_no) + " has " +
                            std::to_string(col) + " columns, expected " + std::to_string(dim));
    }
    ++rows;
  }
  if (rows == 0) {
    throw ValidationError(path.string() + ": no observations");
  }
  return {rows, dim, std::move(values)};
}

void save_csv_matrix(const std::filesystem::path& path, const EmbeddingSequence& seq) {
  std::ofstream out = open_output(path);
  char buf[64];
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const auto row = seq.row(t);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      const auto res = std::to_chars(buf, buf + sizeof buf, row[i], std::chars_format::general, 17);
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

DatasetEntry load_sequence_file(const std::filesystem::path& path, bool skip_header) {
  const std::string ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson") return load_jsonl(path);
  if (ext == ".csv") return {load_csv_matrix(path, skip_header), std::nullopt, {}};
  throw ValidationError("unrecognised input extension '" + ext + "' (expected .jsonl or .csv)");
}

EmbeddingSequence normalize_rows(const EmbeddingSequence& seq) {
  std::vector<double> values = seq.values();
  const std::size_t d = seq.dim();
  for (std::size_t t = 0; t < seq.length(); ++t) {
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += values[t * d + i] * values[t * d + i];
    if (norm == 0.0) {
      throw ValidationError("row " + std::to_string(t + 1) + " has zero norm");
    }
    norm = std::sqrt(norm);
    if (norm == 1.0) continue;
    for (std::size_t i = 0; i < d; ++i) values[t * d + i] /= norm;
  }
  return {seq.length(), d, std::move(values)};
}

}  // namespace kcpd
