#pragma once

// Structured key/value text used for configs, the materials database, fleets,
// fit reports, plans and manifests.
//
//   # comment (anything after '#' is ignored)
//   [section]                 sections may repeat; order is preserved
//   key = value
//   matrix_key = [            numeric block, one row per line
//     1.0  2.0  3.0
//   ]
//
// Keys that appear before the first section belong to a section named "".

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "ringqed/error.hpp"

namespace ringqed::kv {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double x, int significant = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant, x);
  return buf;
}

struct Entry {
  std::string key;
  std::string value;
  std::vector<std::vector<double>> matrix;
  bool is_matrix = false;
  int line = 0;
};

class Section {
 public:
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
  std::string source;

  const Entry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }

  bool has(std::string_view key) const { return find(key) != nullptr; }

  [[noreturn]] void error_at(int at_line, const std::string& what) const {
    fail(ErrorKind::ParseError, source + ":" + std::to_string(at_line) + ": " + what);
  }

  const Entry& entry(std::string_view key) const {
    const auto* e = find(key);
    if (!e) error_at(line, "section [" + name + "] is missing required key '" + std::string(key) + "'");
    return *e;
  }

  std::string text(std::string_view key) const {
    const auto& e = entry(key);
    if (e.is_matrix) error_at(e.line, "key '" + e.key + "' expects a scalar, found a matrix block");
    return e.value;
  }

  std::string text_or(std::string_view key, std::string fallback) const {
    return has(key) ? text(key) : std::move(fallback);
  }

  double number(std::string_view key) const {
    const auto& e = entry(key);
    if (e.is_matrix) error_at(e.line, "key '" + e.key + "' expects a number, found a matrix block");
    const auto v = parse_double(e.value);
    if (!v) error_at(e.line, "key '" + e.key + "' expects a number, got '" + e.value + "'");
    return *v;
  }

  double number_or(std::string_view key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::optional<double> optional_number(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
  }

  std::int64_t integer(std::string_view key) const {
    const auto& e = entry(key);
    std::int64_t v = 0;
    const auto s = trim(e.value);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (e.is_matrix || ec != std::errc{} || ptr != s.data() + s.size())
      error_at(e.line, "key '" + e.key + "' expects an integer, got '" + e.value + "'");
    return v;
  }

  bool boolean(std::string_view key) const {
    const auto& e = entry(key);
    if (e.value == "true") return true;
    if (e.value == "false") return false;
    error_at(e.line, "key '" + e.key + "' expects true or false, got '" + e.value + "'");
  }

  bool boolean_or(std::string_view key, bool fallback) const { return has(key) ? boolean(key) : fallback; }

  /// Numeric block with an exact shape.
  std::vector<std::vector<double>> matrix(std::string_view key, std::size_t rows, std::size_t cols) const {
    const auto& e = entry(key);
    if (!e.is_matrix) error_at(e.line, "key '" + e.key + "' expects a matrix block");
    if (e.matrix.size() != rows)
      error_at(e.line, "matrix '" + e.key + "' has " + std::to_string(e.matrix.size()) + " rows, expected " +
                           std::to_string(rows));
    for (std::size_t r = 0; r < rows; ++r)
      if (e.matrix[r].size() != cols)
        error_at(e.line + 1 + static_cast<int>(r), "matrix '" + e.key + "' row " + std::to_string(r + 1) + " has " +
                                                       std::to_string(e.matrix[r].size()) + " columns, expected " +
                                                       std::to_string(cols));
    return e.matrix;
  }

  /// Rejects keys outside the schema so typos in unit suffixes surface early.
  void reject_unknown(std::initializer_list<std::string_view> known) const {
    for (const auto& e : entries) {
      bool ok = false;
      for (auto k : known) ok = ok || (e.key == k);
      if (!ok) {
        std::string list;
        for (auto k : known) list += (list.empty() ? "" : ", ") + std::string(k);
        error_at(e.line, "unknown key '" + e.key + "' in [" + name + "]; expected one of: " + list);
      }
    }
  }
};

class Document {
 public:
  std::string source;
  std::vector<Section> sections;

  const Section* find(std::string_view name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  const Section& section(std::string_view name) const {
    const auto* s = find(name);
    if (!s) fail(ErrorKind::ParseError, source + ": missing required section [" + std::string(name) + "]");
    return *s;
  }

  std::vector<const Section*> all(std::string_view name) const {
    std::vector<const Section*> out;
    for (const auto& s : sections)
      if (s.name == name) out.push_back(&s);
    return out;
  }

  void reject_unknown_sections(std::initializer_list<std::string_view> known) const {
    for (const auto& s : sections) {
      if (s.name.empty() && s.entries.empty()) continue;
      bool ok = false;
      for (auto k : known) ok = ok || (s.name == k);
      if (!ok) s.error_at(s.line, "unknown section [" + s.name + "]");
    }
  }
};

inline Document parse(std::string_view text, std::string source = "<memory>") {
  Document doc;
  doc.source = source;
  doc.sections.push_back(Section{"", 0, {}, source});

  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  Entry* open_matrix = nullptr;

  auto error = [&](int at, const std::string& what) {
    fail(ErrorKind::ParseError, source + ":" + std::to_string(at) + ": " + what);
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (open_matrix) {
      if (line == "]") {
        if (open_matrix->matrix.empty()) error(lineno, "matrix '" + open_matrix->key + "' is empty");
        open_matrix = nullptr;
        continue;
      }
      std::vector<double> row;
      std::istringstream cells{std::string(line)};
      std::string cell;
      while (cells >> cell) {
        const auto v = parse_double(cell);
        if (!v) error(lineno, "matrix '" + open_matrix->key + "': '" + cell + "' is not a number");
        row.push_back(*v);
      }
      open_matrix->matrix.push_back(std::move(row));
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') error(lineno, "unterminated section header");
      auto name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) error(lineno, "empty section name");
      doc.sections.push_back(Section{std::string(name), lineno, {}, source});
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) error(lineno, "expected 'key = value', got '" + std::string(line) + "'");
    Entry e;
    e.key = std::string(trim(line.substr(0, eq)));
    e.value = std::string(trim(line.substr(eq + 1)));
    e.line = lineno;
    if (e.key.empty()) error(lineno, "empty key");
    auto& section = doc.sections.back();
    if (section.find(e.key)) error(lineno, "duplicate key '" + e.key + "' in [" + section.name + "]");
    if (e.value == "[") {
      e.is_matrix = true;
      e.value.clear();
    }
    section.entries.push_back(std::move(e));
    if (section.entries.back().is_matrix) open_matrix = &section.entries.back();
  }
  if (open_matrix) error(lineno, "matrix '" + open_matrix->key + "' is not closed with ']'");
  return doc;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::ParseError, path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Document read_file(const std::filesystem::path& path) { return parse(read_text_file(path), path.string()); }

/// Writes via a temporary sibling and rename, so readers never observe a
/// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::ParseError, tmp.string() + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorKind::ParseError, tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

class Writer {
 public:
  Writer& comment(std::string_view text) {
    out_ << "# " << text << '\n';
    return *this;
  }

  Writer& section(std::string_view name) {
    if (out_.tellp() > 0) out_ << '\n';
    out_ << '[' << name << "]\n";
    return *this;
  }

  Writer& field(std::string_view key, std::string_view value) {
    out_ << key << " = " << value << '\n';
    return *this;
  }

  Writer& field(std::string_view key, const char* value) { return field(key, std::string_view(value)); }
  Writer& field(std::string_view key, const std::string& value) { return field(key, std::string_view(value)); }
  Writer& field(std::string_view key, double value) { return field(key, format_double(value)); }
  Writer& field(std::string_view key, bool value) { return field(key, value ? "true" : "false"); }

  template <class Int>
    requires std::is_integral_v<Int>
  Writer& field(std::string_view key, Int value) {
    return field(key, std::to_string(value));
  }

  Writer& matrix(std::string_view key, const std::vector<std::vector<double>>& rows) {
    out_ << key << " = [\n";
    for (const auto& row : rows) {
      out_ << ' ';
      for (double v : row) out_ << ' ' << format_double(v);
      out_ << '\n';
    }
    out_ << "]\n";
    return *this;
  }

  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

/// FNV-1a, 64 bit. Used for manifest config hashes.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace ringqed::kv
