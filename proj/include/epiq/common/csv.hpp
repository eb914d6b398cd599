#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "epiq/common/error.hpp"

namespace epiq::csv {

/// Splits one CSV line. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

/// A whole CSV file held in memory, addressed by header name.
class Table {
 public:
  static Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!have_header) {
        t.header_ = split_line(line);
        for (std::size_t i = 0; i < t.header_.size(); ++i) t.index_[t.header_[i]] = i;
        have_header = true;
        continue;
      }
      auto fields = split_line(line);
      fields.resize(t.header_.size());
      t.rows_.push_back(std::move(fields));
    }
    return t;
  }

  [[nodiscard]] const std::vector<std::string>& header() const { return header_; }
  [[nodiscard]] const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  [[nodiscard]] bool empty() const { return rows_.empty(); }
  [[nodiscard]] bool has_column(const std::string& name) const { return index_.contains(name); }

  [[nodiscard]] std::size_t column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw DataError("missing CSV column '" + name + "'");
    return it->second;
  }

 private:
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline double require_double(std::string_view s, std::string_view what) {
  const auto v = parse_double(s);
  if (!v) throw DataError("unparseable " + std::string(what) + " '" + std::string(s) + "'");
  return *v;
}

/// Shortest round-trip representation; identical bytes for identical doubles.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += fields[i];
  }
  return out;
}

/// Line-oriented CSV writer.
class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw DataError("cannot write '" + path.string() + "'");
  }

  void row(const std::vector<std::string>& fields) { out_ << join(fields) << '\n'; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace epiq::csv
