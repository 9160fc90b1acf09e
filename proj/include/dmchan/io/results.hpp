#pragma once

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dmchan/nn/tensor.hpp"

namespace dmchan::io {

/// Shortest decimal text that round-trips to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// CSV with a fixed header; values are written in round-trip form.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : out_(path, std::ios::trunc), columns_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    write_row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::logic_error("CsvWriter: wrong number of cells");
    write_row(cells);
  }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t columns_;
};

/// Appends one JSON object per line.
class JsonLines {
 public:
  explicit JsonLines(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
  }
  void write(const nlohmann::json& j) { out_ << j.dump() << '\n'; }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

/// Reads a headered or headerless numeric CSV with `cols` columns.
inline nn::Tensor<float> read_matrix_csv(const std::filesystem::path& path, std::size_t cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<float> values;
  std::string line;
  std::size_t rows = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<float> row;
    std::size_t start = 0;
    bool numeric = true;
    while (start <= line.size()) {
      const std::size_t end = std::min(line.find(',', start), line.size());
      const std::string cell = line.substr(start, end - start);
      float v = 0.0f;
      const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (r.ec != std::errc() || r.ptr != cell.data() + cell.size()) numeric = false;
      row.push_back(v);
      start = end + 1;
    }
    if (!numeric) {
      if (lineno == 1) continue;  // header
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell");
    }
    if (row.size() != cols)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                               " columns, found " + std::to_string(row.size()));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw std::runtime_error(path.string() + ": no data rows");
  return nn::Tensor<float>({rows, cols}, std::move(values));
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dmchan::io
