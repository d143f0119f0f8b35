#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace quasidiag {

// 17 significant digits; inf and nan spelled out
std::string fmt17(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);
  size_t rows() const { return rows_; }
  const std::string& text() const { return text_; }

 private:
  size_t cols_;
  size_t rows_ = 0;
  std::string text_;
};

// write to a temporary sibling, then rename
void write_atomic(const std::string& path, const std::string& content);
void write_json(const std::string& path, const nlohmann::json& j);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);
std::string utc_timestamp();

}  // namespace quasidiag
