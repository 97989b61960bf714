#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace metagen {

/// Round-trip formatting for doubles ("%.17g"), so CSV output is byte-stable.
std::string format_double(double v);

/// Minimal comma-separated writer; fields must not contain commas or newlines.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::string line;
    bool first = true;
    (append(line, first, fields), ...);
    line.push_back('\n');
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  }

 private:
  template <typename T>
  static void append(std::string& line, bool& first, const T& v) {
    if (!first) line.push_back(',');
    first = false;
    if constexpr (std::is_floating_point_v<T>) {
      line += format_double(static_cast<double>(v));
    } else if constexpr (std::is_integral_v<T>) {
      line += std::to_string(v);
    } else {
      line += std::string_view(v);
    }
  }

  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a named column; throws SchemaError when absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv_file(const std::filesystem::path& path);

}  // namespace metagen
