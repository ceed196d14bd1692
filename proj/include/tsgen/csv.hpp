#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace tsgen {

// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

// Minimal CSV writer: header row, comma separator, UTF-8, LF line ends.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  // Empty cells are allowed via the string overloads.
  void write_row(const std::vector<std::string>& cells);
  void write_row(const std::vector<double>& cells);

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::string path_;
};

}  // namespace tsgen
