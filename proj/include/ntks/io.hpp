#pragma once

#include <string>
#include <vector>

namespace ntks {

// 17 significant digits, which round-trips every double.
std::string fmt17(double v);

class CsvTable {
 public:
  CsvTable(std::string schema, std::vector<std::string> columns);

  void add_row(const std::vector<double>& values);
  std::size_t rows() const { return rows_.size(); }
  // '#'-prefixed schema line, header line, then one line per row.
  std::string str() const;

 private:
  std::string schema_;
  std::vector<std::string> columns_;
  std::vector<std::vector<double>> rows_;
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Parses comma-separated numeric rows, skipping '#' comments and the first
// non-comment line (the header), which is returned through `header`.
std::vector<std::vector<double>> parse_csv_numbers(const std::string& text,
                                                   std::vector<std::string>* header = nullptr);

}  // namespace ntks
