#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace robustify {

/// Shortest text that parses back to the same double (up to 17 digits).
std::string format_double(double v);

/// Comma-separated writer: '.' decimal point, LF line endings. An optional
/// "# generated <UTC time>" line precedes the header.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, bool timestamp);

  void header(const std::vector<std::string>& columns);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(const std::string& v);
  void end_row();

 private:
  void sep();

  std::ostream& out_;
  bool row_started_ = false;
};

/// Row-major matrix dump, no header, 17 significant digits.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace robustify
