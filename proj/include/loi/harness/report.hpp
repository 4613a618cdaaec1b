#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "loi/core.hpp"

namespace loi::harness {

/// Shortest round-trip decimal for a double.
std::string format_number(double v);

/// RFC 4180: CRLF line ends, fields quoted when they hold a comma, quote or
/// line break.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& os_;
};

void write_trace_csv(const std::filesystem::path& path, const OptTrace& trace);
OptTrace read_trace_csv(const std::filesystem::path& path);

struct Curve {
  std::string label;
  OptTrace trace;
};

/// Loss against step as SVG 1.1 polylines. The y axis is log10 when every
/// loss is positive.
void write_loss_svg(const std::filesystem::path& path, const std::string& title,
                    const std::vector<Curve>& curves);

}  // namespace loi::harness
