#include "loi/harness/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace loi::harness {

std::string format_number(double v) { return fmt::format("{}", v); }

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) os_ << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      os_ << f;
      continue;
    }
    os_ << '"';
    for (char ch : f) {
      if (ch == '"') os_ << '"';
      os_ << ch;
    }
    os_ << '"';
  }
  os_ << "\r\n";
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, const OptTrace& trace) {
  std::ofstream out = open_out(path);
  CsvWriter csv(out);
  csv.row({"step", "loss", "param_mae", "psnr"});
  for (const TraceRecord& r : trace.iterations) {
    csv.row({std::to_string(r.step), format_number(r.loss), format_number(r.param_mae),
             format_number(r.psnr)});
  }
}

OptTrace read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  std::getline(in, line);
  OptTrace trace;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() != 4) throw Error(fmt::format("'{}': malformed trace row", path.string()));
    trace.push({std::stoi(f[0]), std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
  }
  return trace;
}

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::vector<double> linear_ticks(double lo, double hi) {
  std::vector<double> t;
  for (int i = 0; i <= 4; ++i) t.push_back(lo + (hi - lo) * i / 4.0);
  return t;
}

}  // namespace

void write_loss_svg(const std::filesystem::path& path, const std::string& title,
                    const std::vector<Curve>& curves) {
  bool log_y = true;
  double max_step = 1.0;
  double y_lo = 0.0, y_hi = 0.0;
  bool any = false;
  for (const Curve& c : curves) {
    for (const TraceRecord& r : c.trace.iterations) log_y = log_y && r.loss > 0.0;
  }
  auto ty = [&](double loss) { return log_y ? std::log10(loss) : loss; };
  for (const Curve& c : curves) {
    for (const TraceRecord& r : c.trace.iterations) {
      max_step = std::max(max_step, static_cast<double>(r.step));
      const double v = ty(r.loss);
      if (!std::isfinite(v)) continue;
      if (!any) {
        y_lo = y_hi = v;
        any = true;
      }
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (!(y_hi > y_lo)) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double step) { return kLeft + pw * step / max_step; };
  auto py = [&](double v) { return kTop + ph * (1.0 - (v - y_lo) / (y_hi - y_lo)); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << fmt::format(
             "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" "
             "height=\"{}\" viewBox=\"0 0 {} {}\">\n",
             kWidth, kHeight, kWidth, kHeight)
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << fmt::format(
             "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" "
             "text-anchor=\"middle\">{}</text>\n",
             kLeft + pw / 2, escape_xml(title))
      << fmt::format(
             "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
             "stroke=\"black\"/>\n",
             kLeft, kTop, pw, ph);

  for (double s : linear_ticks(0.0, max_step)) {
    const double x = px(s);
    svg << fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"middle\">{}</text>\n",
        x, kTop + ph, x, kTop + ph + 5, x, kTop + ph + 18, std::lround(s));
  }
  for (double v : linear_ticks(y_lo, y_hi)) {
    const double y = py(v);
    const std::string label =
        log_y ? fmt::format("{:.3g}", std::pow(10.0, v)) : fmt::format("{:.3g}", v);
    svg << fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\" "
        "text-anchor=\"end\">{}</text>\n",
        kLeft - 5, y, kLeft, y, kLeft - 8, y + 4, label);
  }
  svg << fmt::format(
      "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
      "text-anchor=\"middle\">step</text>\n",
      kLeft + pw / 2, kHeight - 12);
  svg << fmt::format(
      "<text x=\"16\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"12\" "
      "text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2f})\">{}</text>\n",
      kTop + ph / 2, kTop + ph / 2, log_y ? "loss (log scale)" : "loss");

  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    svg << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"",
                       color);
    bool first = true;
    for (const TraceRecord& r : curves[i].trace.iterations) {
      const double v = ty(r.loss);
      if (!std::isfinite(v)) continue;
      svg << (first ? "" : " ") << fmt::format("{:.2f},{:.2f}", px(r.step), py(v));
      first = false;
    }
    svg << "\"/>\n";
    const double ly = kTop + 16 + 18 * static_cast<double>(i);
    svg << fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
        "stroke-width=\"2\"/>\n"
        "<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" "
        "font-size=\"12\">{}</text>\n",
        kWidth - kRight + 12, ly, kWidth - kRight + 32, ly, color, kWidth - kRight + 38, ly + 4,
        escape_xml(curves[i].label));
  }
  svg << "</svg>\n";

  std::ofstream out = open_out(path);
  out << svg.str();
}

}  // namespace loi::harness
