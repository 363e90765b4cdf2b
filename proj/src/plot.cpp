#include <glob.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mcg/harness.hpp"

namespace mcg {

namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::vector<std::string> glob_paths(const std::string& pattern) {
  glob_t g{};
  std::vector<std::string> out;
  if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& y_label,
                       const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, s.mean[k] - s.stderr_[k]);
      y1 = std::max(y1, s.mean[k] + s.stderr_[k]);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = 0;
    x1 = 1;
    y0 = 0;
    y1 = 1;
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0;
    const double yv = y0 + (y1 - y0) * k / 5.0;
    svg << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
        << num(xv) << "</text>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
        << num(yv) << "</text>\n";
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << py(yv) << "\" y2=\""
        << py(yv) << "\" stroke=\"#ddd\"/>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">iteration</text>\n";
  svg << "<text transform=\"translate(16," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
    if (s.x.empty()) continue;
    svg << "<polygon class=\"band\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) svg << px(s.x[k]) << ',' << py(s.mean[k] + s.stderr_[k]) << ' ';
    for (std::size_t k = s.x.size(); k-- > 0;) svg << px(s.x[k]) << ',' << py(s.mean[k] - s.stderr_[k]) << ' ';
    svg << "\"/>\n";
    svg << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) svg << px(s.x[k]) << ',' << py(s.mean[k]) << ' ';
    svg << "\"/>\n";
    svg << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 16 + 14 * i << "\" fill=\"" << color
        << "\">" << escape(s.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> plot_metrics(const std::string& pattern, const std::string& out_dir,
                                      const std::vector<std::string>& metrics,
                                      std::ostream* warnings) {
  std::vector<MetricsTable> tables;
  for (const auto& path : glob_paths(pattern)) {
    std::ifstream in(path);
    if (!in) {
      if (warnings) *warnings << "warning: cannot read " << path << '\n';
      continue;
    }
    MetricsTable t = read_metrics_csv(in, warnings);
    if (t.column("seed") < 0 || t.column("iteration") < 0) {
      if (warnings) *warnings << "warning: " << path << " is not a per-seed metrics file, skipped\n";
      continue;
    }
    if (!tables.empty() && t.header != tables.front().header) {
      if (warnings) *warnings << "warning: " << path << " has different columns, skipped\n";
      continue;
    }
    tables.push_back(std::move(t));
  }
  std::vector<std::string> wanted = metrics;
  if (wanted.empty()) {
    if (!tables.empty()) {
      for (const auto& h : tables.front().header) {
        if (h.rfind("disc_return_a", 0) == 0) wanted.push_back(h);
      }
    }
    wanted.push_back("welfare");
  }
  const MetricsTable agg = aggregate_metrics(tables);
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> written;
  for (const auto& metric : wanted) {
    Series s;
    s.label = metric + (tables.empty() ? "" : " (" + std::to_string(tables.size()) + " seeds)");
    const int mc = agg.column(metric + "_mean");
    const int sc = agg.column(metric + "_stderr");
    if (!tables.empty() && mc < 0) {
      if (warnings) *warnings << "warning: no column " << metric << " in the metrics files\n";
      continue;
    }
    for (const auto& row : agg.rows) {
      s.x.push_back(row[0]);
      s.mean.push_back(row[mc]);
      s.stderr_.push_back(row[sc]);
    }
    const std::string path = out_dir + "/" + metric + ".svg";
    std::ofstream out(path);
    out << render_svg(metric, metric, {s});
    written.push_back(path);
  }
  return written;
}

}  // namespace mcg
