#include "cdsal/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cdsal {

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Dark blue -> teal -> yellow.
std::string color(double t) {
  static constexpr double stops[3][3] = {{68, 1, 84}, {33, 145, 140}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  const double s = t * 2.0;
  const int k = std::min(1, static_cast<int>(s));
  const double f = s - k;
  char buf[16];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(stops[k][c] + f * (stops[k + 1][c] - stops[k][c])));
  }
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

void header(std::ostringstream& svg, int w, int h, const std::string& title) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title) << "</text>\n";
}

}  // namespace

std::string heatmap_svg(const Summary& summary, MetricId metric, const std::string& title) {
  const std::vector<std::string> models = summary.models();
  const std::vector<std::string> sequences = summary.sequences();
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const SummaryCell& c : summary.cells) {
    if (c.metric != metric || c.empty() || c.sequence == kAllSequences) continue;
    lo = std::min(lo, c.mean);
    hi = std::max(hi, c.mean);
  }
  const int cell_w = 70;
  const int cell_h = 26;
  const int left = 110;
  const int top = 90;
  const int w = left + cell_w * static_cast<int>(std::max<std::size_t>(1, sequences.size())) + 20;
  const int h = top + cell_h * static_cast<int>(std::max<std::size_t>(1, models.size())) + 30;
  std::ostringstream svg;
  header(svg, w, h, title);
  for (std::size_t j = 0; j < sequences.size(); ++j) {
    const int x = left + static_cast<int>(j) * cell_w + cell_w / 2;
    svg << "<text x=\"" << x << "\" y=\"" << top - 8 << "\" text-anchor=\"start\" transform=\"rotate(-40 "
        << x << ' ' << top - 8 << ")\">" << escape(sequences[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    const int y = top + static_cast<int>(i) * cell_h;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + cell_h / 2 + 4
        << "\" text-anchor=\"end\">" << escape(models[i]) << "</text>\n";
    for (std::size_t j = 0; j < sequences.size(); ++j) {
      const int x = left + static_cast<int>(j) * cell_w;
      const SummaryCell* c = summary.find(models[i], sequences[j], metric);
      if (c == nullptr || c->empty()) {
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\""
            << cell_h << "\" fill=\"#dddddd\" stroke=\"white\"/>\n";
        continue;
      }
      const double t = hi > lo ? (c->mean - lo) / (hi - lo) : 0.5;
      svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\""
          << cell_h << "\" fill=\"" << color(t) << "\" stroke=\"white\"/>\n"
          << "<text x=\"" << x + cell_w / 2 << "\" y=\"" << y + cell_h / 2 + 4
          << "\" text-anchor=\"middle\" fill=\"" << (t > 0.6 ? "black" : "white") << "\">"
          << fixed(c->mean) << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string bar_chart_svg(const Summary& summary, MetricId metric, const std::string& title) {
  std::vector<const SummaryCell*> bars;
  for (const std::string& m : summary.models()) {
    const SummaryCell* c = summary.find(m, kAllSequences, metric);
    if (c != nullptr && !c->empty()) bars.push_back(c);
  }
  double lo = 0.0;
  double hi = 0.0;
  for (const SummaryCell* c : bars) {
    lo = std::min(lo, c->mean - c->sem);
    hi = std::max(hi, c->mean + c->sem);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const int bar_w = 50;
  const int gap = 20;
  const int left = 60;
  const int top = 40;
  const int plot_h = 240;
  const int w = left + static_cast<int>(std::max<std::size_t>(1, bars.size())) * (bar_w + gap) + 20;
  const int h = top + plot_h + 60;
  const auto ypos = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };
  std::ostringstream svg;
  header(svg, w, h, title);
  const double zero = ypos(0.0);
  svg << "<line x1=\"" << left << "\" y1=\"" << fixed(zero, 1) << "\" x2=\"" << w - 10 << "\" y2=\""
      << fixed(zero, 1) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << left - 4 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << fixed(hi, 2)
      << "</text>\n"
      << "<text x=\"" << left - 4 << "\" y=\"" << top + plot_h << "\" text-anchor=\"end\">"
      << fixed(lo, 2) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const SummaryCell& c = *bars[i];
    const int x = left + gap / 2 + static_cast<int>(i) * (bar_w + gap);
    const double y0 = std::min(ypos(c.mean), zero);
    const double height = std::abs(ypos(c.mean) - zero);
    const int cx = x + bar_w / 2;
    svg << "<rect x=\"" << x << "\" y=\"" << fixed(y0, 1) << "\" width=\"" << bar_w << "\" height=\""
        << fixed(height, 1) << "\" fill=\"#4c78a8\"/>\n"
        << "<line x1=\"" << cx << "\" y1=\"" << fixed(ypos(c.mean + c.sem), 1) << "\" x2=\"" << cx
        << "\" y2=\"" << fixed(ypos(c.mean - c.sem), 1) << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << cx - 6 << "\" y1=\"" << fixed(ypos(c.mean + c.sem), 1) << "\" x2=\""
        << cx + 6 << "\" y2=\"" << fixed(ypos(c.mean + c.sem), 1) << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << cx - 6 << "\" y1=\"" << fixed(ypos(c.mean - c.sem), 1) << "\" x2=\""
        << cx + 6 << "\" y2=\"" << fixed(ypos(c.mean - c.sem), 1) << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 18 << "\" text-anchor=\"middle\">"
        << escape(c.model) << "</text>\n"
        << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 34 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << fixed(c.mean) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kConfig, "cannot write " + path.string());
  out << content;
}

}  // namespace cdsal
