#include "ganscope/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ganscope::report {
namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Smallest 1, 2 or 5 times a power of ten that is >= v.
double nice_ceiling(double v) {
  if (v <= 0.0) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= v) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string histogram_csv(const stats::HistogramReport& rep) {
  std::string out = "class,true_mean,gen_mean,clipped\n";
  for (const auto& e : rep.entries) {
    out += e.name + "," + fixed(e.true_mean, 4) + "," + fixed(e.gen_mean, 4) + "," +
           (e.clipped ? "1" : "0") + "\n";
  }
  return out;
}

std::string histogram_svg(const stats::HistogramReport& rep, const std::string& title) {
  const int bar = 14, gap = 4, group = 2 * bar + gap + 12;
  const int left = 60, top = 40, plot_h = 220, bottom = 90;
  const int n = static_cast<int>(rep.entries.size());
  const int width = left + std::max(1, n) * group + 20;
  const int height = top + plot_h + bottom;

  double peak = 0.0;
  for (const auto& e : rep.entries) peak = std::max({peak, e.true_mean, e.gen_mean});
  const bool clip = rep.clip_ceiling > 0.0 && peak > rep.clip_ceiling;
  const double ymax = nice_ceiling(clip ? rep.clip_ceiling : peak);
  auto y_of = [&](double v) { return top + plot_h - plot_h * std::min(v, ymax) / ymax; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  s << "<rect x=\"" << width - 190 << "\" y=\"10\" width=\"10\" height=\"10\" fill=\"#4c72b0\"/>"
    << "<text x=\"" << width - 175 << "\" y=\"19\">truth</text>\n";
  s << "<rect x=\"" << width - 120 << "\" y=\"10\" width=\"10\" height=\"10\" fill=\"#dd8452\"/>"
    << "<text x=\"" << width - 105 << "\" y=\"19\">generated</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = ymax * t / 4;
    const double y = y_of(v);
    s << "<line x1=\"" << left << "\" x2=\"" << width - 20 << "\" y1=\"" << fixed(y, 1) << "\" y2=\""
      << fixed(y, 1) << "\" stroke=\"#dddddd\"/>"
      << "<text x=\"" << left - 6 << "\" y=\"" << fixed(y + 4, 1) << "\" text-anchor=\"end\">"
      << fixed(v, 0) << "</text>\n";
  }
  s << "<text x=\"14\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 14 " << top + plot_h / 2
    << ")\" text-anchor=\"middle\">mean pixels per image</text>\n";
  for (int i = 0; i < n; ++i) {
    const auto& e = rep.entries[i];
    const int x0 = left + i * group + 6;
    const double vals[2] = {e.true_mean, e.gen_mean};
    const char* fills[2] = {"#4c72b0", "#dd8452"};
    for (int b = 0; b < 2; ++b) {
      const int x = x0 + b * (bar + gap);
      const double y = y_of(vals[b]);
      s << "<rect x=\"" << x << "\" y=\"" << fixed(y, 1) << "\" width=\"" << bar << "\" height=\""
        << fixed(top + plot_h - y, 1) << "\" fill=\"" << fills[b] << "\"/>\n";
      if (vals[b] > ymax) {
        s << "<text x=\"" << x + bar / 2 << "\" y=\"" << fixed(y - 4, 1)
          << "\" text-anchor=\"middle\" font-size=\"9\">" << fixed(vals[b], 0) << "</text>\n";
      }
    }
    const int cx = x0 + bar + gap / 2;
    s << "<text x=\"" << cx << "\" y=\"" << top + plot_h + 12 << "\" transform=\"rotate(45 " << cx << " "
      << top + plot_h + 12 << ")\">" << escape_xml(e.name) << (e.dropped ? " (dropped)" : "")
      << "</text>\n";
  }
  s << "<line x1=\"" << left << "\" x2=\"" << width - 20 << "\" y1=\"" << top + plot_h << "\" y2=\""
    << top + plot_h << "\" stroke=\"black\"/>\n";
  s << "</svg>\n";
  return s.str();
}

std::string fsd_table_markdown(const std::vector<FsdRow>& rows) {
  std::string out = "| model | FSD | noise floor |\n|---|---:|---:|\n";
  for (const auto& r : rows) {
    out += "| " + r.label + " | " + fixed(r.fsd, 1) + " | " +
           (r.noise_floor < 0.0 ? std::string("n/a") : fixed(r.noise_floor, 1)) + " |\n";
  }
  return out;
}

Tensor tile(const std::vector<Tensor>& images, int columns, int pad) {
  if (images.empty()) throw std::invalid_argument("nothing to tile");
  if (columns < 1 || pad < 0) throw std::invalid_argument("bad grid layout");
  const Shape& s = images.front().shape();
  if (s.size() != 3 || s[0] != 3) throw ShapeError("tile expects [3,H,W] images, got " + to_string(s));
  for (const auto& im : images) {
    if (im.shape() != s) throw ShapeError("tiled images differ in shape");
  }
  const int n = static_cast<int>(images.size());
  const int cols = std::min(columns, n), rows = (n + cols - 1) / cols;
  const int h = s[1], w = s[2];
  const int H = rows * h + (rows + 1) * pad, W = cols * w + (cols + 1) * pad;
  Tensor out(Shape{3, H, W}, 1.0f);
  for (int k = 0; k < n; ++k) {
    const int oy = pad + (k / cols) * (h + pad), ox = pad + (k % cols) * (w + pad);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out[(static_cast<std::size_t>(c) * H + oy + y) * W + ox + x] =
              images[k][(static_cast<std::size_t>(c) * h + y) * w + x];
        }
      }
    }
  }
  return out;
}

Tensor pair_block(const Tensor& input, const Tensor& reconstruction, const Tensor& input_seg,
                  const Tensor& reconstruction_seg) {
  return tile({input, reconstruction, input_seg, reconstruction_seg}, 2, 1);
}

}  // namespace ganscope::report
