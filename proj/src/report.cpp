#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "rlattack/bytes.hpp"
#include "rlattack/harness.hpp"
#include "rlattack/meta.hpp"

namespace rlattack {

namespace fs = std::filesystem;

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // sorted by x
};

std::string xml_escape(const std::string& s) {
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

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// Minimal line plot; reference lines are drawn dashed across the full width.
std::string svg_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                     const std::vector<Series>& series, const std::vector<std::pair<std::string, double>>& hlines) {
  constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 60;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  auto extend = [&](double x, double y) {
    if (first) {
      xmin = xmax = x;
      ymin = ymax = y;
      first = false;
    }
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (const Series& s : series)
    for (auto [x, y] : s.points) extend(x, y);
  for (const auto& h : hlines) {
    ymin = std::min(ymin, h.second);
    ymax = std::max(ymax, h.second);
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << " " << H << "\">\n";
  o << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
    << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4, yv = ymin + (ymax - ymin) * i / 4;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
      << num(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << num(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\" font-size=\"13\">"
    << xml_escape(xlabel) << "</text>\n";
  o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
    << (T + H - B) / 2 << ")\">" << xml_escape(ylabel) << "</text>\n";

  int legend = 0;
  auto legend_entry = [&](const std::string& label, const std::string& color, bool dashed) {
    const double y = T + 14 + 18 * legend++;
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << y << "\" x2=\"" << W - R + 30 << "\" y2=\"" << y
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
    o << "<text x=\"" << W - R + 36 << "\" y=\"" << y + 4 << "\" font-size=\"11\">" << xml_escape(label)
      << "</text>\n";
  };
  for (std::size_t i = 0; i < hlines.size(); ++i) {
    const std::string color = colors[(series.size() + i) % 6];
    o << "<line x1=\"" << L << "\" y1=\"" << py(hlines[i].second) << "\" x2=\"" << W - R << "\" y2=\""
      << py(hlines[i].second) << "\" stroke=\"" << color << "\" stroke-dasharray=\"5,3\"/>\n";
    legend_entry(hlines[i].first, color, true);
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::string color = colors[i % 6];
    std::ostringstream pts;
    for (auto [x, y] : series[i].points) pts << px(x) << "," << py(y) << " ";
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    for (auto [x, y] : series[i].points)
      o << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    legend_entry(series[i].label, color, false);
  }
  o << "</svg>\n";
  return o.str();
}

std::size_t column(const CsvTable& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  return static_cast<std::size_t>(it - t.header.begin());
}

double field(const CsvTable& t, const std::vector<std::string>& row, std::size_t col, const std::string& source,
             std::size_t row_index) {
  try {
    return parse_double(row[col]);
  } catch (const std::exception&) {
    throw std::runtime_error(source + ":" + std::to_string(row_index + 2) + ": bad number '" + row[col] + "' in " +
                             t.header[col]);
  }
}

struct Mean {
  double sum = 0;
  int n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  double value() const { return n ? sum / n : 0.0; }
};

void report_timed(const CsvTable& t, const std::string& source, const std::string& label,
                  const std::string& stem, std::ostream& text, std::vector<std::pair<std::string, std::string>>& svgs) {
  struct Group {
    Mean rate, ret;
  };
  std::map<double, Group> betas;
  Group clean, uniform;
  const std::size_t cb = column(t, "beta"), cr = column(t, "attack_rate"), cret = column(t, "return");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    Group* g;
    if (row[cb] == "inf") g = &clean;
    else if (row[cb] == "uniform") g = &uniform;
    else g = &betas[field(t, row, cb, source, i)];
    g->rate.add(field(t, row, cr, source, i));
    g->ret.add(field(t, row, cret, source, i));
  }
  text << "timed attack: " << label << "\n";
  text << "  clean return " << format_double(clean.ret.value()) << " (" << clean.ret.n << " episodes)\n";
  text << "  uniform attack: rate " << format_double(uniform.rate.value()) << ", return "
       << format_double(uniform.ret.value()) << "\n";
  text << "  beta, mean attack rate, mean return, episodes\n";
  Series s{"strategically-timed", {}};
  for (const auto& [beta, g] : betas) {
    text << "  " << format_double(beta) << ", " << format_double(g.rate.value()) << ", "
         << format_double(g.ret.value()) << ", " << g.ret.n << "\n";
    s.points.emplace_back(g.rate.value(), g.ret.value());
  }
  std::sort(s.points.begin(), s.points.end());
  std::vector<std::pair<std::string, double>> refs;
  if (clean.ret.n) refs.emplace_back("no attack", clean.ret.value());
  if (uniform.ret.n) refs.emplace_back("uniform (rate 1)", uniform.ret.value());
  svgs.emplace_back(stem + ".svg", svg_plot("Return vs attack rate", "attack rate", "mean return", {s}, refs));
}

void report_enchant(const CsvTable& t, const std::string& source, const std::string& label,
                    const std::string& stem, std::ostream& text, std::vector<std::pair<std::string, std::string>>& svgs) {
  std::map<std::string, std::map<int, Mean>> by;
  const std::size_t ch = column(t, "H"), cs = column(t, "success"), cp = column(t, "predictor");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    by[row[cp]][static_cast<int>(field(t, row, ch, source, i))].add(field(t, row, cs, source, i));
  }
  text << "enchanting attack: " << label << "\n";
  std::vector<Series> series;
  for (const auto& [pred, hs] : by) {
    Series s{pred, {}};
    Mean pooled;
    text << "  predictor " << pred << ": H, success rate, trials\n";
    for (const auto& [h, m] : hs) {
      text << "    " << h << ", " << format_double(m.value()) << ", " << m.n << "\n";
      s.points.emplace_back(h, m.value());
      pooled.sum += m.sum;
      pooled.n += m.n;
    }
    text << "    pooled " << format_double(pooled.value()) << " over " << pooled.n << " trials\n";
    series.push_back(std::move(s));
  }
  svgs.emplace_back(stem + ".svg", svg_plot("Success rate vs horizon", "H", "success rate", series, {}));
}

}  // namespace

void cmd_report(const std::vector<fs::path>& csvs, const fs::path& out_dir, std::ostream& log) {
  Manifest m;
  m.command = "report";
  std::string joined;
  for (const fs::path& p : csvs) joined += p.filename().string() + "\n";
  m.config_sha256 = sha256_hex(joined);
  fs::create_directories(out_dir);
  auto record = [&](const std::string& rel, const std::string& bytes) {
    write_file(out_dir / rel, bytes);
    m.files.push_back({rel, sha256_hex(bytes), bytes.size()});
  };
  try {
    std::ostringstream text;
    std::vector<std::pair<std::string, std::string>> svgs;
    for (const fs::path& p : csvs) {
      const std::string source = p.string();
      std::string body;
      try {
        body = read_file(p);
      } catch (const std::exception&) {
        throw std::runtime_error("cannot read " + source);
      }
      const CsvTable t = parse_csv(body, source);
      if (t.rows.empty()) throw std::runtime_error(source + ": no data rows");
      const std::string stem = p.stem().string();
      if (t.header == kTimedColumns) report_timed(t, source, p.filename().string(), stem, text, svgs);
      else if (t.header == kEnchantColumns) report_enchant(t, source, p.filename().string(), stem, text, svgs);
      else throw std::runtime_error(source + ":1: unrecognised header");
      text << "\n";
    }
    record("report.txt", text.str());
    for (const auto& [name, svg] : svgs) record(name, svg);
    log << text.str();
  } catch (const std::exception& e) {
    m.valid = false;
    m.error = e.what();
    write_manifest(m, out_dir);
    throw;
  }
  write_manifest(m, out_dir);
}

}  // namespace rlattack
