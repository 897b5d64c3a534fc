#include "tfa/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "tfa/common.hpp"
#include "tfa/metrics.hpp"

namespace tfa {

using nlohmann::json;

namespace {

constexpr int kWidth = 640, kHeight = 400;
constexpr int kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool first = true;
  for (const PlotSeries& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x_lo = x_hi = s.x[i];
        y_lo = y_hi = s.y[i];
        first = false;
      }
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double x) {
    return kMarginL + (x - x_lo) / (x_hi - x_lo) * (kWidth - kMarginL - kMarginR);
  };
  auto py = [&](double y) {
    return kHeight - kMarginB - (y - y_lo) / (y_hi - y_lo) * (kHeight - kMarginT - kMarginB);
  };

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("plots: cannot write " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\" "
     << "font-family=\"sans-serif\">" << title << "</text>\n";

  // Axes and ticks.
  os << "<line x1=\"" << kMarginL << "\" y1=\"" << kHeight - kMarginB << "\" x2=\""
     << kWidth - kMarginR << "\" y2=\"" << kHeight - kMarginB << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL << "\" y2=\""
     << kHeight - kMarginB << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_lo + (x_hi - x_lo) * i / 5.0;
    const double yv = y_lo + (y_hi - y_lo) * i / 5.0;
    os << "<line x1=\"" << px(xv) << "\" y1=\"" << kHeight - kMarginB << "\" x2=\"" << px(xv)
       << "\" y2=\"" << kHeight - kMarginB + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px(xv) << "\" y=\"" << kHeight - kMarginB + 18
       << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(xv)
       << "</text>\n";
    os << "<line x1=\"" << kMarginL - 5 << "\" y1=\"" << py(yv) << "\" x2=\"" << kMarginL
       << "\" y2=\"" << py(yv) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << kMarginL - 8 << "\" y=\"" << py(yv) + 4
       << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">" << fmt(yv)
       << "</text>\n";
  }
  os << "<text x=\"" << (kMarginL + kWidth - kMarginR) / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << (kMarginT + kHeight - kMarginB) / 2
     << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
     << "transform=\"rotate(-90 16 " << (kMarginT + kHeight - kMarginB) / 2 << ")\">" << y_label
     << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = kColors[si % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    }
    os << "\"/>\n";
    for (size_t i = 0; i < s.x.size(); ++i) {
      os << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"2.4\" fill=\""
         << color << "\"/>\n";
    }
    os << "<text x=\"" << kWidth - kMarginR - 6 << "\" y=\"" << kMarginT + 16 * (si + 1)
       << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\"" << color
       << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
}

namespace {

int plot_metrics_file(const std::filesystem::path& file, const std::filesystem::path& out_dir) {
  const std::vector<MetricsRecord> recs = read_metrics(file);
  if (recs.empty()) return 0;

  // One chart per metric family present in the file.
  std::vector<std::string> names;
  for (const auto& [k, v] : recs.front().values) names.push_back(k);

  std::vector<PlotSeries> series;
  for (const std::string& name : names) {
    PlotSeries s;
    s.label = name;
    for (const MetricsRecord& r : recs) {
      double v = 0.0;
      try {
        v = r.value(name);
      } catch (const Error&) {
        continue;
      }
      if (!std::isfinite(v) || v < 0.0) continue;  // probe metrics start at -1
      s.x.push_back(r.step);
      s.y.push_back(v);
    }
    if (s.x.size() >= 2) series.push_back(std::move(s));
  }
  if (series.empty()) return 0;
  write_svg_chart(out_dir / (file.stem().string() + ".svg"), file.stem().string(), "step", "value",
                  series);
  return 1;
}

int plot_report_file(const std::filesystem::path& file, const std::filesystem::path& out_dir) {
  std::ifstream is(file);
  if (!is) return 0;
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception&) {
    return 0;
  }
  const std::string kind = j.value("kind", "");
  if (kind == "data_efficiency") {
    PlotSeries tac{"tactile", {}, {}}, pro{"proprio-only", {}, {}};
    for (const json& p : j.at("points")) {
      tac.x.push_back(p.at("budget").get<double>());
      tac.y.push_back(p.at("tactile").get<double>());
      pro.x.push_back(p.at("budget").get<double>());
      pro.y.push_back(p.at("proprio").get<double>());
    }
    write_svg_chart(out_dir / (file.stem().string() + ".svg"), "success rate vs demo budget",
                    "demonstrations", "success rate", {tac, pro});
    return 1;
  }
  if (kind == "cross_sensor") {
    PlotSeries a{"adapter", {0, 1}, {j.at("adapter").at("rmse_seen").get<double>(),
                                     j.at("adapter").at("rmse_unseen").get<double>()}};
    PlotSeries r{"force regression", {0, 1}, {j.at("regression").at("rmse_seen").get<double>(),
                                              j.at("regression").at("rmse_unseen").get<double>()}};
    write_svg_chart(out_dir / (file.stem().string() + ".svg"),
                    "wrench error, seen (0) vs unseen (1) sensor", "seen / unseen",
                    "normalized RMSE", {a, r});
    return 1;
  }
  return 0;
}

}  // namespace

int emit_plots(const std::filesystem::path& reports_dir, const std::filesystem::path& out_dir) {
  if (!std::filesystem::exists(reports_dir)) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(reports_dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  int written = 0;
  for (const auto& file : files) {
    if (file.extension() == ".jsonl") {
      written += plot_metrics_file(file, out_dir);
    } else if (file.extension() == ".json") {
      written += plot_report_file(file, out_dir);
    }
  }
  return written;
}

}  // namespace tfa
