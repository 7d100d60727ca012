#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "icql/metrics.hpp"

namespace icql {

// Learning-curve aggregation across the per-seed CSVs of a run directory and
// self-contained SVG rendering (mean line plus a standard-error band). SVG is
// emitted directly so plotting needs no external toolchain; the aggregated
// series is also written as a CSV for downstream tools.

struct SeriesPoint {
  long episode = 0;
  double mean = 0;
  double std_err = 0;
};

struct AggregatedMetrics {
  std::string name;                 // directory stem
  std::vector<SeriesPoint> train;   // per-episode training return
  std::vector<SeriesPoint> test;    // eval rows only
  int n_seeds = 0;
};

namespace detail {

inline std::vector<std::string> list_seed_csvs(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("metrics_seed", 0) == 0 && entry.path().extension() == ".csv")
      files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace detail

inline AggregatedMetrics aggregate_run_dir(const std::string& dir,
                                           std::ostream& warnings = std::cerr) {
  const auto files = detail::list_seed_csvs(dir);
  if (files.empty()) throw std::runtime_error("no metrics_seed*.csv files in '" + dir + "'");
  std::vector<std::vector<MetricsRow>> per_seed;
  per_seed.reserve(files.size());
  for (const auto& f : files) per_seed.push_back(read_metrics_csv(f));

  size_t min_rows = per_seed[0].size();
  size_t max_rows = min_rows;
  for (const auto& rows : per_seed) {
    min_rows = std::min(min_rows, rows.size());
    max_rows = std::max(max_rows, rows.size());
  }
  if (min_rows != max_rows)
    warnings << "warning: seed CSVs in '" << dir << "' disagree on length (" << min_rows
             << " vs " << max_rows << "); truncating to the shortest\n";

  AggregatedMetrics agg;
  agg.name = std::filesystem::path(dir).filename().string();
  if (agg.name.empty()) agg.name = dir;
  agg.n_seeds = static_cast<int>(per_seed.size());
  for (size_t i = 0; i < min_rows; ++i) {
    RunningStat train;
    RunningStat test;
    bool has_eval = true;
    for (const auto& rows : per_seed) {
      train.add(rows[i].train_return);
      if (rows[i].eval_mean)
        test.add(*rows[i].eval_mean);
      else
        has_eval = false;
    }
    agg.train.push_back({per_seed[0][i].episode, train.mean(), train.std_err()});
    if (has_eval && test.count() > 0)
      agg.test.push_back({per_seed[0][i].episode, test.mean(), test.std_err()});
  }
  return agg;
}

inline void write_aggregate_csv(const AggregatedMetrics& agg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "series,episode,mean,stderr\n";
  for (const auto& p : agg.train)
    out << "train," << p.episode << ',' << detail::csv_double(p.mean) << ','
        << detail::csv_double(p.std_err) << "\n";
  for (const auto& p : agg.test)
    out << "test," << p.episode << ',' << detail::csv_double(p.mean) << ','
        << detail::csv_double(p.std_err) << "\n";
}

// ---- SVG ---------------------------------------------------------------------

namespace detail {

struct SvgFrame {
  double width = 860, height = 460;
  double left = 70, right = 30, top = 40, bottom = 55;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

  double px(double x) const {
    return left + (x - x_min) / std::max(1e-12, x_max - x_min) * (width - left - right);
  }
  double py(double y) const {
    return height - bottom -
           (y - y_min) / std::max(1e-12, y_max - y_min) * (height - top - bottom);
  }
};

inline std::string svg_polyline(const std::vector<std::pair<double, double>>& pts,
                                const SvgFrame& f, const std::string& color, double width) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
                  std::to_string(width) + "\" points=\"";
  char buf[64];
  for (const auto& [x, y] : pts) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", f.px(x), f.py(y));
    s += buf;
  }
  s += "\"/>\n";
  return s;
}

inline std::string svg_band(const std::vector<SeriesPoint>& pts, const SvgFrame& f,
                            const std::string& color) {
  std::string s = "<polygon fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
  char buf[64];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", f.px(static_cast<double>(p.episode)),
                  f.py(p.mean + p.std_err));
    s += buf;
  }
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", f.px(static_cast<double>(it->episode)),
                  f.py(it->mean - it->std_err));
    s += buf;
  }
  s += "\"/>\n";
  return s;
}

inline std::vector<SeriesPoint> decimate(const std::vector<SeriesPoint>& pts, size_t max_points) {
  if (pts.size() <= max_points) return pts;
  std::vector<SeriesPoint> out;
  const size_t stride = (pts.size() + max_points - 1) / max_points;
  for (size_t i = 0; i < pts.size(); i += stride) out.push_back(pts[i]);
  if (out.back().episode != pts.back().episode) out.push_back(pts.back());
  return out;
}

inline std::string format_tick(double v) {
  char buf[32];
  if (std::abs(v - std::round(v)) < 1e-9)
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

// One figure with a mean line and +-stderr band per group.
inline void write_svg_figure(const std::string& path, const std::string& title,
                             const std::vector<AggregatedMetrics>& groups, bool test_series) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b"};
  detail::SvgFrame f;
  bool any = false;
  for (const auto& g : groups) {
    const auto& series = test_series ? g.test : g.train;
    for (const auto& p : series) {
      if (!any) {
        f.x_min = f.x_max = static_cast<double>(p.episode);
        f.y_min = p.mean - p.std_err;
        f.y_max = p.mean + p.std_err;
        any = true;
      }
      f.x_min = std::min(f.x_min, static_cast<double>(p.episode));
      f.x_max = std::max(f.x_max, static_cast<double>(p.episode));
      f.y_min = std::min(f.y_min, p.mean - p.std_err);
      f.y_max = std::max(f.y_max, p.mean + p.std_err);
    }
  }
  if (!any) {
    f.x_max = 1;
    f.y_max = 1;
  }
  const double pad = 0.05 * std::max(1e-12, f.y_max - f.y_min);
  f.y_min -= pad;
  f.y_max += pad;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
      << f.height << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";

  // axes + ticks
  out << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\""
      << f.width - f.right << "\" y2=\"" << f.height - f.bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
      << f.height - f.bottom << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double x = f.x_min + (f.x_max - f.x_min) * i / 5.0;
    const double y = f.y_min + (f.y_max - f.y_min) * i / 5.0;
    out << "<line x1=\"" << f.px(x) << "\" y1=\"" << f.height - f.bottom << "\" x2=\""
        << f.px(x) << "\" y2=\"" << f.height - f.bottom + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << f.px(x) << "\" y=\"" << f.height - f.bottom + 20
        << "\" text-anchor=\"middle\">" << detail::format_tick(x) << "</text>\n";
    out << "<line x1=\"" << f.left - 5 << "\" y1=\"" << f.py(y) << "\" x2=\"" << f.left
        << "\" y2=\"" << f.py(y) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << f.left - 9 << "\" y=\"" << f.py(y) + 4
        << "\" text-anchor=\"end\">" << detail::format_tick(y) << "</text>\n";
  }
  out << "<text x=\"" << (f.left + f.width - f.right) / 2 << "\" y=\"" << f.height - 12
      << "\" text-anchor=\"middle\">episodes</text>\n";
  out << "<text x=\"18\" y=\"" << (f.top + f.height - f.bottom) / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (f.top + f.height - f.bottom) / 2 << ")\">return</text>\n";

  int ci = 0;
  double legend_y = f.top + 8;
  for (const auto& g : groups) {
    const std::string color = kColors[ci % 6];
    auto series = detail::decimate(test_series ? g.test : g.train, 1500);
    if (!series.empty()) {
      out << detail::svg_band(series, f, color);
      std::vector<std::pair<double, double>> line;
      line.reserve(series.size());
      for (const auto& p : series) line.push_back({static_cast<double>(p.episode), p.mean});
      out << detail::svg_polyline(line, f, color, 1.6);
    }
    out << "<rect x=\"" << f.width - f.right - 170 << "\" y=\"" << legend_y - 9
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << f.width - f.right - 152 << "\" y=\"" << legend_y + 2 << "\">"
        << g.name << " (" << g.n_seeds << " seeds)</text>\n";
    legend_y += 18;
    ++ci;
  }
  out << "</svg>\n";
}

// Aggregates each run directory, writes its aggregate.csv plus the two
// figures, and when several directories are given an overlay comparison.
inline void plot_metrics(const std::vector<std::string>& dirs, const std::string& out_dir,
                         std::ostream& warnings = std::cerr) {
  std::filesystem::create_directories(out_dir);
  std::vector<AggregatedMetrics> groups;
  for (const auto& dir : dirs) {
    AggregatedMetrics agg = aggregate_run_dir(dir, warnings);
    write_aggregate_csv(agg, out_dir + "/aggregate_" + agg.name + ".csv");
    write_svg_figure(out_dir + "/train_return_" + agg.name + ".svg",
                     "training return: " + agg.name, {agg}, false);
    write_svg_figure(out_dir + "/test_return_" + agg.name + ".svg",
                     "test return: " + agg.name, {agg}, true);
    groups.push_back(std::move(agg));
  }
  if (groups.size() > 1) {
    write_svg_figure(out_dir + "/train_return_compare.svg", "training return", groups, false);
    write_svg_figure(out_dir + "/test_return_compare.svg", "test return", groups, true);
  }
}

}  // namespace icql
