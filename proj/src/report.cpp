#include "samkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "samkit/errors.hpp"
#include "samkit/util.hpp"

namespace samkit {

namespace {

constexpr const char* kResemblanceHeader =
    "Synthetic Data,BERTScore F1,Std,PCC for Length,MAE,PCC for Assignment Marks,MAE";
constexpr const char* kDescriptionGroup = "Synthetic assignment descriptions";
constexpr const char* kSubmissionGroup = "Synthetic student submissions";

std::string csv_safe(std::string label) {
  std::replace(label.begin(), label.end(), ',', ';');
  return label;
}

void append_row(std::string& out, const ResemblanceRow& row) {
  out += csv_safe(row.label);
  out += ',' + format_fixed(row.f1.mean_f1, 3);
  out += ',' + format_fixed(row.f1.std_f1, 3);
  out += ',' + format_fixed(row.length_pcc, 3);
  out += ',' + format_fixed(row.length_mae, 2);
  out += ',';
  if (row.marks_pcc) out += format_fixed(*row.marks_pcc, 3);
  out += ',';
  if (row.marks_mae) out += format_fixed(*row.marks_mae, 2);
  out += '\n';
}

// Kernel density estimate on a fixed grid; Silverman bandwidth with a floor
// so constant series still render as a narrow ridge.
std::vector<double> kde(const std::vector<double>& values, const std::vector<double>& grid) {
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(values.size()));
  double h = 0.9 * sd * std::pow(static_cast<double>(values.size()), -0.2);
  if (h <= 0.0) h = std::max(1e-6, 0.01 * (std::fabs(mean) + 1.0));
  const double norm = 1.0 / (h * std::sqrt(2.0 * 3.14159265358979323846));
  std::vector<double> density(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (double v : values) {
      double z = (grid[g] - v) / h;
      sum += std::exp(-0.5 * z * z);
    }
    density[g] = norm * sum / static_cast<double>(values.size());
  }
  return density;
}

std::string num(double v) { return format_fixed(v, 2); }

const char* kPalette[] = {"#4C78A8", "#F58518", "#54A24B", "#B279A2"};

std::string axis_tick_label(double value, double range) {
  return format_fixed(value, range < 10.0 ? 2 : (range < 100.0 ? 1 : 0));
}

}  // namespace

std::string render_resemblance_csv(const std::vector<ResemblanceRow>& description_rows,
                                   const std::vector<ResemblanceRow>& submission_rows) {
  std::string out = std::string(kResemblanceHeader) + '\n';
  out += std::string(kDescriptionGroup) + ",,,,,,\n";
  for (const auto& row : description_rows) append_row(out, row);
  out += std::string(kSubmissionGroup) + ",,,,,,\n";
  for (const auto& row : submission_rows) append_row(out, row);
  return out;
}

std::string render_ablation_csv(const std::vector<AblationCell>& cells) {
  std::string out = "method,prompt_protection,gate_protection,n,rate\n";
  for (const auto& cell : cells) {
    out += std::string(method_name(cell.method));
    out += cell.prompt_protection ? ",yes" : ",no";
    out += cell.gate_protection ? ",yes" : ",no";
    out += ',' + std::to_string(cell.published);
    out += ',' + format_fixed(cell.rate, 4);
    out += '\n';
  }
  return out;
}

std::string render_best_flags_json(const std::vector<ResemblanceRow>& description_rows,
                                   const std::vector<ResemblanceRow>& submission_rows) {
  auto best = [](const std::vector<ResemblanceRow>& rows, auto getter, bool maximize)
      -> std::optional<std::string> {
    std::optional<std::string> label;
    std::optional<double> value;
    for (const auto& row : rows) {
      std::optional<double> v = getter(row);
      if (!v) continue;
      if (!value || (maximize ? *v > *value : *v < *value)) {
        value = *v;
        label = row.label;
      }
    }
    return label;
  };
  auto group = [&](const std::vector<ResemblanceRow>& rows, bool with_marks) {
    nlohmann::json flags = nlohmann::json::object();
    auto put = [&](const char* column, auto getter, bool maximize) {
      if (auto label = best(rows, getter, maximize)) flags[column] = *label;
    };
    put("BERTScore F1", [](const ResemblanceRow& r) { return std::optional<double>(r.f1.mean_f1); },
        true);
    put("PCC for Length", [](const ResemblanceRow& r) { return std::optional<double>(r.length_pcc); },
        true);
    put("MAE for Length", [](const ResemblanceRow& r) { return std::optional<double>(r.length_mae); },
        false);
    if (with_marks) {
      put("PCC for Assignment Marks", [](const ResemblanceRow& r) { return r.marks_pcc; }, true);
      put("MAE for Assignment Marks", [](const ResemblanceRow& r) { return r.marks_mae; }, false);
    }
    return flags;
  };
  nlohmann::json out{{"descriptions", group(description_rows, false)},
                     {"submissions", group(submission_rows, true)}};
  return out.dump(2) + "\n";
}

std::string render_violin_svg(const std::string& title, const std::string& y_label,
                              const std::vector<PlotSeries>& series) {
  if (series.empty()) throw EmptyInput("violin plot needs at least one series");
  for (const auto& s : series)
    if (s.values.empty()) throw EmptyInput("violin series '" + s.label + "' is empty");

  double lo = series[0].values[0], hi = lo;
  for (const auto& s : series)
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  double pad = (hi - lo) * 0.08;
  if (pad <= 0.0) pad = std::max(1.0, std::fabs(hi) * 0.1);
  lo -= pad;
  hi += pad;

  const double width = 640.0, height = 400.0;
  const double left = 70.0, right = 20.0, top = 48.0, bottom = 52.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto y_px = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

  const int grid_points = 64;
  std::vector<double> grid(grid_points);
  for (int g = 0; g < grid_points; ++g)
    grid[g] = lo + (hi - lo) * static_cast<double>(g) / (grid_points - 1);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  svg << "<rect width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";
  svg << "<text x=\"16\" y=\"" << num(top + plot_h / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 "
      << num(top + plot_h / 2) << ")\">" << y_label << "</text>\n";

  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"#333333\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    double v = lo + (hi - lo) * t / 4.0;
    double y = y_px(v);
    svg << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(y) << "\" stroke=\"#333333\"/>\n";
    svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << axis_tick_label(v, hi - lo) << "</text>\n";
  }

  const double slot = plot_w / static_cast<double>(series.size());
  const double half_max = slot * 0.38;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    std::vector<double> density = kde(s.values, grid);
    double peak = *std::max_element(density.begin(), density.end());
    if (peak <= 0.0) peak = 1.0;
    double cx = left + slot * (static_cast<double>(i) + 0.5);
    std::ostringstream points;
    for (int g = 0; g < grid_points; ++g)
      points << num(cx + density[g] / peak * half_max) << ',' << num(y_px(grid[g])) << ' ';
    for (int g = grid_points - 1; g >= 0; --g)
      points << num(cx - density[g] / peak * half_max) << ',' << num(y_px(grid[g])) << ' ';
    const char* color = kPalette[i % 4];
    svg << "<polygon points=\"" << points.str() << "\" fill=\"" << color
        << "\" fill-opacity=\"0.55\" stroke=\"" << color << "\"/>\n";
    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= static_cast<double>(s.values.size());
    svg << "<line x1=\"" << num(cx - half_max) << "\" y1=\"" << num(y_px(mean)) << "\" x2=\""
        << num(cx + half_max) << "\" y2=\"" << num(y_px(mean))
        << "\" stroke=\"#222222\" stroke-dasharray=\"3 2\"/>\n";
    svg << "<text x=\"" << num(cx) << "\" y=\"" << num(height - 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_series_sidecar_json(const std::vector<PlotSeries>& series) {
  nlohmann::json out;
  out["series"] = nlohmann::json::array();
  for (const auto& s : series) {
    out["series"].push_back(
        {{"label", s.label}, {"n", s.values.size()}, {"values", s.values}});
  }
  return out.dump(2) + "\n";
}

std::string render_aspect_bar_svg(const std::string& title, const std::vector<AspectBar>& bars) {
  if (bars.empty()) throw EmptyInput("aspect chart needs at least one bar");
  std::vector<std::string> aspects;
  std::vector<std::string> cohorts;
  for (const auto& bar : bars) {
    if (std::find(aspects.begin(), aspects.end(), bar.aspect) == aspects.end())
      aspects.push_back(bar.aspect);
    if (std::find(cohorts.begin(), cohorts.end(), bar.cohort) == cohorts.end())
      cohorts.push_back(bar.cohort);
  }

  double hi = 1.0;
  for (const auto& bar : bars) hi = std::max(hi, bar.mean + bar.std_dev);
  hi *= 1.05;

  const double width = 640.0, height = 400.0;
  const double left = 60.0, right = 20.0, top = 48.0, bottom = 64.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto y_px = [&](double v) { return top + (hi - v) / hi * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\""
      << num(height) << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\">\n";
  svg << "<rect width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<text x=\"" << num(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";
  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"#333333\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    double v = hi * t / 4.0;
    svg << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(y_px(v)) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(y_px(v)) << "\" stroke=\"#333333\"/>\n";
    svg << "<text x=\"" << num(left - 8) << "\" y=\"" << num(y_px(v) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_fixed(v, 2) << "</text>\n";
  }

  const double group_w = plot_w / static_cast<double>(aspects.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(cohorts.size());
  for (const auto& bar : bars) {
    auto aspect_at = std::find(aspects.begin(), aspects.end(), bar.aspect) - aspects.begin();
    auto cohort_at = std::find(cohorts.begin(), cohorts.end(), bar.cohort) - cohorts.begin();
    double gx = left + group_w * static_cast<double>(aspect_at) + group_w * 0.1;
    double x = gx + bar_w * static_cast<double>(cohort_at);
    double y = y_px(bar.mean);
    const char* color = kPalette[cohort_at % 4];
    svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w * 0.92)
        << "\" height=\"" << num(top + plot_h - y) << "\" fill=\"" << color << "\"/>\n";
    double ex = x + bar_w * 0.46;
    svg << "<line x1=\"" << num(ex) << "\" y1=\"" << num(y_px(std::max(0.0, bar.mean - bar.std_dev)))
        << "\" x2=\"" << num(ex) << "\" y2=\"" << num(y_px(std::min(hi, bar.mean + bar.std_dev)))
        << "\" stroke=\"#222222\"/>\n";
  }
  for (std::size_t a = 0; a < aspects.size(); ++a) {
    double cx = left + group_w * (static_cast<double>(a) + 0.5);
    svg << "<text x=\"" << num(cx) << "\" y=\"" << num(height - 36)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << aspects[a]
        << "</text>\n";
  }
  for (std::size_t c = 0; c < cohorts.size(); ++c) {
    double lx = left + 12.0 + 120.0 * static_cast<double>(c);
    svg << "<rect x=\"" << num(lx) << "\" y=\"" << num(height - 24) << "\" width=\"12\" "
        << "height=\"12\" fill=\"" << kPalette[c % 4] << "\"/>\n";
    svg << "<text x=\"" << num(lx + 16) << "\" y=\"" << num(height - 14)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << cohorts[c] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string render_aspect_sidecar_json(const std::vector<AspectBar>& bars) {
  nlohmann::json out;
  out["bars"] = nlohmann::json::array();
  for (const auto& bar : bars) {
    out["bars"].push_back({{"aspect", bar.aspect},
                           {"cohort", bar.cohort},
                           {"mean", bar.mean},
                           {"std", bar.std_dev},
                           {"n", bar.n}});
  }
  return out.dump(2) + "\n";
}

}  // namespace samkit
