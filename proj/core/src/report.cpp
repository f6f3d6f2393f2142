#include "promim/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "promim/error.hpp"

namespace promim {
namespace {

constexpr std::string_view kModule = "report";
constexpr double kWidth = 640, kHeight = 360;
constexpr double kLeft = 60, kRight = 140, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                    "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

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

struct Frame {
  double lo = 0.0, hi = 1.0;
  double y(double v) const {
    const double plot_h = kHeight - kTop - kBottom;
    return kTop + plot_h * (hi - v) / (hi - lo);
  }
};

Frame frame_for(std::span<const ChartSeries> series, std::size_t categories, bool include_zero) {
  if (series.empty() || categories == 0) raise(ErrorKind::kInput, kModule, "nothing to plot");
  double lo = include_zero ? 0.0 : INFINITY, hi = include_zero ? 0.0 : -INFINITY;
  for (const ChartSeries& s : series) {
    if (s.values.size() != categories) {
      raise(ErrorKind::kDimension, kModule, "series '" + s.name + "' has the wrong length");
    }
    for (double v : s.values) {
      if (!std::isfinite(v)) raise(ErrorKind::kInput, kModule, "non-finite value in chart");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi - lo < 1e-9) {
    hi += 1.0;
    lo -= include_zero && lo == 0.0 ? 0.0 : 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo < 0.0 || !include_zero ? lo - pad : lo, hi + pad};
}

void header(std::ostringstream& os, std::string_view title, std::string_view y_label, const Frame& f) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
     << escape(title) << "</text>\n";
  os << "<text x=\"14\" y=\"" << num(kHeight / 2) << "\" transform=\"rotate(-90 14 "
     << num(kHeight / 2) << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.lo + (f.hi - f.lo) * i / 4.0;
    const double y = f.y(v);
    os << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kWidth - kRight) << "\" y1=\"" << num(y)
       << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << num(kLeft - 4) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
       << num(v) << "</text>\n";
  }
}

void legend(std::ostringstream& os, std::span<const ChartSeries> series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 16.0 * static_cast<double>(i);
    os << "<rect x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(y) << "\" width=\"10\" height=\"10\" fill=\""
       << kPalette[i % std::size(kPalette)] << "\"/>\n";
    os << "<text x=\"" << num(kWidth - kRight + 24) << "\" y=\"" << num(y + 9) << "\">"
       << escape(series[i].name) << "</text>\n";
  }
}

}  // namespace

std::string svg_bar_chart(std::string_view title, std::span<const std::string> categories,
                          std::span<const ChartSeries> series, std::string_view y_label) {
  const Frame f = frame_for(series, categories.size(), true);
  std::ostringstream os;
  header(os, title, y_label, f);
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = plot_w / static_cast<double>(categories.size());
  const double bar_w = 0.8 * group_w / static_cast<double>(series.size());
  const double zero = f.y(0.0);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group_w * static_cast<double>(c);
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = series[s].values[c];
      const double x = gx + 0.1 * group_w + bar_w * static_cast<double>(s);
      const double top = std::min(zero, f.y(v));
      os << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\"" << num(bar_w)
         << "\" height=\"" << num(std::abs(f.y(v) - zero)) << "\" fill=\""
         << kPalette[s % std::size(kPalette)] << "\"><title>" << escape(series[s].name) << ' '
         << escape(categories[c]) << ": " << num(v) << "</title></rect>\n";
    }
    os << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << num(kHeight - kBottom + 16)
       << "\" text-anchor=\"middle\">" << escape(categories[c]) << "</text>\n";
  }
  os << "<line x1=\"" << num(kLeft) << "\" x2=\"" << num(kWidth - kRight) << "\" y1=\"" << num(zero)
     << "\" y2=\"" << num(zero) << "\" stroke=\"black\"/>\n";
  legend(os, series);
  os << "</svg>\n";
  return os.str();
}

std::string svg_line_chart(std::string_view title, std::span<const std::string> x_labels,
                           std::span<const ChartSeries> series, std::string_view y_label) {
  const Frame f = frame_for(series, x_labels.size(), false);
  std::ostringstream os;
  header(os, title, y_label, f);
  const double plot_w = kWidth - kLeft - kRight;
  const double step = x_labels.size() > 1 ? plot_w / static_cast<double>(x_labels.size() - 1) : 0.0;
  auto x_at = [&](std::size_t i) {
    return x_labels.size() > 1 ? kLeft + step * static_cast<double>(i) : kLeft + plot_w / 2;
  };
  for (std::size_t i = 0; i < x_labels.size(); ++i) {
    os << "<text x=\"" << num(x_at(i)) << "\" y=\"" << num(kHeight - kBottom + 16)
       << "\" text-anchor=\"middle\">" << escape(x_labels[i]) << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < x_labels.size(); ++i) {
      os << (i ? " " : "") << num(x_at(i)) << ',' << num(f.y(series[s].values[i]));
    }
    os << "\"/>\n";
    for (std::size_t i = 0; i < x_labels.size(); ++i) {
      os << "<circle cx=\"" << num(x_at(i)) << "\" cy=\"" << num(f.y(series[s].values[i]))
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
  }
  legend(os, series);
  os << "</svg>\n";
  return os.str();
}

nlohmann::json to_json(const MetricRecord& r) {
  auto opt = [](double x) { return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x); };
  nlohmann::json j = {{"method", r.method}, {"family", r.family},   {"axis", r.axis},
                      {"value", r.value},   {"base", opt(r.base)}, {"new", opt(r.novel)},
                      {"h", opt(r.h)},      {"tokens", r.tokens}};
  j["seed"] = r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr);
  return j;
}

MetricRecord metric_from_json(const nlohmann::json& j) {
  auto opt = [](const nlohmann::json& v) { return v.is_null() ? std::nan("") : v.get<double>(); };
  MetricRecord r;
  try {
    r.method = j.at("method").get<std::string>();
    r.family = j.at("family").get<std::string>();
    r.axis = j.at("axis").get<std::string>();
    r.value = j.at("value").get<std::string>();
    r.base = opt(j.at("base"));
    r.novel = opt(j.at("new"));
    r.h = opt(j.at("h"));
    r.tokens = j.at("tokens").get<std::size_t>();
    if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kInput, kModule, std::string("malformed metric record: ") + e.what());
  }
  return r;
}

}  // namespace promim
