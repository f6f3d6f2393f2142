#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "promim/evaluation.hpp"

namespace promim {

struct ChartSeries {
  std::string name;
  std::vector<double> values;  // one per category
};

/// Grouped bar chart; negative values grow downward from the zero line.
std::string svg_bar_chart(std::string_view title, std::span<const std::string> categories,
                          std::span<const ChartSeries> series, std::string_view y_label);

/// One polyline per series over evenly spaced categorical x positions.
std::string svg_line_chart(std::string_view title, std::span<const std::string> x_labels,
                           std::span<const ChartSeries> series, std::string_view y_label);

nlohmann::json to_json(const MetricRecord& r);
MetricRecord metric_from_json(const nlohmann::json& j);

}  // namespace promim
