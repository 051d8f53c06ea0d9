#pragma once

#include <filesystem>
#include <string>

#include "cdsal/stats.hpp"

namespace cdsal {

// Model x sequence grid of mean scores, colored on the metric's observed range.
std::string heatmap_svg(const Summary& summary, MetricId metric, const std::string& title);

// Per-model marginal means with SEM error bars.
std::string bar_chart_svg(const Summary& summary, MetricId metric, const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace cdsal
