#pragma once
// CSV/SVG emitters for decision timelines, the offline-vs-server comparison
// table and the time-sensitivity probe.

#include <span>
#include <string>
#include <vector>

#include "erd/metrics.hpp"
#include "erd/model.hpp"

namespace erd {

struct TimelineEntry;

// One bar per user: read posts (green when correct, red when wrong) topped by
// the unread remainder in gray; a dashed horizontal line marks theta.
std::string timeline_svg(std::span<const TimelineEntry> entries, int theta,
                         const std::string& title);

struct ComparisonRow {
    std::string model;
    std::string evaluator;  // "offline" or "server"
    MetricsReport report;
};

std::string comparison_csv(std::span<const ComparisonRow> rows);

std::string probe_csv(std::span<const ProbePoint> points);
std::string probe_svg(std::span<const ProbePoint> points, double threshold,
                      const std::string& title);

// Default probe grid t = 10, 20, ..., 100.
std::vector<int> default_probe_times();

std::string xml_escape(std::string_view text);

}  // namespace erd
