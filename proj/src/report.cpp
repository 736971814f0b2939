#include "erd/report.hpp"

#include <algorithm>
#include <cstdio>

#include "erd/trainer.hpp"

namespace erd {

std::string xml_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (const char c : text) {
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

namespace {

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

constexpr const char* kCorrect = "#2e9e44";
constexpr const char* kWrong = "#d0342c";
constexpr const char* kUnread = "#b8b8b8";

}  // namespace

std::string timeline_svg(std::span<const TimelineEntry> entries, int theta, const std::string& title) {
    int max_posts = theta;
    for (const auto& e : entries) max_posts = std::max(max_posts, e.total_posts);
    const int top = ((max_posts + 9) / 10) * 10;

    const double left = 50, right = 20, upper = 40, lower = 30, plot_h = 300;
    const double bar_w = 4, gap = 1;
    const double plot_w = std::max(200.0, static_cast<double>(entries.size()) * (bar_w + gap));
    const double width = left + plot_w + right, height = upper + plot_h + lower;
    auto y_of = [&](double posts) { return upper + plot_h * (1.0 - posts / top); };

    std::string svg = fmt(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
        "viewBox=\"0 0 %.0f %.0f\" font-family=\"sans-serif\" font-size=\"11\">\n",
        width, height, width, height);
    svg += "<title>" + xml_escape(title) + "</title>\n";
    svg += fmt("<text x=\"%.0f\" y=\"20\">%s</text>\n", left, xml_escape(title).c_str());
    for (int t = 0; t <= top; t += 10) {
        svg += fmt("<text x=\"%.0f\" y=\"%.1f\" text-anchor=\"end\">%d</text>\n", left - 6, y_of(t) + 4, t);
        svg += fmt("<line x1=\"%.0f\" y1=\"%.1f\" x2=\"%.0f\" y2=\"%.1f\" stroke=\"#eeeeee\"/>\n", left,
                   y_of(t), left + plot_w, y_of(t));
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const double x = left + static_cast<double>(i) * (bar_w + gap);
        svg += fmt("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.0f\" height=\"%.1f\" fill=\"%s\"/>\n", x,
                   y_of(e.total_posts), bar_w, y_of(e.posts_read) - y_of(e.total_posts), kUnread);
        svg += fmt("<rect x=\"%.1f\" y=\"%.1f\" width=\"%.0f\" height=\"%.1f\" fill=\"%s\">"
                   "<title>%s %s k=%d</title></rect>\n",
                   x, y_of(e.posts_read), bar_w, y_of(0) - y_of(e.posts_read),
                   correct(e.outcome) ? kCorrect : kWrong, xml_escape(e.user_id).c_str(),
                   to_string(e.outcome), e.posts_read);
    }
    svg += fmt("<line class=\"theta-line\" data-theta=\"%d\" x1=\"%.0f\" y1=\"%.1f\" x2=\"%.0f\" "
               "y2=\"%.1f\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n",
               theta, left, y_of(theta), left + plot_w, y_of(theta));
    svg += fmt("<text x=\"%.0f\" y=\"%.1f\">theta=%d</text>\n", left + plot_w - 60, y_of(theta) - 4, theta);
    svg += "</svg>\n";
    return svg;
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
    std::string out = "model,evaluator";
    for (const char* col : kReportColumns) out += std::string(",") + col;
    out += '\n';
    for (const auto& row : rows) {
        const auto csv = report_csv(row.report);
        out += row.model + "," + row.evaluator + "," + csv.substr(csv.find('\n') + 1);
    }
    return out;
}

std::string probe_csv(std::span<const ProbePoint> points) {
    std::string out = "t,probability,alarm\n";
    for (const auto& p : points) out += fmt("%d,%.9f,%d\n", p.delay, p.probability, p.alarm ? 1 : 0);
    return out;
}

std::string probe_svg(std::span<const ProbePoint> points, double threshold, const std::string& title) {
    const double left = 50, upper = 40, w = 400, h = 200;
    int t_max = 1;
    for (const auto& p : points) t_max = std::max(t_max, p.delay);
    auto x_of = [&](double t) { return left + w * t / t_max; };
    auto y_of = [&](double p) { return upper + h * (1.0 - p); };

    std::string svg = fmt(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
        "font-family=\"sans-serif\" font-size=\"11\">\n",
        left + w + 20, upper + h + 30);
    svg += "<title>" + xml_escape(title) + "</title>\n";
    svg += fmt("<text x=\"%.0f\" y=\"20\">%s</text>\n", left, xml_escape(title).c_str());
    svg += fmt("<line x1=\"%.0f\" y1=\"%.1f\" x2=\"%.0f\" y2=\"%.1f\" stroke=\"black\" "
               "stroke-dasharray=\"6 4\"/>\n",
               left, y_of(threshold), left + w, y_of(threshold));
    std::string path;
    for (const auto& p : points) {
        path += fmt("%s%.1f,%.1f", path.empty() ? "" : " ", x_of(p.delay), y_of(p.probability));
        svg += fmt("<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n", x_of(p.delay),
                   y_of(p.probability), p.alarm ? kWrong : kCorrect);
    }
    svg += "<polyline fill=\"none\" stroke=\"#333333\" points=\"" + path + "\"/>\n</svg>\n";
    return svg;
}

std::vector<int> default_probe_times() {
    std::vector<int> t;
    for (int k = 10; k <= 100; k += 10) t.push_back(k);
    return t;
}

}  // namespace erd
