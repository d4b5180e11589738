#include "ctca/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "ctca/common.hpp"

namespace ctca {

using nlohmann::json;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
constexpr size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

struct Range {
    double lo = 0.0;
    double hi = 1.0;
    void widen(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

Range padded(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = (hi - lo) * 0.06;
    return {lo - pad, hi + pad};
}

std::vector<double> ticks(const Range& r, int count) {
    std::vector<double> out;
    const double raw = (r.hi - r.lo) / count;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    }
    const double first = std::ceil(r.lo / step) * step;
    for (double v = first; v <= r.hi + step * 1e-9; v += step) {
        out.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    }
    return out;
}

} // namespace

std::string xml_escape(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c; break;
        }
    }
    return out;
}

SvgBuilder::SvgBuilder(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw ConfigError("svg: non-positive canvas size");
}

void SvgBuilder::line(double x1, double y1, double x2, double y2, const std::string& color,
                      double stroke_width) {
    body_ += "  <line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) +
             "\" y2=\"" + num(y2) + "\" stroke=\"" + xml_escape(color) +
             "\" stroke-width=\"" + num(stroke_width) + "\"/>\n";
}

void SvgBuilder::polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::string& color, double stroke_width) {
    if (xs.size() != ys.size()) throw ShapeError("svg: polyline coordinate lengths differ");
    if (xs.empty()) return;
    std::string points;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) points += ' ';
        points += num(xs[i]) + "," + num(ys[i]);
    }
    body_ += "  <polyline points=\"" + points + "\" fill=\"none\" stroke=\"" +
             xml_escape(color) + "\" stroke-width=\"" + num(stroke_width) + "\"/>\n";
}

void SvgBuilder::rect(double x, double y, double w, double h, const std::string& fill) {
    body_ += "  <rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) +
             "\" height=\"" + num(h) + "\" fill=\"" + xml_escape(fill) + "\"/>\n";
}

void SvgBuilder::circle(double cx, double cy, double r, const std::string& fill) {
    body_ += "  <circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) +
             "\" fill=\"" + xml_escape(fill) + "\"/>\n";
}

void SvgBuilder::text(double x, double y, const std::string& content, double size,
                      const std::string& anchor, const std::string& color) {
    body_ += "  <text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
             "\" font-family=\"sans-serif\" text-anchor=\"" + xml_escape(anchor) +
             "\" fill=\"" + xml_escape(color) + "\">" + xml_escape(content) + "</text>\n";
}

std::string SvgBuilder::finish() const {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width_) +
           "\" height=\"" + std::to_string(height_) + "\" viewBox=\"0 0 " +
           std::to_string(width_) + " " + std::to_string(height_) + "\">\n";
    out += "  <rect x=\"0\" y=\"0\" width=\"" + std::to_string(width_) + "\" height=\"" +
           std::to_string(height_) + "\" fill=\"#ffffff\"/>\n";
    out += body_;
    out += "</svg>\n";
    return out;
}

namespace {

constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 48.0;

struct Frame {
    SvgBuilder& svg;
    Range xr, yr;

    double x(double v) const {
        return kMarginLeft +
               (v - xr.lo) / (xr.hi - xr.lo) * (svg.width() - kMarginLeft - kMarginRight);
    }
    double y(double v) const {
        return svg.height() - kMarginBottom -
               (v - yr.lo) / (yr.hi - yr.lo) *
                   (svg.height() - kMarginTop - kMarginBottom);
    }
};

void draw_axes(Frame& f, const std::string& title, const std::string& x_label,
               const std::string& y_label, bool log2_x) {
    SvgBuilder& svg = f.svg;
    const double x0 = kMarginLeft, x1 = svg.width() - kMarginRight;
    const double y0 = svg.height() - kMarginBottom, y1 = kMarginTop;
    svg.line(x0, y0, x1, y0, "#222222");
    svg.line(x0, y0, x0, y1, "#222222");
    svg.text(svg.width() / 2.0, 20.0, title, 14.0, "middle");
    svg.text(svg.width() / 2.0, svg.height() - 10.0, x_label, 12.0, "middle");
    svg.text(14.0, kMarginTop - 10.0, y_label, 12.0, "start");

    for (double v : ticks(f.xr, 6)) {
        const double px = f.x(v);
        svg.line(px, y0, px, y0 + 4.0, "#222222");
        const double shown = log2_x ? std::exp2(v) : v;
        svg.text(px, y0 + 18.0, tick_label(shown), 10.0, "middle");
    }
    for (double v : ticks(f.yr, 5)) {
        const double py = f.y(v);
        svg.line(x0 - 4.0, py, x0, py, "#222222");
        svg.line(x0, py, x1, py, "#eeeeee");
        svg.text(x0 - 8.0, py + 3.5, tick_label(v), 10.0, "end");
    }
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("svg: cannot write '" + path + "'");
    out << content;
    if (!out) throw IoError("svg: write to '" + path + "' failed");
}

} // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series, bool log2_x) {
    if (series.empty()) throw ConfigError("svg: line chart needs at least one series");
    Range xr{1e300, -1e300}, yr{1e300, -1e300};
    for (const ChartSeries& s : series) {
        if (s.x.size() != s.y.size()) {
            throw ShapeError("svg: series '" + s.label + "' coordinate lengths differ");
        }
        if (s.x.empty()) throw ShapeError("svg: series '" + s.label + "' is empty");
        for (size_t i = 0; i < s.x.size(); ++i) {
            xr.widen(log2_x ? std::log2(s.x[i]) : s.x[i]);
            yr.widen(s.y[i]);
        }
    }
    xr = padded(xr.lo, xr.hi);
    yr = padded(yr.lo, yr.hi);

    SvgBuilder svg(640, 420);
    Frame frame{svg, xr, yr};
    draw_axes(frame, title, x_label, y_label, log2_x);
    for (size_t si = 0; si < series.size(); ++si) {
        const ChartSeries& s = series[si];
        const std::string color = kPalette[si % kPaletteSize];
        std::vector<double> px, py;
        for (size_t i = 0; i < s.x.size(); ++i) {
            px.push_back(frame.x(log2_x ? std::log2(s.x[i]) : s.x[i]));
            py.push_back(frame.y(s.y[i]));
        }
        svg.polyline(px, py, color);
        for (size_t i = 0; i < px.size(); ++i) svg.circle(px[i], py[i], 2.5, color);
        const double ly = kMarginTop + 16.0 * static_cast<double>(si);
        svg.rect(svg.width() - 160.0, ly - 8.0, 10.0, 10.0, color);
        svg.text(svg.width() - 144.0, ly + 1.0, s.label, 11.0);
    }
    write_text_file(path, svg.finish());

    json sidecar;
    sidecar["kind"] = "line";
    sidecar["title"] = title;
    sidecar["x_label"] = x_label;
    sidecar["y_label"] = y_label;
    sidecar["series"] = json::array();
    for (const ChartSeries& s : series) {
        json entry;
        entry["label"] = s.label;
        entry["x"] = s.x;
        entry["y"] = s.y;
        sidecar["series"].push_back(entry);
    }
    write_text_file(path + ".json", sidecar.dump(2) + "\n");
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<std::string>& categories,
                     const std::vector<double>& values) {
    if (categories.empty()) throw ConfigError("svg: bar chart needs at least one category");
    if (categories.size() != values.size()) {
        throw ShapeError("svg: bar chart categories and values differ in length");
    }
    Range yr{0.0, 0.0};
    for (double v : values) yr.widen(v);
    yr = padded(yr.lo, yr.hi);
    const Range xr{-0.6, static_cast<double>(categories.size()) - 0.4};

    SvgBuilder svg(std::max<int>(640, 60 * static_cast<int>(categories.size()) + 120), 420);
    Frame frame{svg, xr, yr};

    const double x0 = kMarginLeft, x1 = svg.width() - kMarginRight;
    const double y0 = svg.height() - kMarginBottom, y1 = kMarginTop;
    svg.line(x0, y0, x1, y0, "#222222");
    svg.line(x0, y0, x0, y1, "#222222");
    svg.text(svg.width() / 2.0, 20.0, title, 14.0, "middle");
    svg.text(svg.width() / 2.0, svg.height() - 10.0, x_label, 12.0, "middle");
    svg.text(14.0, kMarginTop - 10.0, y_label, 12.0, "start");
    for (double v : ticks(yr, 5)) {
        const double py = frame.y(v);
        svg.line(x0 - 4.0, py, x0, py, "#222222");
        svg.line(x0, py, x1, py, "#eeeeee");
        svg.text(x0 - 8.0, py + 3.5, tick_label(v), 10.0, "end");
    }
    const double zero_y = frame.y(0.0);
    for (size_t i = 0; i < categories.size(); ++i) {
        const double cx = frame.x(static_cast<double>(i));
        const double half = (frame.x(0.35) - frame.x(-0.35)) / 2.0;
        const double vy = frame.y(values[i]);
        const double top = std::min(vy, zero_y);
        svg.rect(cx - half, top, 2.0 * half, std::abs(vy - zero_y),
                 kPalette[i % kPaletteSize]);
        svg.text(cx, y0 + 18.0, categories[i], 10.0, "middle");
        svg.text(cx, top - 4.0, tick_label(values[i]), 9.0, "middle");
    }
    write_text_file(path, svg.finish());

    json sidecar;
    sidecar["kind"] = "bar";
    sidecar["title"] = title;
    sidecar["x_label"] = x_label;
    sidecar["y_label"] = y_label;
    sidecar["categories"] = categories;
    sidecar["values"] = values;
    write_text_file(path + ".json", sidecar.dump(2) + "\n");
}

} // namespace ctca
