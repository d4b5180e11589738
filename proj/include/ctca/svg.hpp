#pragma once

#include <string>
#include <vector>

namespace ctca {

std::string xml_escape(const std::string& text);

// Pixel-space SVG assembly; charts below handle data-space mapping.
class SvgBuilder {
public:
    SvgBuilder(int width, int height);

    void line(double x1, double y1, double x2, double y2, const std::string& color,
              double stroke_width = 1.0);
    void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                  const std::string& color, double stroke_width = 1.5);
    void rect(double x, double y, double w, double h, const std::string& fill);
    void circle(double cx, double cy, double r, const std::string& fill);
    // anchor: "start", "middle", or "end".
    void text(double x, double y, const std::string& content, double size = 12.0,
              const std::string& anchor = "start", const std::string& color = "#222222");

    std::string finish() const;

    int width() const { return width_; }
    int height() const { return height_; }

private:
    int width_;
    int height_;
    std::string body_;
};

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Writes `path` (SVG) and `path + ".json"` (sidecar with every plotted number).
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<ChartSeries>& series, bool log2_x = false);

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<std::string>& categories,
                     const std::vector<double>& values);

} // namespace ctca
