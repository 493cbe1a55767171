#pragma once

#include <string>
#include <vector>

#include "vlmaudit/image.hpp"
#include "vlmaudit/saliency.hpp"

namespace vlmaudit::render {

class Canvas {
public:
    Canvas(int width, int height, Rgb background = {255, 255, 255});

    int width() const { return image_.width; }
    int height() const { return image_.height; }
    const RgbImage& image() const { return image_; }

    void set(int x, int y, Rgb c);
    void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
    void outline_rect(int x0, int y0, int x1, int y1, Rgb c);
    void line(int x0, int y0, int x1, int y1, Rgb c);
    // 5x7 glyphs on a 6x8 cell; letters render upper-case.
    void text(int x, int y, std::string_view s, Rgb c, int scale = 1);

    static int text_width(std::string_view s, int scale = 1) { return static_cast<int>(s.size()) * 6 * scale; }
    static int text_height(int scale = 1) { return 8 * scale; }

private:
    RgbImage image_;
};

// Matrix heatmap with one labelled row per keyword and one column per
// region. NaN cells are drawn grey.
struct HeatmapSpec {
    std::string title;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<double> values;  // rows x cols, row-major
};
RgbImage heatmap(const HeatmapSpec& spec);

struct ScatterSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<std::string> labels;
    double r = 0.0;
    double p = 1.0;
};
RgbImage scatter(const ScatterSpec& spec);

}  // namespace vlmaudit::render
