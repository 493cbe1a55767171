#include <gtest/gtest.h>

#include <cmath>

#include "vlmaudit/render.hpp"

using namespace vlmaudit;
using namespace vlmaudit::render;

namespace {

int count_color(const RgbImage& img, Rgb c) {
    int n = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.at(x, y);
            n += p[0] == c.r && p[1] == c.g && p[2] == c.b;
        }
    }
    return n;
}

constexpr Rgb kBlack{0, 0, 0};

}  // namespace

TEST(Canvas, ClipsDrawingToTheImage) {
    Canvas c(10, 8);
    c.set(-1, 0, kBlack);
    c.set(10, 3, kBlack);
    c.fill_rect(-5, -5, 3, 3, kBlack);
    EXPECT_EQ(count_color(c.image(), kBlack), 9);
    c.outline_rect(5, 4, 9, 7, {1, 2, 3});
    EXPECT_EQ(count_color(c.image(), {1, 2, 3}), 10);
}

TEST(Canvas, LinesHitBothEndpoints) {
    Canvas c(20, 20);
    c.line(2, 3, 17, 11, kBlack);
    EXPECT_EQ(c.image().at(2, 3)[0], 0);
    EXPECT_EQ(c.image().at(17, 11)[0], 0);
    EXPECT_EQ(count_color(c.image(), kBlack), 16);
}

TEST(Canvas, TextDrawsInsideItsCell) {
    Canvas c(40, 20);
    c.text(2, 2, "A1", kBlack);
    const int one = count_color(c.image(), kBlack);
    EXPECT_GT(one, 10);
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 40; ++x) {
            if (x < 2 || x >= 2 + Canvas::text_width("A1") || y < 2 || y >= 2 + Canvas::text_height()) {
                EXPECT_NE(c.image().at(x, y)[0], 0) << x << "," << y;
            }
        }
    }
    Canvas big(80, 40);
    big.text(0, 0, "A1", kBlack, 2);
    EXPECT_EQ(count_color(big.image(), kBlack), 4 * one);
    Canvas lower(40, 20);
    lower.text(2, 2, "a1", kBlack);
    EXPECT_EQ(lower.image(), c.image());
}

TEST(Heatmap, SizeGrowsWithTheMatrix) {
    HeatmapSpec small{"T", {"a", "b"}, {"X", "Y", "Z"}, {0.1, 0.2, 0.3, 0.4, std::nan(""), 0.6}};
    HeatmapSpec large = small;
    large.row_labels.push_back("c");
    for (int i = 0; i < 3; ++i) large.values.push_back(0.5);
    const auto a = heatmap(small);
    const auto b = heatmap(large);
    EXPECT_GT(a.width, 3 * 20);
    EXPECT_EQ(a.width, b.width);
    EXPECT_EQ(b.height - a.height, 20);
    EXPECT_EQ(heatmap(small), a);
}

TEST(Scatter, FixedCanvasAndDeterminism) {
    ScatterSpec s{"GAP", "GGGI", "GD", {0.6, 0.65, 0.7, 0.8}, {0.1, 0.08, 0.05, 0.02}, {"A", "B", "C", "D"}, -0.9,
                  0.1};
    const auto img = scatter(s);
    EXPECT_EQ(img.width, 520);
    EXPECT_EQ(img.height, 380);
    EXPECT_EQ(scatter(s), img);
    s.ys[0] = 0.2;
    EXPECT_NE(scatter(s), img);
}
