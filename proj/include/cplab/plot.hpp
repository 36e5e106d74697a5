#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cplab/png.hpp"

namespace cplab {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;

    bool operator==(const Rgb& o) const { return r == o.r && g == o.g && b == o.b; }
};

// Colors handed to series when they keep the default black {0,0,0}; index i
// gets kSeriesPalette[i % 8].
inline constexpr Rgb kSeriesPalette[8] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127},
};

struct Series {
    std::string label;
    std::vector<double> xs, ys;  // equal length; non-finite points are skipped
    Rgb color{};                 // {0,0,0} means auto palette
};

// 5x7 bitmap glyphs (digits, uppercase letters and common punctuation);
// lowercase input is uppercased, unknown glyphs leave a blank cell. (x, y)
// is the top-left corner of the first glyph.
void draw_text(Image& img, int64_t x, int64_t y, const std::string& text, Rgb color,
               int64_t scale = 1);
void draw_line(Image& img, int64_t x0, int64_t y0, int64_t x1, int64_t y1, Rgb color);

// Line chart with axes, ticks and a legend.
Image line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                 const std::vector<Series>& series, int64_t w = 720, int64_t h = 450);

// Side-by-side boxplots: median, quartile box, whiskers at the farthest
// points within 1.5 IQR, outliers as dots.
Image boxplot_chart(const std::string& title, const std::string& ylabel,
                    const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& groups, int64_t w = 540,
                    int64_t h = 450);

// Row-major grid rendered through a black-red-yellow-white ramp, scaled to
// the [0, max] range of the data, cell_px screen pixels per cell.
Image heatmap_image(const std::vector<double>& values, int64_t h, int64_t w, int64_t cell_px = 4);

}  // namespace cplab
