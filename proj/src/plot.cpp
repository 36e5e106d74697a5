#include "cplab/plot.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "cplab/errors.hpp"

namespace cplab {

namespace {

// 5x7 font, one byte per row, bit 4 = leftmost column.
const std::map<char, std::array<uint8_t, 7>>& font() {
    static const std::map<char, std::array<uint8_t, 7>> glyphs = {
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
        {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
        {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
        {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
        {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
        {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
        {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
        {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
        {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
        {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
        {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
        {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
        {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
        {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
        {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
        {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
        {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
        {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
        {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
        {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
        {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
        {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
        {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
        {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
        {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
        {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
        {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
        {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
        {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
        {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
        {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
        {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
        {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
        {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
        {'=', {0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00, 0x00}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
        {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
        {'[', {0x0E, 0x08, 0x08, 0x08, 0x08, 0x08, 0x0E}},
        {']', {0x0E, 0x02, 0x02, 0x02, 0x02, 0x02, 0x0E}},
        {'<', {0x02, 0x04, 0x08, 0x10, 0x08, 0x04, 0x02}},
        {'>', {0x08, 0x04, 0x02, 0x01, 0x02, 0x04, 0x08}},
    };
    return glyphs;
}

constexpr Rgb kBlack{0, 0, 0};
constexpr Rgb kGrid{225, 225, 225};

std::string format_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Range {
    double lo = 0.0, hi = 1.0;

    double clip01(double v) const { return (v - lo) / (hi - lo); }
};

Range span_of(const std::vector<Series>& series, bool take_x) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& s : series)
        for (size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
            if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
            const double v = take_x ? s.xs[i] : s.ys[i];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(lo <= hi)) return {0.0, 1.0};  // nothing finite to plot
    if (lo == hi) {                      // pad a degenerate span
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        return {lo - pad, hi + pad};
    }
    const double pad = (hi - lo) * 0.05;
    return {lo - pad, hi + pad};
}

Rgb series_color(const Series& s, size_t index) {
    return s.color == Rgb{} ? kSeriesPalette[index % 8] : s.color;
}

struct Frame {
    int64_t left, right, top, bottom;  // plot area edges in pixels

    int64_t px(const Range& r, double v) const {
        return left + static_cast<int64_t>(std::lround(r.clip01(v) * static_cast<double>(right - left)));
    }
    int64_t py(const Range& r, double v) const {
        return bottom - static_cast<int64_t>(std::lround(r.clip01(v) * static_cast<double>(bottom - top)));
    }
};

void draw_axes(Image& img, const Frame& f, const Range& xr, const Range& yr,
               const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    constexpr int64_t kTicks = 5;
    for (int64_t i = 0; i <= kTicks; ++i) {
        const double fr = static_cast<double>(i) / kTicks;
        const double xv = xr.lo + fr * (xr.hi - xr.lo);
        const double yv = yr.lo + fr * (yr.hi - yr.lo);
        const int64_t x = f.px(xr, xv);
        const int64_t y = f.py(yr, yv);
        draw_line(img, x, f.top, x, f.bottom, kGrid);
        draw_line(img, f.left, y, f.right, y, kGrid);
        draw_line(img, x, f.bottom, x, f.bottom + 4, kBlack);
        draw_line(img, f.left - 4, y, f.left, y, kBlack);
        const std::string xs = format_tick(xv);
        draw_text(img, x - static_cast<int64_t>(xs.size()) * 3, f.bottom + 8, xs, kBlack);
        const std::string ys = format_tick(yv);
        draw_text(img, f.left - 8 - static_cast<int64_t>(ys.size()) * 6, y - 3, ys, kBlack);
    }
    draw_line(img, f.left, f.top, f.left, f.bottom, kBlack);
    draw_line(img, f.left, f.bottom, f.right, f.bottom, kBlack);
    draw_text(img, (f.left + f.right) / 2 - static_cast<int64_t>(title.size()) * 3, 8, title,
              kBlack);
    draw_text(img, (f.left + f.right) / 2 - static_cast<int64_t>(xlabel.size()) * 3,
              f.bottom + 22, xlabel, kBlack);
    draw_text(img, 6, f.top - 14, ylabel, kBlack);
}

}  // namespace

void draw_text(Image& img, int64_t x, int64_t y, const std::string& text, Rgb color,
               int64_t scale) {
    const auto& glyphs = font();
    int64_t cx = x;
    for (const char raw : text) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        const auto it = glyphs.find(c);
        if (it != glyphs.end()) {
            for (int64_t row = 0; row < 7; ++row)
                for (int64_t col = 0; col < 5; ++col)
                    if (it->second[static_cast<size_t>(row)] & (0x10 >> col))
                        for (int64_t dy = 0; dy < scale; ++dy)
                            for (int64_t dx = 0; dx < scale; ++dx)
                                img.set(cx + col * scale + dx, y + row * scale + dy, color.r,
                                        color.g, color.b);
        }
        cx += 6 * scale;
    }
}

void draw_line(Image& img, int64_t x0, int64_t y0, int64_t x1, int64_t y1, Rgb color) {
    const int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int64_t err = dx + dy;
    while (true) {
        img.set(x0, y0, color.r, color.g, color.b);
        if (x0 == x1 && y0 == y1) break;
        const int64_t e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

Image line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                 const std::vector<Series>& series, int64_t w, int64_t h) {
    if (series.empty()) throw InvalidInputError("line_chart: no series");
    Image img(w, h);
    const Frame f{70, w - 20, 30, h - 50};
    const Range xr = span_of(series, true);
    const Range yr = span_of(series, false);
    draw_axes(img, f, xr, yr, title, xlabel, ylabel);

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const Rgb c = series_color(s, si);
        int64_t lx = 0, ly = 0;
        bool have_last = false;
        for (size_t i = 0; i < s.xs.size() && i < s.ys.size(); ++i) {
            if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) {
                have_last = false;
                continue;
            }
            const int64_t x = f.px(xr, s.xs[i]);
            const int64_t y = f.py(yr, s.ys[i]);
            if (have_last) draw_line(img, lx, ly, x, y, c);
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dx = -1; dx <= 1; ++dx) img.set(x + dx, y + dy, c.r, c.g, c.b);
            lx = x;
            ly = y;
            have_last = true;
        }
        // legend row
        const int64_t leg_y = f.top + 6 + static_cast<int64_t>(si) * 12;
        draw_line(img, f.left + 8, leg_y + 3, f.left + 24, leg_y + 3, c);
        draw_text(img, f.left + 30, leg_y, s.label, kBlack);
    }
    return img;
}

Image boxplot_chart(const std::string& title, const std::string& ylabel,
                    const std::vector<std::string>& labels,
                    const std::vector<std::vector<double>>& groups, int64_t w, int64_t h) {
    if (groups.empty() || labels.size() != groups.size())
        throw InvalidInputError("boxplot_chart: need one label per non-empty group list");
    for (const auto& g : groups)
        if (g.empty()) throw InvalidInputError("boxplot_chart: empty group");

    const auto quantile = [](const std::vector<double>& sorted, double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto i = static_cast<size_t>(pos);
        if (i + 1 >= sorted.size()) return sorted.back();
        const double frac = pos - static_cast<double>(i);
        return sorted[i] * (1.0 - frac) + sorted[i + 1] * frac;
    };

    Image img(w, h);
    const Frame f{70, w - 20, 30, h - 50};
    double lo = groups[0][0], hi = groups[0][0];
    for (const auto& g : groups)
        for (const double v : g) {
            if (!std::isfinite(v)) throw InvalidInputError("boxplot_chart: non-finite sample");
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const Range yr = lo == hi ? Range{lo - 1.0, hi + 1.0}
                              : Range{lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)};
    const Range xr{0.0, static_cast<double>(groups.size())};
    draw_axes(img, f, xr, yr, title, "", ylabel);

    for (size_t gi = 0; gi < groups.size(); ++gi) {
        std::vector<double> sorted = groups[gi];
        std::sort(sorted.begin(), sorted.end());
        const double q1 = quantile(sorted, 0.25), q2 = quantile(sorted, 0.5),
                     q3 = quantile(sorted, 0.75);
        const double iqr = q3 - q1;
        double wlo = sorted.front(), whi = sorted.back();
        for (const double v : sorted)
            if (v >= q1 - 1.5 * iqr) {
                wlo = v;
                break;
            }
        for (auto it = sorted.rbegin(); it != sorted.rend(); ++it)
            if (*it <= q3 + 1.5 * iqr) {
                whi = *it;
                break;
            }

        const Rgb c = kSeriesPalette[gi % 8];
        const int64_t cx = f.px(xr, static_cast<double>(gi) + 0.5);
        const int64_t half = 22;
        const int64_t yq1 = f.py(yr, q1), yq2 = f.py(yr, q2), yq3 = f.py(yr, q3);
        const int64_t ywlo = f.py(yr, wlo), ywhi = f.py(yr, whi);
        draw_line(img, cx - half, yq1, cx + half, yq1, c);
        draw_line(img, cx - half, yq3, cx + half, yq3, c);
        draw_line(img, cx - half, yq1, cx - half, yq3, c);
        draw_line(img, cx + half, yq1, cx + half, yq3, c);
        draw_line(img, cx - half, yq2, cx + half, yq2, kBlack);
        draw_line(img, cx, yq3, cx, ywhi, c);
        draw_line(img, cx, yq1, cx, ywlo, c);
        draw_line(img, cx - half / 2, ywhi, cx + half / 2, ywhi, c);
        draw_line(img, cx - half / 2, ywlo, cx + half / 2, ywlo, c);
        for (const double v : sorted)
            if (v < q1 - 1.5 * iqr || v > q3 + 1.5 * iqr) img.set(cx, f.py(yr, v), c.r, c.g, c.b);
        draw_text(img, cx - static_cast<int64_t>(labels[gi].size()) * 3, f.bottom + 8, labels[gi],
                  kBlack);
    }
    return img;
}

Image heatmap_image(const std::vector<double>& values, int64_t h, int64_t w, int64_t cell_px) {
    if (h < 1 || w < 1 || static_cast<int64_t>(values.size()) != h * w)
        throw InvalidInputError("heatmap_image: grid does not match its dimensions");
    if (cell_px < 1) throw InvalidInputError("heatmap_image: cell_px must be positive");
    double hi = 0.0;
    for (const double v : values) {
        if (!std::isfinite(v) || v < 0.0)
            throw InvalidInputError("heatmap_image: values must be finite and non-negative");
        hi = std::max(hi, v);
    }
    Image img(w * cell_px, h * cell_px);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const double v = hi > 0.0 ? values[static_cast<size_t>(y * w + x)] / hi : 0.0;
            const auto chan = [&](double lo) {
                return static_cast<uint8_t>(std::clamp(3.0 * v - lo, 0.0, 1.0) * 255.0);
            };
            const uint8_t r = chan(0.0), g = chan(1.0), b = chan(2.0);
            for (int64_t dy = 0; dy < cell_px; ++dy)
                for (int64_t dx = 0; dx < cell_px; ++dx)
                    img.set(x * cell_px + dx, y * cell_px + dy, r, g, b);
        }
    return img;
}

}  // namespace cplab
