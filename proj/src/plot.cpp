#include "nowcast/plot.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "nowcast/common.hpp"

namespace nowcast {

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    s.push_back(static_cast<char>(v >> 24));
    s.push_back(static_cast<char>(v >> 16));
    s.push_back(static_cast<char>(v >> 8));
    s.push_back(static_cast<char>(v));
}

void write_chunk(std::ofstream& out, const char type[4], const std::string& payload) {
    std::string head;
    put_u32(head, static_cast<std::uint32_t>(payload.size()));
    out.write(head.data(), 4);
    std::string body(type, 4);
    body += payload;
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    std::string tail;
    put_u32(tail, crc);
    out.write(tail.data(), 4);
}

}  // namespace

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<unsigned char>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
        throw DataError("png: buffer size does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write image: " + path);

    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::string ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(width));
    put_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // truecolor
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    write_chunk(out, "IHDR", ihdr);

    // raw scanlines, filter byte 0 per row
    std::string raw;
    raw.reserve(static_cast<std::size_t>(height) * (1 + 3 * static_cast<std::size_t>(width)));
    for (int y = 0; y < height; ++y) {
        raw.push_back('\0');
        raw.append(reinterpret_cast<const char*>(rgb.data() + static_cast<std::size_t>(y) * width * 3),
                   static_cast<std::size_t>(width) * 3);
    }
    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::string comp(comp_len, '\0');
    if (compress2(reinterpret_cast<Bytef*>(comp.data()), &comp_len,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  6) != Z_OK)
        throw DataError("png: deflate failed");
    comp.resize(comp_len);
    write_chunk(out, "IDAT", comp);
    write_chunk(out, "IEND", "");
    if (!out) throw DataError("png: write failed for " + path);
}

namespace {

// 3x5 glyphs for digits plus '.', '-', '=', and a few letters used in
// captions; each glyph is 15 bits, row-major, MSB first.
struct Glyph {
    char ch;
    std::uint16_t bits;
};

constexpr Glyph kGlyphs[] = {
    {'0', 0b111101101101111}, {'1', 0b010110010010111}, {'2', 0b111001111100111},
    {'3', 0b111001111001111}, {'4', 0b101101111001001}, {'5', 0b111100111001111},
    {'6', 0b111100111101111}, {'7', 0b111001001001001}, {'8', 0b111101111101111},
    {'9', 0b111101111001111}, {'.', 0b000000000000010}, {'-', 0b000000111000000},
    {'=', 0b000111000111000}, {'t', 0b010111010010011}, {'a', 0b000011101101011},
    {'u', 0b000101101101011}, {' ', 0b000000000000000}, {'l', 0b110010010010111},
    {'e', 0b011101110100011}, {'d', 0b001011101101011}, {'c', 0b011100100100011},
    {'s', 0b011100010001110}, {'i', 0b010000010010010},
};

void draw_text(std::vector<unsigned char>& rgb, int w, int h, int x, int y,
               const std::string& text) {
    for (std::size_t n = 0; n < text.size(); ++n) {
        std::uint16_t bits = 0;
        for (const auto& g : kGlyphs)
            if (g.ch == text[n]) bits = g.bits;
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 3; ++c)
                if (bits & (1 << (14 - (r * 3 + c)))) {
                    int px = x + static_cast<int>(n) * 4 + c, py = y + r;
                    if (px >= 0 && px < w && py >= 0 && py < h) {
                        std::size_t o = (static_cast<std::size_t>(py) * w + px) * 3;
                        rgb[o] = rgb[o + 1] = rgb[o + 2] = 16;
                    }
                }
    }
}

void draw_line(std::vector<unsigned char>& rgb, int w, int h, double x0, double y0, double x1,
               double y1, unsigned char r, unsigned char g, unsigned char b) {
    const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) * 2 + 1;
    for (int s = 0; s <= steps; ++s) {
        double t = double(s) / steps;
        int px = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        int py = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        if (px >= 0 && px < w && py >= 0 && py < h) {
            std::size_t o = (static_cast<std::size_t>(py) * w + px) * 3;
            rgb[o] = r;
            rgb[o + 1] = g;
            rgb[o + 2] = b;
        }
    }
}

}  // namespace

void write_line_chart_png(const std::string& path, const std::vector<double>& ys, double y_min,
                          double y_max, const std::string& caption) {
    const int w = 480, h = 320;
    const int ml = 48, mr = 16, mt = 28, mb = 36;  // margins
    std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3, 255);

    auto x_of = [&](double i) {
        return ml + (w - ml - mr) * (ys.size() > 1 ? i / double(ys.size() - 1) : 0.5);
    };
    auto y_of = [&](double v) {
        double f = (v - y_min) / (y_max - y_min);
        return (h - mb) - (h - mb - mt) * f;
    };

    // frame + horizontal gridlines with labels
    draw_line(rgb, w, h, ml, mt, ml, h - mb, 120, 120, 120);
    draw_line(rgb, w, h, ml, h - mb, w - mr, h - mb, 120, 120, 120);
    for (int g = 0; g <= 4; ++g) {
        double v = y_min + (y_max - y_min) * g / 4.0;
        double y = y_of(v);
        if (g > 0) draw_line(rgb, w, h, ml, y, w - mr, y, 225, 225, 225);
        char label[16];
        std::snprintf(label, sizeof label, "%.2f", v);
        draw_text(rgb, w, h, 8, static_cast<int>(y) - 2, label);
    }
    // x ticks at 1, n/2, n
    for (double xi : {0.0, (ys.size() - 1) / 2.0, double(ys.size() - 1)}) {
        char label[16];
        std::snprintf(label, sizeof label, "%d", static_cast<int>(xi) + 1);
        draw_text(rgb, w, h, static_cast<int>(x_of(xi)) - 3, h - mb + 8, label);
    }
    draw_text(rgb, w, h, ml, 10, caption);
    draw_text(rgb, w, h, w / 2 - 18, h - 14, "lead");

    bool pen_down = false;
    double lx = 0, ly = 0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (std::isnan(ys[i])) {
            pen_down = false;
            continue;
        }
        double x = x_of(double(i)), y = y_of(std::min(std::max(ys[i], y_min), y_max));
        if (pen_down) draw_line(rgb, w, h, lx, ly, x, y, 30, 80, 200);
        // point marker
        for (int d = -1; d <= 1; ++d) {
            draw_line(rgb, w, h, x + d, y - 1, x + d, y + 1, 30, 80, 200);
        }
        lx = x;
        ly = y;
        pen_down = true;
    }
    write_png_rgb(path, w, h, rgb);
}

}  // namespace nowcast
