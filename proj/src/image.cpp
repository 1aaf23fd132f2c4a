#include "acm/image.hpp"

#include "acm/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace acm {

double iou(const Rect& a, const Rect& b) {
    const Rect i = intersect(a, b);
    if (i.w <= 0 || i.h <= 0) return 0.0;
    const long long inter = i.area();
    const long long uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

Rect intersect(const Rect& a, const Rect& b) {
    const int x0 = std::max(a.x, b.x);
    const int y0 = std::max(a.y, b.y);
    const int x1 = std::min(a.right(), b.right());
    const int y1 = std::min(a.bottom(), b.bottom());
    return Rect{x0, y0, x1 - x0, y1 - y0};
}

Rect clamp_rect(const Rect& r, int width, int height) {
    return intersect(r, Rect{0, 0, width, height});
}

Pyramid build_pyramid(const GrayImage& img) {
    if (img.width < 4 || img.height < 4)
        throw ParamError("pyramid needs a base image of at least 4x4, got " +
                         std::to_string(img.width) + "x" + std::to_string(img.height));
    Pyramid p;
    p.levels.push_back({img, 1});
    for (int k = 1; k < 3; ++k) {
        const GrayImage& prev = p.levels.back().image;
        GrayImage next(prev.width / 2, prev.height / 2);
        for (int y = 0; y < next.height; ++y)
            for (int x = 0; x < next.width; ++x)
                next.at(x, y) = prev.at(2 * x, 2 * y);
        p.levels.push_back({std::move(next), p.levels.back().scale * 2});
    }
    return p;
}

double bilinear_sample(const GrayImage& img, double sx, double sy) {
    // Shift so integer coordinates land on pixel centers.
    const double fx = sx - 0.5;
    const double fy = sy - 0.5;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0;
    const double ay = fy - y0;

    auto tap = [&](int x, int y) -> double {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return 0.0;
        return img.at(x, y);
    };

    return tap(x0, y0) * (1 - ax) * (1 - ay) + tap(x0 + 1, y0) * ax * (1 - ay) +
           tap(x0, y0 + 1) * (1 - ax) * ay + tap(x0 + 1, y0 + 1) * ax * ay;
}

static std::uint8_t to_byte(double v) {
    const long r = std::lround(v);
    return static_cast<std::uint8_t>(std::clamp(r, 0L, 255L));
}

GrayImage resize_patch(const GrayImage& img, const Rect& rect, int out_w, int out_h) {
    if (rect.w <= 0 || rect.h <= 0 || out_w <= 0 || out_h <= 0)
        throw ParamError("resize_patch requires positive source and output sizes");
    GrayImage out(out_w, out_h);
    const double sx_step = static_cast<double>(rect.w) / out_w;
    const double sy_step = static_cast<double>(rect.h) / out_h;
    for (int y = 0; y < out_h; ++y) {
        const double sy = rect.y + (y + 0.5) * sy_step;
        for (int x = 0; x < out_w; ++x) {
            const double sx = rect.x + (x + 0.5) * sx_step;
            out.at(x, y) = to_byte(bilinear_sample(img, sx, sy));
        }
    }
    return out;
}

GrayImage rotate_crop(const GrayImage& img, double center_x, double center_y,
                      double side, double angle, int out_side) {
    if (side <= 0 || out_side <= 0)
        throw ParamError("rotate_crop requires positive side lengths");
    GrayImage out(out_side, out_side);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double step = side / out_side;
    for (int y = 0; y < out_side; ++y) {
        // Patch-local coordinates relative to the square's center.
        const double py = (y + 0.5) * step - side / 2.0;
        for (int x = 0; x < out_side; ++x) {
            const double px = (x + 0.5) * step - side / 2.0;
            const double sx = center_x + px * c - py * s;
            const double sy = center_y + px * s + py * c;
            out.at(x, y) = to_byte(bilinear_sample(img, sx, sy));
        }
    }
    return out;
}

// --- PNM I/O --------------------------------------------------------------

namespace {

// Reads the next whitespace/comment-delimited token of a PNM header.
std::string pnm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (!tok.empty()) return tok;
    throw FormatError(path + ": truncated PNM header");
}

int pnm_int(std::istream& in, const std::string& path, const char* what) {
    const std::string tok = pnm_token(in, path);
    int value = 0;
    for (char c : tok) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw FormatError(path + ": bad " + what + " '" + tok + "'");
        value = value * 10 + (c - '0');
        if (value > 1 << 20) throw FormatError(path + ": " + what + " out of range");
    }
    return value;
}

} // namespace

GrayImage load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw FormatError(path + ": not a binary PGM/PPM file");
    const bool color = (m1 == '6');

    const int w = pnm_int(in, path, "width");
    const int h = pnm_int(in, path, "height");
    const int maxval = pnm_int(in, path, "maxval");
    if (w <= 0 || h <= 0) throw FormatError(path + ": non-positive dimensions");
    if (maxval <= 0 || maxval > 255) throw FormatError(path + ": unsupported maxval");
    // Exactly one whitespace byte separates the header from the raster;
    // pnm_int has already consumed it.

    const std::size_t n = static_cast<std::size_t>(w) * h;
    GrayImage img(w, h);
    if (color) {
        std::vector<std::uint8_t> rgb(n * 3);
        in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
        if (static_cast<std::size_t>(in.gcount()) != rgb.size())
            throw FormatError(path + ": truncated pixel data");
        for (std::size_t i = 0; i < n; ++i) {
            const int r = rgb[i * 3], g = rgb[i * 3 + 1], b = rgb[i * 3 + 2];
            img.data[i] = static_cast<std::uint8_t>((r * 299 + g * 587 + b * 114) / 1000);
        }
    } else {
        in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw FormatError(path + ": truncated pixel data");
    }
    return img;
}

void save_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw FormatError(path + ": write failed");
}

void save_ppm(const RgbImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError(path + ": cannot open for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw FormatError(path + ": write failed");
}

} // namespace acm
