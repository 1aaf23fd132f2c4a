#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace acm {

/// 8-bit grayscale raster, row-major. The universal pixel carrier.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // size == width * height

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t pixel_count() const { return data.size(); }

    bool operator==(const GrayImage& o) const = default;
};

/// Interleaved 8-bit RGB raster, used only for overlay output.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // size == width * height * 3

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        std::uint8_t* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
};

/// Axis-aligned rectangle in integer pixel units, top-left origin,
/// y growing downward. w and h must be positive for a valid rect.
struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    long long area() const { return static_cast<long long>(w) * h; }
    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }
    int right() const { return x + w; }  // exclusive
    int bottom() const { return y + h; } // exclusive

    bool operator==(const Rect& o) const = default;
};

/// Intersection-over-union of two rects; 0 when disjoint.
double iou(const Rect& a, const Rect& b);

/// Intersection rect; w/h <= 0 encodes an empty intersection.
Rect intersect(const Rect& a, const Rect& b);

/// Clamp a rect to an image of the given dimensions. Result may be empty.
Rect clamp_rect(const Rect& r, int width, int height);

/// Three-level scale pyramid built by plain 2x2 decimation, no smoothing.
/// Level k holds pixel (2i, 2j) of level k-1; scales are 1, 2, 4.
struct Pyramid {
    struct Level {
        GrayImage image;
        int scale = 1; // downsampling factor relative to the base image
    };
    std::vector<Level> levels; // always 3
};

/// Throws ParamError when any level would hit zero in a dimension
/// (base must be at least 4x4).
Pyramid build_pyramid(const GrayImage& img);

/// Bilinear sample at a continuous point (pixel centers at x+0.5).
/// Out-of-image neighbors contribute 0 (black fill).
double bilinear_sample(const GrayImage& img, double sx, double sy);

/// Resample the contents of `rect` (which may extend beyond the image;
/// outside reads as 0) to an out_w x out_h patch.
GrayImage resize_patch(const GrayImage& img, const Rect& rect, int out_w, int out_h);

/// Sample an out_side x out_side patch from the axis-aligned square of the
/// given center/side rotated by `angle` radians, bilinear, black fill.
GrayImage rotate_crop(const GrayImage& img, double center_x, double center_y,
                      double side, double angle, int out_side);

// --- file I/O ------------------------------------------------------------

/// Reads binary PGM (P5, maxval <= 255) or binary PPM (P6, converted to
/// luma as (r*299 + g*587 + b*114) / 1000). Throws FormatError otherwise.
GrayImage load_image(const std::string& path);

/// Writes the canonical binary PGM: "P5\n<w> <h>\n255\n" + raw bytes.
void save_pgm(const GrayImage& img, const std::string& path);

/// Writes binary PPM: "P6\n<w> <h>\n255\n" + raw RGB bytes.
void save_ppm(const RgbImage& img, const std::string& path);

} // namespace acm
