#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "stylevar/common.hpp"

namespace stylevar {

// RGB image, row-major h*w*3, values in [0,1].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<real> data;

    Image() = default;
    Image(int h_, int w_, real fill = real(0))
        : h(h_), w(w_), data(static_cast<std::size_t>(h_) * w_ * 3, fill) {}

    real& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    real at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * w + x) * 3 + c];
    }
    void clamp01() {
        for (real& v : data) v = std::clamp(v, real(0), real(1));
    }
};

// ---------------------------------------------------------------------------
// resampling on generic (h, w, c) grids; shared by images and feature maps

// Bilinear, align-corners=false: src = (dst + 0.5) * scale - 0.5, edge clamp.
inline std::vector<real> resample_bilinear(const std::vector<real>& src, int h, int w, int c,
                                           int th, int tw) {
    std::vector<real> out(static_cast<std::size_t>(th) * tw * c);
    real sy = static_cast<real>(h) / th;
    real sx = static_cast<real>(w) / tw;
    for (int y = 0; y < th; ++y) {
        real fy = (y + real(0.5)) * sy - real(0.5);
        fy = std::clamp(fy, real(0), static_cast<real>(h - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, h - 1);
        real wy = fy - y0;
        for (int x = 0; x < tw; ++x) {
            real fx = (x + real(0.5)) * sx - real(0.5);
            fx = std::clamp(fx, real(0), static_cast<real>(w - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, w - 1);
            real wx = fx - x0;
            for (int ch = 0; ch < c; ++ch) {
                real v00 = src[(static_cast<std::size_t>(y0) * w + x0) * c + ch];
                real v01 = src[(static_cast<std::size_t>(y0) * w + x1) * c + ch];
                real v10 = src[(static_cast<std::size_t>(y1) * w + x0) * c + ch];
                real v11 = src[(static_cast<std::size_t>(y1) * w + x1) * c + ch];
                real top = v00 + (v01 - v00) * wx;
                real bot = v10 + (v11 - v10) * wx;
                out[(static_cast<std::size_t>(y) * tw + x) * c + ch] = top + (bot - top) * wy;
            }
        }
    }
    return out;
}

// Exact area average with fractional cell overlap.
inline std::vector<real> resample_area(const std::vector<real>& src, int h, int w, int c, int th,
                                       int tw) {
    std::vector<real> out(static_cast<std::size_t>(th) * tw * c, real(0));
    real sy = static_cast<real>(h) / th;
    real sx = static_cast<real>(w) / tw;
    for (int y = 0; y < th; ++y) {
        real y_begin = y * sy, y_end = (y + 1) * sy;
        int r0 = static_cast<int>(std::floor(y_begin));
        int r1 = std::min(h, static_cast<int>(std::ceil(y_end)));
        for (int x = 0; x < tw; ++x) {
            real x_begin = x * sx, x_end = (x + 1) * sx;
            int c0 = static_cast<int>(std::floor(x_begin));
            int c1 = std::min(w, static_cast<int>(std::ceil(x_end)));
            for (int ch = 0; ch < c; ++ch) {
                real acc = 0;
                for (int r = r0; r < r1; ++r) {
                    real wy = std::min(y_end, static_cast<real>(r + 1)) -
                              std::max(y_begin, static_cast<real>(r));
                    for (int cc = c0; cc < c1; ++cc) {
                        real wx = std::min(x_end, static_cast<real>(cc + 1)) -
                                  std::max(x_begin, static_cast<real>(cc));
                        acc += wy * wx * src[(static_cast<std::size_t>(r) * w + cc) * c + ch];
                    }
                }
                out[(static_cast<std::size_t>(y) * tw + x) * c + ch] = acc / (sy * sx);
            }
        }
    }
    return out;
}

// Bilinear when upsampling, area when downsampling, identity when equal.
inline std::vector<real> resample(const std::vector<real>& src, int h, int w, int c, int th,
                                  int tw) {
    require(th > 0 && tw > 0, "resample: target dims must be positive, got ", th, "x", tw);
    if (th == h && tw == w) return src;
    if (th >= h && tw >= w) return resample_bilinear(src, h, w, c, th, tw);
    return resample_area(src, h, w, c, th, tw);
}

inline Image resize(const Image& img, int th, int tw) {
    Image out;
    out.h = th;
    out.w = tw;
    out.data = resample(img.data, img.h, img.w, 3, th, tw);
    return out;
}

// ---------------------------------------------------------------------------
// augmentation helpers

inline Image rotate_deg(const Image& img, real degrees) {
    if (degrees == real(0)) return img;
    real rad = degrees * real(3.14159265358979323846 / 180.0);
    real cs = std::cos(rad), sn = std::sin(rad);
    real cy = (img.h - 1) * real(0.5), cx = (img.w - 1) * real(0.5);
    Image out(img.h, img.w);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            // inverse rotation, bilinear sample, edge clamp
            real dy = y - cy, dx = x - cx;
            real sy = cs * dy + sn * dx + cy;
            real sx = -sn * dy + cs * dx + cx;
            sy = std::clamp(sy, real(0), static_cast<real>(img.h - 1));
            sx = std::clamp(sx, real(0), static_cast<real>(img.w - 1));
            int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
            int y1 = std::min(y0 + 1, img.h - 1), x1 = std::min(x0 + 1, img.w - 1);
            real wy = sy - y0, wx = sx - x0;
            for (int ch = 0; ch < 3; ++ch) {
                real top = img.at(y0, x0, ch) + (img.at(y0, x1, ch) - img.at(y0, x0, ch)) * wx;
                real bot = img.at(y1, x0, ch) + (img.at(y1, x1, ch) - img.at(y1, x0, ch)) * wx;
                out.at(y, x, ch) = top + (bot - top) * wy;
            }
        }
    }
    return out;
}

inline Image adjust_brightness(const Image& img, real factor) {
    Image out = img;
    for (real& v : out.data) v = std::clamp(v * factor, real(0), real(1));
    return out;
}

inline Image crop(const Image& img, int y0, int x0, int ch, int cw) {
    require(y0 >= 0 && x0 >= 0 && y0 + ch <= img.h && x0 + cw <= img.w, "crop: region ", y0, ",",
            x0, " ", ch, "x", cw, " outside ", img.h, "x", img.w);
    Image out(ch, cw);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

// ---------------------------------------------------------------------------
// 8-bit PPM (P6) I/O; round-half-up quantization keeps writes reproducible.

inline void write_ppm(const std::string& path, const Image& img) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "write_ppm: cannot open ", path);
    f << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> bytes(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        real v = std::clamp(img.data[i], real(0), real(1));
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(f.good(), "write_ppm: short write to ", path);
}

inline Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "read_ppm: cannot open ", path);
    std::string magic;
    f >> magic;
    require(magic == "P6", "read_ppm: ", path, " is not a P6 ppm");
    int w = 0, h = 0, maxval = 0;
    f >> w >> h >> maxval;
    require(w > 0 && h > 0 && maxval == 255, "read_ppm: unsupported header in ", path);
    f.get();  // single whitespace after header
    Image img(h, w);
    std::vector<unsigned char> bytes(img.data.size());
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(f.gcount() == static_cast<std::streamsize>(bytes.size()), "read_ppm: truncated file ",
            path);
    for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / real(255);
    return img;
}

}  // namespace stylevar
