#include "depthpatch/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "depthpatch/errors.hpp"

namespace depthpatch {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const Image& img, const std::string& path) {
    if (img.c != 3 || img.h <= 0 || img.w <= 0)
        throw DataError("write_png: expected non-empty 3-channel image for " + path);

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw DataError("write_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("write_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("write_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("write_png: libpng error writing " + path);
    }

    png_init_io(png, f.get());
    png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                double q = std::lround(std::clamp(img.at(ch, y, x), 0.0, 1.0) * 255.0);
                row[static_cast<size_t>(x) * 3 + ch] = static_cast<unsigned char>(q);
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DataError("read_png: cannot open " + path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw DataError("read_png: not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("read_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("read_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("read_png: libpng error reading " + path);
    }

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // Normalize whatever we were given to 8-bit RGB.
    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));

    Image img(3, h, w);
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(ch, y, x) = row[static_cast<size_t>(x) * 3 + ch] / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_disparity(const DisparityMap& map, const std::string& path) {
    if (map.h <= 0 || map.w <= 0) throw DataError("write_disparity: empty map for " + path);
    for (double x : map.v)
        if (!std::isfinite(x)) throw DataError("write_disparity: NaN/Inf value in " + path);

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw DataError("write_disparity: cannot open " + path);

    std::fprintf(f.get(), "Pf\n%d %d\n-1.0\n", map.w, map.h);
    std::vector<float> row(static_cast<size_t>(map.w));
    // PFM stores rows bottom to top.
    for (int y = map.h - 1; y >= 0; --y) {
        for (int x = 0; x < map.w; ++x) row[x] = static_cast<float>(map.at(y, x));
        if (std::fwrite(row.data(), sizeof(float), row.size(), f.get()) != row.size())
            throw DataError("write_disparity: short write to " + path);
    }
}

namespace {

// Reads one whitespace-delimited token from a PFM header.
std::string next_token(std::FILE* f, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = std::fgetc(f)) != EOF && std::isspace(ch)) {
    }
    if (ch == EOF) throw DataError("read_disparity: truncated header in " + path);
    do {
        tok.push_back(static_cast<char>(ch));
    } while ((ch = std::fgetc(f)) != EOF && !std::isspace(ch));
    return tok;
}

}  // namespace

DisparityMap read_disparity(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DataError("read_disparity: cannot open " + path);

    const std::string magic = next_token(f.get(), path);
    if (magic != "Pf") throw DataError("read_disparity: not a grayscale PFM: " + path);
    const int w = std::atoi(next_token(f.get(), path).c_str());
    const int h = std::atoi(next_token(f.get(), path).c_str());
    const double scale = std::atof(next_token(f.get(), path).c_str());
    if (w <= 0 || h <= 0) throw DataError("read_disparity: bad dimensions in " + path);
    if (scale >= 0.0)
        throw DataError("read_disparity: big-endian PFM not supported: " + path);

    DisparityMap map(h, w);
    std::vector<float> row(static_cast<size_t>(w));
    for (int y = h - 1; y >= 0; --y) {
        if (std::fread(row.data(), sizeof(float), row.size(), f.get()) != row.size())
            throw DataError("read_disparity: truncated data in " + path);
        for (int x = 0; x < w; ++x) map.at(y, x) = row[x];
    }
    return map;
}

}  // namespace depthpatch
