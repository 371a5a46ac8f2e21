#include "granusense/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

#include <json.hpp>

namespace gsn::pngio {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open " + path);
    return f;
}

void png_warning_fn(png_structp, png_const_charp) {}

unsigned char quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

void write_image(const std::string& path, int width, int height, int bit_depth,
                 int color_type, std::vector<png_bytep>& rows) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    png_set_error_fn(png, nullptr, nullptr, png_warning_fn);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode " + path);
    }

    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads any PNG and hands back 8-bit RGB rows (libpng transforms applied).
void read_rgb8_rows(const std::string& path, int& width, int& height,
                    std::vector<unsigned char>& buf) {
    FilePtr f = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw std::runtime_error("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    png_set_error_fn(png, nullptr, nullptr, png_warning_fn);

    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode " + path);
    }

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    width = static_cast<int>(w);
    height = static_cast<int>(h);
    buf.assign(static_cast<std::size_t>(w) * h * 3, 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

void read_gray16_rows(const std::string& path, int& width, int& height,
                      std::vector<unsigned char>& buf) {
    FilePtr f = open_file(path, "rb");
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw std::runtime_error("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    png_set_error_fn(png, nullptr, nullptr, png_warning_fn);

    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode " + path);
    }

    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    if (png_get_bit_depth(png, info) != 16 ||
        png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY)
        png_error(png, "heightmap PNG must be 16-bit grayscale");
    png_read_update_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    width = static_cast<int>(w);
    height = static_cast<int>(h);
    buf.assign(static_cast<std::size_t>(w) * h * 2, 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = buf.data() + static_cast<std::size_t>(y) * w * 2;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

} // namespace

void write_rgb8(const std::string& path, const TactileImage& img) {
    const int w = img.width;
    const int h = img.height;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = img.index(x, y);
            const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
            buf[o + 0] = quantize8(img.channels[0][p]);
            buf[o + 1] = quantize8(img.channels[1][p]);
            buf[o + 2] = quantize8(img.channels[2][p]);
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * w * 3;
    write_image(path, w, h, 8, PNG_COLOR_TYPE_RGB, rows);
}

TactileImage read_rgb8(const std::string& path) {
    int w = 0, h = 0;
    std::vector<unsigned char> buf;
    read_rgb8_rows(path, w, h, buf);
    TactileImage img(w, h, 0.25);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = img.index(x, y);
            const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
            img.channels[0][p] = buf[o + 0] / 255.0;
            img.channels[1][p] = buf[o + 1] / 255.0;
            img.channels[2][p] = buf[o + 2] / 255.0;
        }
    }
    return img;
}

void write_heightmap(const std::string& path, const HeightMap& hm, double mm_per_unit) {
    const int w = hm.width;
    const int h = hm.height;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double units = hm.at(x, y) / mm_per_unit;
            const long q = std::lround(std::clamp(units, 0.0, 65535.0));
            const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 2;
            buf[o + 0] = static_cast<unsigned char>((q >> 8) & 0xFF); // PNG is big-endian
            buf[o + 1] = static_cast<unsigned char>(q & 0xFF);
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y)
        rows[static_cast<std::size_t>(y)] = buf.data() + static_cast<std::size_t>(y) * w * 2;
    write_image(path, w, h, 16, PNG_COLOR_TYPE_GRAY, rows);

    nlohmann::json meta;
    meta["mm_per_unit"] = mm_per_unit;
    meta["resolution_mm_per_px"] = hm.resolution;
    std::ofstream side(path + ".json");
    if (!side) throw std::runtime_error("cannot write " + path + ".json");
    side << meta.dump(2) << "\n";
}

HeightMap read_heightmap(const std::string& path) {
    std::ifstream side(path + ".json");
    if (!side) throw std::runtime_error("missing heightmap sidecar " + path + ".json");
    nlohmann::json meta = nlohmann::json::parse(side);
    const double mm_per_unit = meta.at("mm_per_unit").get<double>();
    const double resolution = meta.at("resolution_mm_per_px").get<double>();

    int w = 0, h = 0;
    std::vector<unsigned char> buf;
    read_gray16_rows(path, w, h, buf);

    HeightMap hm(w, h, resolution);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 2;
            const unsigned units = (static_cast<unsigned>(buf[o]) << 8) | buf[o + 1];
            hm.at(x, y) = units * mm_per_unit;
        }
    }
    return hm;
}

void write_normalmap(const std::string& path, const NormalMap& nm) {
    TactileImage img(nm.width, nm.height, nm.resolution);
    for (std::size_t i = 0; i < nm.size(); ++i) {
        img.channels[0][i] = (nm.nx[i] + 1.0) * 0.5;
        img.channels[1][i] = (nm.ny[i] + 1.0) * 0.5;
        img.channels[2][i] = (nm.nz[i] + 1.0) * 0.5;
    }
    write_rgb8(path, img);
}

} // namespace gsn::pngio
