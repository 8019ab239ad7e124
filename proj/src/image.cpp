#include "anerf/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "anerf/errors.hpp"

namespace anerf {

Image8 to_8bit(const ImageF& img) {
    Image8 out = Image8::make(img.width, img.height, 3);
    for (size_t i = 0; i < img.rgb.size(); ++i) {
        float v = img.rgb[i];
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        out.px[i] = static_cast<uint8_t>(std::lround(v * 255.f));
    }
    return out;
}

ImageF to_float(const Image8& img) {
    if (img.channels != 3) throw ConfigError("to_float: expected 3-channel image");
    ImageF out = ImageF::make(img.width, img.height);
    for (size_t i = 0; i < img.px.size(); ++i)
        out.rgb[i] = static_cast<float>(img.px[i]) / 255.f;
    return out;
}

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const Image8& img) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw RuntimeFailure("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("libpng error while writing " + path.string());
    }
    png_init_io(png, fp.get());
    int color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(
                               &img.px[static_cast<size_t>(y) * img.width * img.channels]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image8 read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw ParseError("cannot open image " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("libpng error while reading " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize everything to 8-bit RGB.
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_expand(png);
    int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    Image8 img = Image8::make(static_cast<int>(png_get_image_width(png, info)),
                              static_cast<int>(png_get_image_height(png, info)), 3);
    for (int y = 0; y < img.height; ++y)
        png_read_row(png, &img.px[static_cast<size_t>(y) * img.width * 3], nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image8& img) {
    if (img.channels != 3) throw ConfigError("write_ppm: P6 requires 3 channels");
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw RuntimeFailure("cannot open " + path.string() + " for writing");
    std::fprintf(fp.get(), "P6\n%d %d\n255\n", img.width, img.height);
    std::fwrite(img.px.data(), 1, img.px.size(), fp.get());
}

}  // namespace anerf
