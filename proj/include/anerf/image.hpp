#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace anerf {

// 8-bit image, 1 or 3 channels, row-major.
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<uint8_t> px;

    static Image8 make(int w, int h, int channels = 3, uint8_t fill = 0) {
        Image8 img;
        img.width = w;
        img.height = h;
        img.channels = channels;
        img.px.assign(static_cast<size_t>(w) * h * channels, fill);
        return img;
    }
    uint8_t& at(int x, int y, int c) {
        return px[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c) const {
        return px[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

// Float RGB image in [0,1], row-major.
struct ImageF {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;  // 3 floats per pixel

    static ImageF make(int w, int h, float fill = 0.f) {
        ImageF img;
        img.width = w;
        img.height = h;
        img.rgb.assign(static_cast<size_t>(w) * h * 3, fill);
        return img;
    }
    float* pixel(int x, int y) { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
    const float* pixel(int x, int y) const {
        return &rgb[(static_cast<size_t>(y) * width + x) * 3];
    }
};

Image8 to_8bit(const ImageF& img);
ImageF to_float(const Image8& img);

void write_png(const std::filesystem::path& path, const Image8& img);
Image8 read_png(const std::filesystem::path& path);

// Binary PPM (P6); 3-channel only.
void write_ppm(const std::filesystem::path& path, const Image8& img);

}  // namespace anerf
