#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ntklab {

/// Row-major, channel-interleaved image with samples in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0);

    [[nodiscard]] std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    [[nodiscard]] double& at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    [[nodiscard]] double at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

/// Reads an 8- or 16-bit PNG (gray, gray+alpha, RGB, RGBA; alpha dropped,
/// palette expanded) or a binary PPM (P6). Throws IoError.
Image read_image(const std::string& path);

/// Writes an 8-bit PNG with 1 or 3 channels; samples are clamped to [0,1]
/// and rounded.
void write_png(const std::string& path, const Image& image);

/// 0.299 R + 0.587 G + 0.114 B; one-channel images are returned unchanged.
Image to_grayscale(const Image& image);

/// Clamps to [0,1] and rounds every sample to the nearest multiple of 1/255.
Image quantize8(const Image& image);

}  // namespace ntklab
