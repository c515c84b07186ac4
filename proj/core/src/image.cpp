#include "ntklab/image.hpp"

#include "ntklab/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

namespace ntklab {

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
    if (!f) throw IoError("cannot open '" + path + "'");
    return f;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

Image read_png(const std::string& path) {
    FilePtr file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot allocate read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng: cannot allocate info struct");
    }
    std::vector<png_bytep> rows;
    std::vector<std::uint8_t> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("'" + path + "' is not a readable PNG");
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);

    const auto width = static_cast<int>(png_get_image_width(png, info));
    const auto height = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    buffer.resize(stride * static_cast<std::size_t>(height));
    rows.resize(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = buffer.data() + stride * y;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(width, height, channels == 1 ? 1 : 3);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* row = rows[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = row[x * channels + c] / 255.0;
        }
    }
    return img;
}

// Skips whitespace and '#' comments between PPM header tokens.
int read_ppm_int(std::istream& in) {
    for (;;) {
        const int ch = in.peek();
        if (ch == '#') {
            std::string comment;
            std::getline(in, comment);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
    int v = -1;
    in >> v;
    if (!in) throw IoError("malformed PPM header");
    return v;
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P6") throw IoError("'" + path + "' is not a binary PPM (P6)");
    const int width = read_ppm_int(in);
    const int height = read_ppm_int(in);
    const int maxval = read_ppm_int(in);
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
        throw IoError("'" + path + "': invalid PPM dimensions or maxval");
    }
    in.get();
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height * 3 * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw IoError("'" + path + "': truncated PPM pixel data");
    }
    Image img(width, height, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const unsigned v = bytes == 2 ? (raw[2 * i] << 8u) | raw[2 * i + 1] : raw[i];
        img.data[i] = static_cast<double>(v) / maxval;
    }
    return img;
}

}  // namespace

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c),
           fill) {}

Image read_image(const std::string& path) {
    unsigned char sig[8] = {};
    {
        FilePtr f = open_file(path, "rb");
        if (std::fread(sig, 1, 8, f.get()) < 2) throw IoError("'" + path + "' is too short");
    }
    if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
    if (sig[0] == 'P' && sig[1] == '6') return read_ppm(path);
    throw IoError("'" + path + "': unsupported image format (PNG or binary PPM expected)");
}

void write_png(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3) {
        throw IoError("write_png: only 1- and 3-channel images are supported");
    }
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng: cannot allocate write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng: cannot allocate info struct");
    }
    std::vector<std::uint8_t> bytes(image.data.size());
    std::transform(image.data.begin(), image.data.end(), bytes.begin(), to_byte);
    std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
    const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
    for (int y = 0; y < image.height; ++y) {
        rows[static_cast<std::size_t>(y)] = bytes.data() + stride * y;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng: failed writing '" + path + "'");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image to_grayscale(const Image& image) {
    if (image.channels == 1) return image;
    Image gray(image.width, image.height, 1);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            gray.at(x, y, 0) =
                0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2);
        }
    }
    return gray;
}

Image quantize8(const Image& image) {
    Image out = image;
    for (double& v : out.data) v = to_byte(v) / 255.0;
    return out;
}

}  // namespace ntklab
