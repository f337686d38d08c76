#include "sclm/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace sclm {

namespace {

std::string lower_ext(const std::string& path) {
    const size_t dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot + 1);
    for (char& c : ext) c = static_cast<char>(std::tolower(c));
    return ext;
}

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Tensorf from_rgb8(const std::vector<uint8_t>& rgb, int h, int w) {
    Tensorf t(1, 3, h, w);
    constexpr float inv = 1.0f / 255.0f;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t p = (static_cast<size_t>(y) * w + x) * 3;
            t.at(0, 0, y, x) = rgb[p] * inv;
            t.at(0, 1, y, x) = rgb[p + 1] * inv;
            t.at(0, 2, y, x) = rgb[p + 2] * inv;
        }
    return t;
}

std::vector<uint8_t> to_rgb8(const Tensorf& t) {
    std::vector<uint8_t> rgb(static_cast<size_t>(t.h) * t.w * 3);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) {
            const size_t p = (static_cast<size_t>(y) * t.w + x) * 3;
            for (int c = 0; c < 3; ++c) {
                const float v = std::min(1.0f, std::max(0.0f, t.at(0, c, y, x)));
                rgb[p + c] = static_cast<uint8_t>(std::lround(v * 255.0f));
            }
        }
    return rgb;
}

Tensorf load_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("load_image: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("load_image: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("load_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: " + path + " is not a valid PNG");
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    // normalize anything to 8-bit RGB
    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (png_get_color_type(png, info) & PNG_COLOR_MASK_ALPHA)
        png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_rowbytes(png, info) != static_cast<size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("load_image: unexpected PNG row layout in " + path);
    }

    std::vector<uint8_t> rgb(static_cast<size_t>(h) * w * 3);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(rgb, h, w);
}

void save_png(const std::string& path, const Tensorf& t) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("save_image: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("save_image: libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("save_image: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("save_image: write failed for " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, t.w, t.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const std::vector<uint8_t> rgb = to_rgb8(t);
    for (int y = 0; y < t.h; ++y)
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<size_t>(y) * t.w * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Tensorf load_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_image: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw std::runtime_error("load_image: " + path + " is not binary PPM");
    auto next_int = [&f, &path]() {
        // skip whitespace and '#' comments
        for (;;) {
            const int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        int v = -1;
        f >> v;
        if (!f || v < 0) throw std::runtime_error("load_image: bad PPM header in " + path);
        return v;
    };
    const int w = next_int(), h = next_int(), maxval = next_int();
    if (maxval != 255) throw std::runtime_error("load_image: only 8-bit PPM supported");
    f.get();  // single whitespace after maxval
    std::vector<uint8_t> rgb(static_cast<size_t>(h) * w * 3);
    f.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!f) throw std::runtime_error("load_image: truncated PPM " + path);
    return from_rgb8(rgb, h, w);
}

void save_ppm(const std::string& path, const Tensorf& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_image: cannot open " + path);
    f << "P6\n" << t.w << " " << t.h << "\n255\n";
    const std::vector<uint8_t> rgb = to_rgb8(t);
    f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!f) throw std::runtime_error("save_image: write failed for " + path);
}

}  // namespace

bool is_image_path(const std::string& path) {
    const std::string ext = lower_ext(path);
    return ext == "png" || ext == "ppm";
}

Tensorf load_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "png") return load_png(path);
    if (ext == "ppm") return load_ppm(path);
    throw std::runtime_error("load_image: unsupported extension ." + ext + " (png/ppm)");
}

void save_image(const std::string& path, const Tensorf& t) {
    if (t.n != 1 || t.c != 3)
        throw std::invalid_argument("save_image: expected a 1x3xHxW tensor");
    const std::string ext = lower_ext(path);
    if (ext == "png") return save_png(path, t);
    if (ext == "ppm") return save_ppm(path, t);
    throw std::runtime_error("save_image: unsupported extension ." + ext + " (png/ppm)");
}

}  // namespace sclm
