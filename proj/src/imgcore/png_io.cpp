#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "iburd/error.hpp"
#include "iburd/imgcore.hpp"

namespace iburd {

namespace {

struct PngContext {
    char message[256] = {};
    const std::uint8_t* data = nullptr;
    std::size_t size = 0;
    std::size_t cursor = 0;
    std::vector<std::uint8_t>* sink = nullptr;
};

void on_error(png_structp png, png_const_charp msg) {
    auto* ctx = static_cast<PngContext*>(png_get_error_ptr(png));
    std::strncpy(ctx->message, msg, sizeof(ctx->message) - 1);
    std::longjmp(png_jmpbuf(png), 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_from_buffer(png_structp png, png_bytep out, png_size_t n) {
    auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
    if (ctx->cursor + n > ctx->size) {
        png_error(png, "unexpected end of PNG data");
    }
    std::memcpy(out, ctx->data + ctx->cursor, n);
    ctx->cursor += n;
}

void write_to_buffer(png_structp png, png_bytep in, png_size_t n) {
    auto* ctx = static_cast<PngContext*>(png_get_io_ptr(png));
    ctx->sink->insert(ctx->sink->end(), in, in + n);
}

void flush_noop(png_structp) {}

struct Decoded {
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int bit_depth = 0;
    int color_type = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
};

// All libpng calls live here so that longjmp never skips a C++ destructor:
// every object touched after setjmp is owned by the caller.
bool decode(PngContext& ctx, Decoded& out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, on_error, on_warning);
    if (png == nullptr) {
        std::strncpy(ctx.message, "cannot allocate PNG reader", sizeof(ctx.message) - 1);
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        std::strncpy(ctx.message, "cannot allocate PNG info", sizeof(ctx.message) - 1);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &ctx, read_from_buffer);
    png_read_info(png, info);
    out.width = png_get_image_width(png, info);
    out.height = png_get_image_height(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    out.color_type = png_get_color_type(png, info);
    if (out.color_type == PNG_COLOR_TYPE_PALETTE) {
        png_error(png, "unsupported color type: palette");
    }
    if (out.bit_depth != 8 && out.bit_depth != 16) {
        png_error(png, "unsupported bit depth (only 8 and 16 are accepted)");
    }
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    out.pixels.resize(stride * out.height);
    out.rows.resize(out.height);
    for (png_uint_32 y = 0; y < out.height; ++y) {
        out.rows[y] = out.pixels.data() + stride * y;
    }
    png_read_image(png, out.rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

bool encode(PngContext& ctx, int width, int height, int color_type, std::vector<png_bytep>& rows) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, on_error, on_warning);
    if (png == nullptr) {
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, &ctx, write_to_buffer, flush_noop);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

}  // namespace

LoadedImage load_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open PNG file '" + path.string() + "'");
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw FormatError("'" + path.string() + "' is not a PNG file");
    }

    PngContext ctx;
    ctx.data = bytes.data();
    ctx.size = bytes.size();
    Decoded dec;
    if (!decode(ctx, dec)) {
        throw FormatError("cannot decode PNG '" + path.string() + "': " + ctx.message);
    }

    int stored_channels = 0;
    bool has_alpha = false;
    switch (dec.color_type) {
        case PNG_COLOR_TYPE_GRAY: stored_channels = 1; break;
        case PNG_COLOR_TYPE_GRAY_ALPHA: stored_channels = 2; has_alpha = true; break;
        case PNG_COLOR_TYPE_RGB: stored_channels = 3; break;
        case PNG_COLOR_TYPE_RGB_ALPHA: stored_channels = 4; has_alpha = true; break;
        default:
            throw FormatError("unsupported PNG color type " + std::to_string(dec.color_type) + " in '" +
                              path.string() + "'");
    }
    const int color_channels = has_alpha ? stored_channels - 1 : stored_channels;
    const int w = static_cast<int>(dec.width);
    const int h = static_cast<int>(dec.height);
    const double full_scale = dec.bit_depth == 16 ? 65535.0 : 255.0;

    auto sample = [&](int y, int x, int ch) -> double {
        const std::uint8_t* row = dec.rows[static_cast<std::size_t>(y)];
        const std::size_t i = static_cast<std::size_t>(x) * stored_channels + ch;
        if (dec.bit_depth == 16) {
            return static_cast<double>((row[2 * i] << 8) | row[2 * i + 1]) / full_scale;
        }
        return static_cast<double>(row[i]) / full_scale;
    };

    LoadedImage result;
    result.image = ImagePlane(h, w, color_channels);
    if (has_alpha) {
        result.alpha = BinaryMask(h, w);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < color_channels; ++c) {
                result.image.at(c, y, x) = sample(y, x, c);
            }
            if (has_alpha) {
                result.alpha->set(y, x, sample(y, x, color_channels) > 0.5);
            }
        }
    }
    return result;
}

std::vector<std::uint8_t> encode_png(const ImagePlane& img) {
    const int ch = img.channels();
    const std::size_t stride = static_cast<std::size_t>(img.width()) * ch;
    std::vector<std::uint8_t> pixels(stride * img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < ch; ++c) {
                const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                pixels[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x) * ch + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
        }
    }
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
    for (int y = 0; y < img.height(); ++y) {
        rows[static_cast<std::size_t>(y)] = pixels.data() + stride * y;
    }
    std::vector<std::uint8_t> out;
    PngContext ctx;
    ctx.sink = &out;
    if (!encode(ctx, img.width(), img.height(), ch == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, rows)) {
        throw FormatError(std::string("cannot encode PNG: ") + ctx.message);
    }
    return out;
}

void save_png(const ImagePlane& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

}  // namespace iburd
