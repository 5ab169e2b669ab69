#include "afnio/image.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

namespace afnio {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Tensor<float> from_interleaved(const std::vector<unsigned char>& px, int C, int H, int W) {
    Tensor<float> img({C, H, W});
    float* out = img.data();
    const float inv = 1.0f / 255.0f;
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int ch = 0; ch < C; ++ch)
                out[(static_cast<int64_t>(ch) * H + r) * W + c] =
                    static_cast<float>(px[(static_cast<size_t>(r) * W + c) * C + ch]) * inv;
    return img;
}

std::vector<unsigned char> to_interleaved(const Tensor<float>& img) {
    int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    std::vector<unsigned char> px(static_cast<size_t>(C) * H * W);
    const float* in = img.data();
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int ch = 0; ch < C; ++ch) {
                float v = in[(static_cast<int64_t>(ch) * H + r) * W + c];
                v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
                px[(static_cast<size_t>(r) * W + c) * C + ch] =
                    static_cast<unsigned char>(v * 255.0f + 0.5f);
            }
    return px;
}

Tensor<float> read_png_file(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open image: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    std::vector<unsigned char> px;
    int C = 0, H = 0, W = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 width = png_get_image_width(png, info);
    png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    color_type = png_get_color_type(png, info);
    C = (color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
    H = static_cast<int>(height);
    W = static_cast<int>(width);

    size_t rowbytes = png_get_rowbytes(png, info);
    if (rowbytes != static_cast<size_t>(W) * C) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG layout: " + path.string());
    }
    px.resize(static_cast<size_t>(H) * rowbytes);
    std::vector<png_bytep> rows(static_cast<size_t>(H));
    for (int r = 0; r < H; ++r) rows[static_cast<size_t>(r)] = px.data() + static_cast<size_t>(r) * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    return from_interleaved(px, C, H, W);
}

int pnm_token(std::istream& is) {
    // skips whitespace and '#' comments
    while (true) {
        int ch = is.peek();
        if (ch == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(ch)) {
            is.get();
        } else {
            break;
        }
    }
    int v = -1;
    is >> v;
    return v;
}

Tensor<float> read_pnm_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open image: " + path.string());
    char p, kind;
    is.get(p);
    is.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6')) throw std::runtime_error("unsupported PNM type: " + path.string());
    int C = kind == '5' ? 1 : 3;
    int W = pnm_token(is);
    int H = pnm_token(is);
    int maxval = pnm_token(is);
    if (W <= 0 || H <= 0 || maxval != 255) throw std::runtime_error("unsupported PNM header: " + path.string());
    is.get();  // single whitespace after maxval
    std::vector<unsigned char> px(static_cast<size_t>(C) * H * W);
    is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (is.gcount() != static_cast<std::streamsize>(px.size()))
        throw std::runtime_error("truncated PNM payload: " + path.string());
    return from_interleaved(px, C, H, W);
}

}  // namespace

Tensor<float> read_image(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error("cannot open image: " + path.string());
    unsigned char magic[2] = {0, 0};
    probe.read(reinterpret_cast<char*>(magic), 2);
    probe.close();
    if (magic[0] == 0x89 && magic[1] == 'P') return read_png_file(path);
    if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return read_pnm_file(path);
    throw std::runtime_error("unrecognized image format: " + path.string());
}

void write_png(const std::filesystem::path& path, const Tensor<float>& img) {
    if (img.rank() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
        throw std::invalid_argument("write_png: expected [1|3,H,W], got " + shape_str(img.shape()));
    int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    auto px = to_interleaved(img);

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write image: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(W), static_cast<png_uint_32>(H), 8,
                 C == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<size_t>(H));
    for (int r = 0; r < H; ++r) rows[static_cast<size_t>(r)] = px.data() + static_cast<size_t>(r) * W * C;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_pnm(const std::filesystem::path& path, const Tensor<float>& img) {
    if (img.rank() != 3 || (img.dim(0) != 1 && img.dim(0) != 3))
        throw std::invalid_argument("write_pnm: expected [1|3,H,W], got " + shape_str(img.shape()));
    int C = img.dim(0), H = img.dim(1), W = img.dim(2);
    auto px = to_interleaved(img);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write image: " + path.string());
    os << (C == 1 ? "P5" : "P6") << "\n" << W << " " << H << "\n255\n";
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace afnio
