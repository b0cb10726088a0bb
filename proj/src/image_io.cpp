#include "nlinr/image_io.hpp"

#include "nlinr/nlt1.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace nlinr {

namespace {

bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    std::string tail = s.substr(s.size() - suf.size());
    std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
    return tail == suf;
}

// skips whitespace and '#' comment lines in a PGM header
int pgm_token(std::istream& is) {
    int c = is.get();
    while (is && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (is && c != '\n') c = is.get();
        c = is.get();
    }
    int v = 0;
    bool any = false;
    while (is && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = is.get();
    }
    if (!any) throw io_error("PGM: malformed header");
    return v;
}

Matrix load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || m1 != '5') throw io_error("PGM: only binary (P5) supported: " + path);
    const int w = pgm_token(is);
    const int h = pgm_token(is);
    const int maxval = pgm_token(is);
    if (w <= 0 || h <= 0) throw io_error("PGM: bad size: " + path);
    if (maxval <= 0 || maxval > 255) throw io_error("PGM: only 8-bit supported: " + path);
    std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw io_error("PGM: truncated payload: " + path);
    Matrix img(h, w);
    for (int64_t i = 0; i < img.size(); ++i)
        img.a[static_cast<size_t>(i)] = static_cast<double>(buf[static_cast<size_t>(i)]) / maxval;
    return img;
}

Matrix load_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw io_error("cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw io_error("PNG: init failed: " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw io_error("PNG: decode failed: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_swap(png);  // little-endian 16-bit samples
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    const int out_depth = png_get_bit_depth(png, info);
    const size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> row(rowbytes);
    Matrix img(static_cast<int64_t>(h), static_cast<int64_t>(w));
    const double scale = out_depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int c = 0; c < channels; ++c) {
                if (out_depth == 16) {
                    const size_t o = (static_cast<size_t>(x) * channels + c) * 2;
                    acc += static_cast<double>(row[o] | (row[o + 1] << 8));
                } else {
                    acc += static_cast<double>(row[static_cast<size_t>(x) * channels + c]);
                }
            }
            img(y, x) = acc / (channels * scale);
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

}  // namespace

Matrix load_image(const std::string& path) {
    if (has_suffix(path, ".pgm")) return load_pgm(path);
    if (has_suffix(path, ".png")) return load_png(path);
    throw io_error("unsupported image format: " + path);
}

void save_pgm(const std::string& path, const Matrix& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + path);
    os << "P5\n" << img.cols << " " << img.rows << "\n255\n";
    std::vector<unsigned char> buf(static_cast<size_t>(img.size()));
    for (int64_t i = 0; i < img.size(); ++i) {
        double v = img.a[static_cast<size_t>(i)];
        v = std::min(1.0, std::max(0.0, v));
        buf[static_cast<size_t>(i)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw io_error("PGM: write failed: " + path);
}

std::vector<std::string> list_frames(const std::string& dir) {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(dir, ec)) {
        if (!e.is_regular_file()) continue;
        const std::string p = e.path().string();
        if (has_suffix(p, ".pgm") || has_suffix(p, ".png")) names.push_back(p);
    }
    if (ec) throw io_error("cannot list directory: " + dir);
    std::sort(names.begin(), names.end());
    return names;
}

DenseTensor load_sequence(const std::string& path) {
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw io_error("cannot open: " + path);
        char magic[4] = {};
        is.read(magic, 4);
        is.close();
        if (std::string(magic, 4) == "NLT1") return load_nlt1(path);
        throw io_error("sequence file is not NLT1: " + path);
    }
    if (!fs::is_directory(path, ec)) throw io_error("no such sequence: " + path);
    const std::vector<std::string> names = list_frames(path);
    if (names.empty()) throw io_error("no frames (*.pgm, *.png) in: " + path);
    Matrix first = load_image(names[0]);
    DenseTensor stack({first.rows, first.cols, static_cast<int64_t>(names.size())});
    const int64_t n3 = stack.dims[2];
    for (int64_t f = 0; f < n3; ++f) {
        Matrix img = f == 0 ? std::move(first) : load_image(names[static_cast<size_t>(f)]);
        if (img.rows != stack.dims[0] || img.cols != stack.dims[1])
            throw io_error("inconsistent frame size: " + names[static_cast<size_t>(f)]);
        for (int64_t i = 0; i < stack.dims[0]; ++i)
            for (int64_t j = 0; j < stack.dims[1]; ++j)
                stack.at({i, j, f}) = img(i, j);
    }
    return stack;
}

void save_sequence(const std::string& dir, const DenseTensor& stack) {
    if (stack.ndim() != 3) throw std::invalid_argument("save_sequence: need a 3-way stack");
    fs::create_directories(dir);
    const int64_t n1 = stack.dims[0], n2 = stack.dims[1], n3 = stack.dims[2];
    for (int64_t f = 0; f < n3; ++f) {
        Matrix img(n1, n2);
        for (int64_t i = 0; i < n1; ++i)
            for (int64_t j = 0; j < n2; ++j) img(i, j) = stack.at({i, j, f});
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.pgm", static_cast<int>(f));
        save_pgm((fs::path(dir) / name).string(), img);
    }
}

}  // namespace nlinr
