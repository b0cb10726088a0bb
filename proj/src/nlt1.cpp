#include "nlinr/nlt1.hpp"

#include <cstring>
#include <fstream>
#include <limits>

namespace nlinr {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw io_error("NLT1: truncated header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(os, u);
}

float get_f32(std::istream& is) {
    const uint32_t u = get_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace

void write_nlt1(std::ostream& os, const DenseTensor& t) {
    os.write("NLT1", 4);
    put_u32(os, static_cast<uint32_t>(t.ndim()));
    for (int64_t e : t.dims) {
        if (e > std::numeric_limits<uint32_t>::max()) throw io_error("NLT1: extent too large");
        put_u32(os, static_cast<uint32_t>(e));
    }
    for (double v : t.data) put_f32(os, static_cast<float>(v));
    if (!os) throw io_error("NLT1: write failed");
}

DenseTensor read_nlt1(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "NLT1", 4) != 0) throw io_error("NLT1: bad magic");
    const uint32_t n = get_u32(is);
    if (n == 0 || n > 16) throw io_error("NLT1: implausible rank");
    std::vector<int64_t> dims(n);
    int64_t total = 1;
    for (uint32_t k = 0; k < n; ++k) {
        dims[k] = static_cast<int64_t>(get_u32(is));
        if (dims[k] <= 0) throw io_error("NLT1: zero extent");
        total *= dims[k];
        if (total > (int64_t{1} << 34)) throw io_error("NLT1: tensor too large");
    }
    DenseTensor t(dims);
    for (int64_t i = 0; i < total; ++i) t[i] = static_cast<double>(get_f32(is));
    if (!is) throw io_error("NLT1: truncated payload");
    return t;
}

void save_nlt1(const std::string& path, const DenseTensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot open for write: " + path);
    write_nlt1(os, t);
}

DenseTensor load_nlt1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    return read_nlt1(is);
}

}  // namespace nlinr
