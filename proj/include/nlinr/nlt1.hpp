#pragma once

#include <iosfwd>
#include <string>

#include "nlinr/tensor.hpp"

namespace nlinr {

// Raw tensor container "NLT1": magic bytes `NLT1`, u32 little-endian rank N,
// N u32 little-endian extents, then product(dims) float32 little-endian
// values, row-major with the last index varying fastest.

void write_nlt1(std::ostream& os, const DenseTensor& t);
DenseTensor read_nlt1(std::istream& is);

void save_nlt1(const std::string& path, const DenseTensor& t);
DenseTensor load_nlt1(const std::string& path);

}  // namespace nlinr
