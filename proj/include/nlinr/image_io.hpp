#pragma once

#include <string>
#include <vector>

#include "nlinr/tensor.hpp"

namespace nlinr {

/// Load one grayscale image as an n1 x n2 matrix with values in [0,1].
/// Supports binary PGM (P5, 8-bit) and PNG (gray/RGB, 8/16-bit; color is
/// averaged to luminance).
Matrix load_image(const std::string& path);

/// Write an 8-bit binary PGM; values are clamped to [0,1] and scaled by 255.
void save_pgm(const std::string& path, const Matrix& img);

/// Load a frame sequence. `path` is either a single NLT1 file (3-way tensor)
/// or a directory of frames, sorted by filename (*.pgm / *.png).
DenseTensor load_sequence(const std::string& path);

/// Save a stack as frame_%04d.pgm files under `dir` (created if missing).
void save_sequence(const std::string& dir, const DenseTensor& stack);

/// Frame file names under a directory, sorted; empty vector if none.
std::vector<std::string> list_frames(const std::string& dir);

}  // namespace nlinr
