#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dlsvm {

struct GrayImage {
  size_t h = 0, w = 0;
  std::vector<uint8_t> pixels;  // row-major, h*w
};

// Reads a PNG (any color type, folded to 8-bit gray) or a PGM (P5/P2).
GrayImage read_gray_image(const std::string& path);

// Binary PGM, maxval 255.
void write_pgm(const std::string& path, const GrayImage& img);

}  // namespace dlsvm
