#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dlsvm {

// Writes via a temp file in the same directory, then renames into place, so
// readers never observe a partially written file.
void atomic_write_file(const std::string& path, const std::function<void(std::ostream&)>& writer);
void atomic_write_file(const std::string& path, const std::string& content);

// Little-endian scalar packing, independent of host byte order.
void put_le_f32(std::ostream& os, float v);
void put_le_f32_array(std::ostream& os, const float* data, size_t n);
void put_le_f32_array(std::string& out, const float* data, size_t n);
float get_le_f32(std::istream& is);
void get_le_f32_array(std::istream& is, float* data, size_t n);
void get_le_f32_array(const char* src, float* data, size_t n);

// Shortest decimal forms that round-trip exactly (max_digits10).
std::string fmt_f32(float v);
std::string fmt_f64(double v);

// FNV-1a over raw bytes, hex string; used for the preprocessing-stats checksum.
std::string fnv1a_hex(const void* data, size_t n);

std::string read_entire_file(const std::string& path);

}  // namespace dlsvm
