#include "core/io_util.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/errors.hpp"

namespace dlsvm {

void atomic_write_file(const std::string& path,
                       const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw_input("cannot open for writing: " + tmp.string());
    writer(os);
    os.flush();
    if (!os) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw_input("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw_input("cannot rename " + tmp.string() + " to " + path);
  }
}

void atomic_write_file(const std::string& path, const std::string& content) {
  atomic_write_file(path, [&](std::ostream& os) {
    os.write(content.data(), std::streamsize(content.size()));
  });
}

void put_le_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  unsigned char b[4] = {static_cast<unsigned char>(bits & 0xff),
                        static_cast<unsigned char>((bits >> 8) & 0xff),
                        static_cast<unsigned char>((bits >> 16) & 0xff),
                        static_cast<unsigned char>((bits >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_le_f32_array(std::ostream& os, const float* data, size_t n) {
  // fast path for little-endian hosts
  const uint32_t probe = 1;
  if (*reinterpret_cast<const unsigned char*>(&probe) == 1) {
    os.write(reinterpret_cast<const char*>(data), std::streamsize(n * 4));
    return;
  }
  for (size_t i = 0; i < n; ++i) put_le_f32(os, data[i]);
}

void put_le_f32_array(std::string& out, const float* data, size_t n) {
  const uint32_t probe = 1;
  if (*reinterpret_cast<const unsigned char*>(&probe) == 1) {
    out.append(reinterpret_cast<const char*>(data), n * 4);
    return;
  }
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits;
    std::memcpy(&bits, data + i, 4);
    char b[4] = {char(bits & 0xff), char((bits >> 8) & 0xff), char((bits >> 16) & 0xff),
                 char((bits >> 24) & 0xff)};
    out.append(b, 4);
  }
}

float get_le_f32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t bits = uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
                  (uint32_t(b[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void get_le_f32_array(std::istream& is, float* data, size_t n) {
  const uint32_t probe = 1;
  if (*reinterpret_cast<const unsigned char*>(&probe) == 1) {
    is.read(reinterpret_cast<char*>(data), std::streamsize(n * 4));
    return;
  }
  for (size_t i = 0; i < n; ++i) data[i] = get_le_f32(is);
}

void get_le_f32_array(const char* src, float* data, size_t n) {
  const uint32_t probe = 1;
  if (*reinterpret_cast<const unsigned char*>(&probe) == 1) {
    std::memcpy(data, src, n * 4);
    return;
  }
  for (size_t i = 0; i < n; ++i) {
    const unsigned char* b = reinterpret_cast<const unsigned char*>(src) + i * 4;
    uint32_t bits = uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
                    (uint32_t(b[3]) << 24);
    std::memcpy(data + i, &bits, 4);
  }
}

std::string fmt_f32(float v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", double(v));
  return buf;
}

std::string fmt_f64(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fnv1a_hex(const void* data, size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_entire_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw_input("cannot read: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace dlsvm
