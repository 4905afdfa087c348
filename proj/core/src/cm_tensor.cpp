#include "jigcm/cm_tensor.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "jigcm/errors.hpp"

namespace jigcm {
namespace {

std::uint32_t swap_to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  v = swap_to_little(v);
  out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return swap_to_little(v);
}

}  // namespace

std::size_t CMTensor::finite_count() const {
  std::size_t k = 0;
  for (float v : scores)
    if (std::isfinite(v)) ++k;
  return k;
}

void save_cm(const CMTensor& t, const std::filesystem::path& path) {
  if (t.scores.size() != static_cast<std::size_t>(t.n) * 16 * t.n)
    throw UsageError("CM tensor size inconsistent with N");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write("CMT1", 4);
  write_u32(out, static_cast<std::uint32_t>(t.n));
  const char header[4] = {static_cast<char>(t.type), 0, 0, 0};
  out.write(header, 4);
  for (float v : t.scores) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
  }
}

CMTensor load_cm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CMT1", 4) != 0) throw DataError("not a CMT1 file: " + path.string());
  const std::uint32_t n = read_u32(in);
  char header[4] = {};
  in.read(header, 4);
  if (!in) throw DataError("truncated CMT1 header");
  if (header[0] != 1 && header[0] != 2) throw DataError("CMT1 file has invalid problem type");
  const std::size_t count = static_cast<std::size_t>(n) * 16 * n;
  if (bytes != 12 + 4 * count) throw DataError("CMT1 payload size does not match N");
  CMTensor t(static_cast<int>(n), static_cast<ProblemType>(header[0]));
  for (float& v : t.scores) {
    const std::uint32_t bits = read_u32(in);
    std::memcpy(&v, &bits, 4);
  }
  if (!in) throw DataError("truncated CMT1 payload");
  return t;
}

}  // namespace jigcm
