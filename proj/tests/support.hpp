#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evbench/bytes.hpp"
#include "evbench/corpus.hpp"
#include "evbench/pe.hpp"
#include "evbench/rng.hpp"

namespace testsupport {

using evbench::Bytes;

/// Hand-laid PE32 image: one `.text` section at VA 0x1000, file offset
/// `headers_size`, raw size 0x200. Every field is written from the format
/// rules, independent of the synthetic generator.
struct HandPe {
  std::uint32_t e_lfanew = 0x40;
  std::uint32_t headers_size = 0x400;
  std::uint32_t entry = 0x1010;
  std::uint32_t virtual_size = 0x100;
  std::size_t overlay = 0;
};

inline Bytes build_hand_pe(const HandPe& h = {}) {
  const std::uint32_t raw_size = 0x200;
  Bytes b(h.headers_size + raw_size + h.overlay, 0);
  b[0] = 'M';
  b[1] = 'Z';
  evbench::write_le32(b, 0x3C, h.e_lfanew);
  const std::size_t pe = h.e_lfanew;
  b[pe] = 'P';
  b[pe + 1] = 'E';
  const std::size_t coff = pe + 4;
  evbench::write_le16(b, coff + 0, 0x014C);  // i386
  evbench::write_le16(b, coff + 2, 1);
  evbench::write_le16(b, coff + 16, 224);
  evbench::write_le16(b, coff + 18, 0x0102);
  const std::size_t opt = coff + 20;
  evbench::write_le16(b, opt + 0, 0x10B);
  evbench::write_le32(b, opt + 4, raw_size);          // SizeOfCode
  evbench::write_le32(b, opt + 16, h.entry);          // AddressOfEntryPoint
  evbench::write_le32(b, opt + 20, 0x1000);           // BaseOfCode
  evbench::write_le32(b, opt + 28, 0x400000);         // ImageBase
  evbench::write_le32(b, opt + 32, 0x1000);           // SectionAlignment
  evbench::write_le32(b, opt + 36, 0x200);            // FileAlignment
  evbench::write_le16(b, opt + 40, 4);                // MajorOperatingSystemVersion
  evbench::write_le16(b, opt + 48, 4);                // MajorSubsystemVersion
  evbench::write_le32(b, opt + 56, 0x2000);           // SizeOfImage
  evbench::write_le32(b, opt + 60, h.headers_size);   // SizeOfHeaders
  evbench::write_le16(b, opt + 68, 3);                // console subsystem
  evbench::write_le32(b, opt + 92, 16);               // NumberOfRvaAndSizes
  const std::size_t sec = opt + 224;
  const char name[8] = {'.', 't', 'e', 'x', 't', 0, 0, 0};
  for (int i = 0; i < 8; ++i) b[sec + i] = static_cast<std::uint8_t>(name[i]);
  evbench::write_le32(b, sec + 8, h.virtual_size);
  evbench::write_le32(b, sec + 12, 0x1000);
  evbench::write_le32(b, sec + 16, raw_size);
  evbench::write_le32(b, sec + 20, h.headers_size);
  evbench::write_le32(b, sec + 36, 0x60000020);
  for (std::uint32_t i = 0; i < h.virtual_size; ++i) b[h.headers_size + i] = static_cast<std::uint8_t>(0x90 + i % 7);
  for (std::size_t i = 0; i < h.overlay; ++i) b[h.headers_size + raw_size + i] = static_cast<std::uint8_t>(i);
  return b;
}

/// Word-fold PE checksum written straight from its definition: the full
/// ones-complement sum is accumulated first and folded once at the end.
inline std::uint32_t checksum_oracle(const Bytes& b) {
  const std::size_t field = std::size_t{evbench::read_le32(b, 0x3C)} + 88;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < b.size(); i += 2) {
    if (i >= field && i < field + 4) continue;
    total += b[i] + (i + 1 < b.size() ? std::uint64_t{b[i + 1]} << 8 : 0);
  }
  while (total >> 16) total = (total & 0xFFFF) + (total >> 16);
  return static_cast<std::uint32_t>(total + b.size());
}

inline Bytes synthetic(std::uint64_t seed, bool malicious = false) {
  evbench::Rng rng(seed);
  auto opts = evbench::random_synthetic_options(rng, malicious);
  return evbench::make_synthetic_pe(rng, opts).bytes;
}

inline Bytes synthetic_with(std::uint64_t seed, const evbench::SyntheticPeOptions& opts) {
  evbench::Rng rng(seed);
  return evbench::make_synthetic_pe(rng, opts).bytes;
}

/// Offsets where two buffers differ, over their common prefix.
inline std::vector<std::size_t> diff_offsets(const Bytes& a, const Bytes& b) {
  std::vector<std::size_t> out;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) out.push_back(i);
  }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("evbench-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
