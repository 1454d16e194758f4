#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evbench/bytes.hpp"
#include "evbench/sha256.hpp"

namespace evbench {

enum class Label { Benign, Malicious, Unknown };

std::string_view to_string(Label label) noexcept;
/// Accepts "benign"/"malicious"/"unknown" (case-insensitive).
Label parse_label(std::string_view text);

/// Immutable file payload plus identity. Copies share the byte buffer.
class RawBinary {
 public:
  explicit RawBinary(Bytes bytes, Label label = Label::Unknown, std::string origin = {});

  static RawBinary from_file(const std::string& path, Label label = Label::Unknown);

  ByteView bytes() const { return *bytes_; }
  std::size_t size() const { return bytes_->size(); }
  const Digest& sha256() const { return sha256_; }
  std::string sha256_hex() const { return digest_hex(sha256_); }
  Label label() const { return label_; }
  const std::string& origin() const { return origin_; }

 private:
  std::shared_ptr<const Bytes> bytes_;
  Digest sha256_{};
  Label label_;
  std::string origin_;
};

namespace pe {

inline constexpr std::size_t kDosHeaderSize = 0x40;
inline constexpr std::size_t kCoffHeaderSize = 20;
inline constexpr std::size_t kSectionHeaderSize = 40;
inline constexpr std::size_t kChecksumFieldOffset = 64;  // within the optional header
inline constexpr std::uint16_t kMagicPe32 = 0x10B;
inline constexpr std::uint16_t kMagicPe32Plus = 0x20B;

inline constexpr std::size_t kImportDirectory = 1;
inline constexpr std::size_t kCertificateDirectory = 4;
inline constexpr std::size_t kDebugDirectory = 6;

inline constexpr std::uint32_t kScnCode = 0x00000020;
inline constexpr std::uint32_t kScnInitializedData = 0x00000040;
inline constexpr std::uint32_t kScnMemExecute = 0x20000000;
inline constexpr std::uint32_t kScnMemRead = 0x40000000;
inline constexpr std::uint32_t kScnMemWrite = 0x80000000;

inline constexpr std::size_t kImportDescriptorSize = 20;
inline constexpr std::size_t kDebugEntrySize = 28;

}  // namespace pe

struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  bool contains(std::size_t off) const { return off >= begin && off < end; }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct DataDirectory {
  std::uint32_t rva = 0;
  std::uint32_t size = 0;
  friend bool operator==(const DataDirectory&, const DataDirectory&) = default;
};

struct DosHeader {
  std::uint32_t e_lfanew = 0;
};

struct CoffHeader {
  std::uint16_t machine = 0;
  std::uint16_t number_of_sections = 0;
  std::uint16_t size_of_optional_header = 0;
  std::uint16_t characteristics = 0;
};

struct OptionalHeader {
  bool pe32_plus = false;
  std::uint32_t entry_point_rva = 0;
  std::uint64_t image_base = 0;
  std::uint32_t section_alignment = 0;
  std::uint32_t file_alignment = 0;
  std::uint32_t size_of_image = 0;
  std::uint32_t size_of_headers = 0;
  std::uint32_t checksum = 0;
  std::vector<DataDirectory> data_directories;
};

struct Section {
  std::array<std::uint8_t, 8> name{};
  std::uint32_t virtual_size = 0;
  std::uint32_t virtual_address = 0;
  std::uint32_t raw_size = 0;
  std::uint32_t raw_pointer = 0;
  std::uint32_t characteristics = 0;

  /// Name up to the first NUL.
  std::string name_string() const;
  void set_name(std::string_view name);
  /// Mapped virtual length; falls back to raw_size when virtual_size is 0.
  std::uint32_t virtual_extent() const { return virtual_size ? virtual_size : raw_size; }
  ByteRange raw_range() const { return {raw_pointer, std::size_t{raw_pointer} + raw_size}; }
};

enum class ParseMode { Lenient, Strict };

struct Violation {
  std::string message;
  std::optional<std::size_t> section;  // index of the offending section, if any
};

/// Structured view over a PE image. Only the fields mutations need are
/// modeled; every other byte is carried verbatim in `bytes` and written back
/// unchanged by serialize().
struct PeFile {
  DosHeader dos;
  CoffHeader coff;
  OptionalHeader optional;
  std::vector<Section> sections;
  Bytes bytes;
  std::vector<Violation> violations;  // populated by lenient parsing

  std::size_t coff_offset() const { return std::size_t{dos.e_lfanew} + 4; }
  std::size_t optional_offset() const { return coff_offset() + pe::kCoffHeaderSize; }
  std::size_t checksum_offset() const { return optional_offset() + pe::kChecksumFieldOffset; }
  std::size_t entry_point_offset() const { return optional_offset() + 16; }
  std::size_t size_of_image_offset() const { return optional_offset() + 56; }
  std::size_t data_directory_offset() const {
    return optional_offset() + (optional.pe32_plus ? 112 : 96);
  }
  std::size_t section_table_offset() const {
    return optional_offset() + coff.size_of_optional_header;
  }
  std::size_t section_header_offset(std::size_t index) const {
    return section_table_offset() + index * pe::kSectionHeaderSize;
  }

  DataDirectory directory(std::size_t index) const;
  /// End of the last section's raw data (0 if no section has raw data).
  std::size_t sections_raw_end() const;
  /// Attribute certificate table; its directory "rva" is a file offset.
  std::optional<ByteRange> certificate_range() const;
  /// Bytes past every section's raw data and past the certificate table.
  ByteRange overlay() const;
  ByteView section_data(std::size_t index) const;
  /// Room left in the header area for more section headers.
  std::size_t section_table_slack() const;
};

PeFile parse_pe(ByteView bytes, ParseMode mode = ParseMode::Lenient);
PeFile parse_pe(const RawBinary& bin, ParseMode mode = ParseMode::Lenient);

/// Writes the modeled fields back over `pe.bytes`. Identity for an unmodified
/// parse result.
Bytes serialize(const PeFile& pe);

/// Standard PE image checksum: 16-bit little-endian word sum folded with
/// end-around carry, skipping the checksum field, plus the file length.
std::uint32_t compute_pe_checksum(ByteView bytes);

std::uint32_t rva_to_offset(const PeFile& pe, std::uint32_t rva);
std::optional<std::uint32_t> try_rva_to_offset(const PeFile& pe, std::uint32_t rva);

std::vector<Violation> validate(const PeFile& pe);

struct ImportEntry {
  std::string dll;
  std::string function;  // "#<ordinal>" for ordinal imports
  friend bool operator==(const ImportEntry&, const ImportEntry&) = default;
};

/// Walks the import descriptors. Returns an empty list when the directory is
/// absent or unreadable.
std::vector<ImportEntry> read_imports(const PeFile& pe);

struct DebugEntry {
  std::size_t entry_offset = 0;  // file offset of the 28-byte directory entry
  std::uint32_t timestamp = 0;
  std::uint32_t type = 0;
  std::uint32_t size_of_data = 0;
  std::uint32_t address_of_raw_data = 0;
  std::uint32_t pointer_to_raw_data = 0;
};

std::vector<DebugEntry> read_debug_directory(const PeFile& pe);

}  // namespace evbench
