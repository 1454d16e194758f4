#include "evbench/pe.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>

#include "evbench/error.hpp"

namespace evbench {

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::Benign: return "benign";
    case Label::Malicious: return "malicious";
    case Label::Unknown: return "unknown";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "benign") return Label::Benign;
  if (lower == "malicious") return Label::Malicious;
  if (lower == "unknown") return Label::Unknown;
  throw Error(Errc::InvalidArgument, "unknown label '" + std::string(text) + "'");
}

RawBinary::RawBinary(Bytes bytes, Label label, std::string origin)
    : label_(label), origin_(std::move(origin)) {
  if (bytes.empty()) throw Error(Errc::InvalidArgument, "RawBinary requires at least one byte");
  sha256_ = evbench::sha256(bytes);
  bytes_ = std::make_shared<const Bytes>(std::move(bytes));
}

RawBinary RawBinary::from_file(const std::string& path, Label label) {
  return RawBinary(read_file(path), label, path);
}

std::string Section::name_string() const {
  auto end = std::find(name.begin(), name.end(), std::uint8_t{0});
  return std::string(name.begin(), end);
}

void Section::set_name(std::string_view text) {
  name.fill(0);
  std::copy_n(text.begin(), std::min<std::size_t>(text.size(), name.size()), name.begin());
}

DataDirectory PeFile::directory(std::size_t index) const {
  if (index >= optional.data_directories.size()) return {};
  return optional.data_directories[index];
}

std::size_t PeFile::sections_raw_end() const {
  std::size_t end = 0;
  for (const auto& s : sections) {
    if (s.raw_size != 0) end = std::max(end, s.raw_range().end);
  }
  return end;
}

std::optional<ByteRange> PeFile::certificate_range() const {
  DataDirectory cert = directory(pe::kCertificateDirectory);
  if (cert.rva == 0 || cert.size == 0) return std::nullopt;
  return ByteRange{cert.rva, std::size_t{cert.rva} + cert.size};
}

ByteRange PeFile::overlay() const {
  std::size_t start = std::max(sections_raw_end(), std::size_t{optional.size_of_headers});
  if (auto cert = certificate_range()) start = std::max(start, cert->end);
  start = std::min(start, bytes.size());
  return {start, bytes.size()};
}

ByteView PeFile::section_data(std::size_t index) const {
  const Section& s = sections.at(index);
  ByteRange r = s.raw_range();
  if (r.end > bytes.size()) throw Error(Errc::Truncated, "section raw data extends past EOF");
  return ByteView(bytes).subspan(r.begin, r.size());
}

std::size_t PeFile::section_table_slack() const {
  std::size_t limit = optional.size_of_headers;
  for (const auto& s : sections) {
    if (s.raw_size != 0 && s.raw_pointer != 0) limit = std::min<std::size_t>(limit, s.raw_pointer);
  }
  limit = std::min(limit, bytes.size());
  std::size_t table_end = section_header_offset(sections.size());
  return limit > table_end ? limit - table_end : 0;
}

namespace {

void add(std::vector<Violation>& out, std::string message, std::optional<std::size_t> section = {}) {
  out.push_back({std::move(message), section});
}

}  // namespace

PeFile parse_pe(ByteView b, ParseMode mode) {
  if (b.size() < 2 || b[0] != 'M' || b[1] != 'Z') throw Error(Errc::NotPe, "missing MZ signature");
  if (b.size() < pe::kDosHeaderSize) throw Error(Errc::Truncated, "DOS header extends past EOF");

  PeFile pe;
  pe.dos.e_lfanew = read_le32(b, 0x3C);
  const std::size_t nt = pe.dos.e_lfanew;
  if (nt + 4 + pe::kCoffHeaderSize > b.size()) throw Error(Errc::Truncated, "NT headers extend past EOF");
  if (b[nt] != 'P' || b[nt + 1] != 'E' || b[nt + 2] != 0 || b[nt + 3] != 0) {
    throw Error(Errc::NotPe, "e_lfanew does not point at PE\\0\\0");
  }

  const std::size_t coff = nt + 4;
  pe.coff.machine = read_le16(b, coff);
  pe.coff.number_of_sections = read_le16(b, coff + 2);
  pe.coff.size_of_optional_header = read_le16(b, coff + 16);
  pe.coff.characteristics = read_le16(b, coff + 18);

  const std::size_t opt = pe.optional_offset();
  if (pe.coff.size_of_optional_header < 2 || opt + pe.coff.size_of_optional_header > b.size()) {
    throw Error(Errc::Truncated, "optional header extends past EOF");
  }
  const std::uint16_t magic = read_le16(b, opt);
  if (magic != pe::kMagicPe32 && magic != pe::kMagicPe32Plus) {
    throw Error(Errc::Malformed, "unknown optional header magic");
  }
  pe.optional.pe32_plus = magic == pe::kMagicPe32Plus;
  const std::size_t dir_start = pe.optional.pe32_plus ? 112 : 96;
  if (pe.coff.size_of_optional_header < dir_start) {
    throw Error(Errc::Truncated, "optional header too small for its magic");
  }
  pe.optional.entry_point_rva = read_le32(b, opt + 16);
  pe.optional.image_base = pe.optional.pe32_plus ? read_le64(b, opt + 24) : read_le32(b, opt + 28);
  pe.optional.section_alignment = read_le32(b, opt + 32);
  pe.optional.file_alignment = read_le32(b, opt + 36);
  pe.optional.size_of_image = read_le32(b, opt + 56);
  pe.optional.size_of_headers = read_le32(b, opt + 60);
  pe.optional.checksum = read_le32(b, opt + pe::kChecksumFieldOffset);

  std::vector<Violation> issues;
  std::uint32_t dir_count = read_le32(b, opt + dir_start - 4);
  const std::size_t dir_room = (pe.coff.size_of_optional_header - dir_start) / 8;
  if (dir_count > dir_room) {
    add(issues, "NumberOfRvaAndSizes exceeds the optional header");
    dir_count = static_cast<std::uint32_t>(dir_room);
  }
  dir_count = std::min<std::uint32_t>(dir_count, 16);
  for (std::uint32_t i = 0; i < dir_count; ++i) {
    std::size_t off = opt + dir_start + 8 * i;
    pe.optional.data_directories.push_back({read_le32(b, off), read_le32(b, off + 4)});
  }

  const std::size_t table = pe.section_table_offset();
  for (std::size_t i = 0; i < pe.coff.number_of_sections; ++i) {
    std::size_t off = table + i * pe::kSectionHeaderSize;
    if (off + pe::kSectionHeaderSize > b.size()) {
      if (mode == ParseMode::Strict || i == 0) {
        throw Error(Errc::Truncated, "section table extends past EOF");
      }
      break;
    }
    Section s;
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(off), 8, s.name.begin());
    s.virtual_size = read_le32(b, off + 8);
    s.virtual_address = read_le32(b, off + 12);
    s.raw_size = read_le32(b, off + 16);
    s.raw_pointer = read_le32(b, off + 20);
    s.characteristics = read_le32(b, off + 36);
    pe.sections.push_back(s);
  }

  pe.bytes.assign(b.begin(), b.end());
  for (auto& v : validate(pe)) issues.push_back(std::move(v));
  if (mode == ParseMode::Strict && !issues.empty()) {
    throw Error(Errc::Malformed, issues.front().message);
  }
  pe.violations = std::move(issues);
  return pe;
}

PeFile parse_pe(const RawBinary& bin, ParseMode mode) { return parse_pe(bin.bytes(), mode); }

std::vector<Violation> validate(const PeFile& pe) {
  std::vector<Violation> out;
  const std::size_t len = pe.bytes.size();
  const std::size_t nt = pe.dos.e_lfanew;
  if (nt + 4 > len || pe.bytes[nt] != 'P' || pe.bytes[nt + 1] != 'E' || pe.bytes[nt + 2] != 0 ||
      pe.bytes[nt + 3] != 0) {
    add(out, "e_lfanew does not point at PE signature");
  }
  if (pe.coff.number_of_sections != pe.sections.size()) {
    add(out, "NumberOfSections (" + std::to_string(pe.coff.number_of_sections) +
                 ") does not match section table (" + std::to_string(pe.sections.size()) + ")");
  }
  const std::size_t table_end = pe.section_header_offset(pe.sections.size());
  if (table_end > len) add(out, "section table extends past EOF");

  const std::uint32_t fa = pe.optional.file_alignment;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const Section& s = pe.sections[i];
    const std::string tag = "section " + std::to_string(i) + " (" + s.name_string() + ")";
    if (s.raw_size != 0) {
      if (s.raw_range().end > len) add(out, tag + ": raw data extends past EOF", i);
      if (s.raw_pointer < table_end) add(out, tag + ": raw data overlaps the section table", i);
    }
    if (s.raw_pointer != 0 && fa != 0 && s.raw_pointer % fa != 0) {
      add(out, tag + ": raw pointer not a multiple of FileAlignment", i);
    }
  }

  std::vector<std::size_t> order(pe.sections.size());
  std::iota(order.begin(), order.end(), 0);
  std::erase_if(order, [&](std::size_t i) { return pe.sections[i].raw_size == 0; });
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    return pe.sections[a].raw_pointer < pe.sections[c].raw_pointer;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const Section& prev = pe.sections[order[k - 1]];
    const Section& cur = pe.sections[order[k]];
    if (prev.raw_range().end > cur.raw_pointer) {
      add(out, "raw ranges of sections " + std::to_string(order[k - 1]) + " and " +
                   std::to_string(order[k]) + " overlap",
          order[k]);
    }
  }

  for (std::size_t i = 1; i < pe.sections.size(); ++i) {
    const Section& prev = pe.sections[i - 1];
    const Section& cur = pe.sections[i];
    if (std::uint64_t{prev.virtual_address} + prev.virtual_extent() > cur.virtual_address) {
      add(out, "virtual ranges of sections " + std::to_string(i - 1) + " and " + std::to_string(i) +
                   " overlap or are out of order",
          i);
    }
  }
  return out;
}

Bytes serialize(const PeFile& pe) {
  const std::size_t table = pe.section_table_offset();
  if (table + pe.sections.size() * pe::kSectionHeaderSize > pe.bytes.size()) {
    throw Error(Errc::InconsistentLayout, "section table extends past EOF");
  }
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    for (std::size_t j = i + 1; j < pe.sections.size(); ++j) {
      const Section& a = pe.sections[i];
      const Section& c = pe.sections[j];
      if (a.raw_size == 0 || c.raw_size == 0) continue;
      if (a.raw_range().begin < c.raw_range().end && c.raw_range().begin < a.raw_range().end) {
        throw Error(Errc::InconsistentLayout,
                    "raw ranges of sections " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }

  Bytes out = pe.bytes;
  std::span<std::uint8_t> b(out);
  write_le32(b, 0x3C, pe.dos.e_lfanew);
  const std::size_t coff = pe.coff_offset();
  write_le16(b, coff, pe.coff.machine);
  write_le16(b, coff + 2, pe.coff.number_of_sections);
  write_le16(b, coff + 16, pe.coff.size_of_optional_header);
  write_le16(b, coff + 18, pe.coff.characteristics);

  const std::size_t opt = pe.optional_offset();
  write_le16(b, opt, pe.optional.pe32_plus ? pe::kMagicPe32Plus : pe::kMagicPe32);
  write_le32(b, opt + 16, pe.optional.entry_point_rva);
  if (pe.optional.pe32_plus) {
    write_le64(b, opt + 24, pe.optional.image_base);
  } else {
    write_le32(b, opt + 28, static_cast<std::uint32_t>(pe.optional.image_base));
  }
  write_le32(b, opt + 32, pe.optional.section_alignment);
  write_le32(b, opt + 36, pe.optional.file_alignment);
  write_le32(b, opt + 56, pe.optional.size_of_image);
  write_le32(b, opt + 60, pe.optional.size_of_headers);
  write_le32(b, opt + pe::kChecksumFieldOffset, pe.optional.checksum);
  const std::size_t dirs = pe.data_directory_offset();
  for (std::size_t i = 0; i < pe.optional.data_directories.size(); ++i) {
    write_le32(b, dirs + 8 * i, pe.optional.data_directories[i].rva);
    write_le32(b, dirs + 8 * i + 4, pe.optional.data_directories[i].size);
  }

  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const Section& s = pe.sections[i];
    const std::size_t off = table + i * pe::kSectionHeaderSize;
    std::copy(s.name.begin(), s.name.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
    write_le32(b, off + 8, s.virtual_size);
    write_le32(b, off + 12, s.virtual_address);
    write_le32(b, off + 16, s.raw_size);
    write_le32(b, off + 20, s.raw_pointer);
    write_le32(b, off + 36, s.characteristics);
  }
  return out;
}

std::uint32_t compute_pe_checksum(ByteView b) {
  if (b.size() < pe::kDosHeaderSize) throw Error(Errc::Truncated, "file shorter than a DOS header");
  const std::size_t field = std::size_t{read_le32(b, 0x3C)} + 4 + pe::kCoffHeaderSize + pe::kChecksumFieldOffset;
  if (field + 4 > b.size()) throw Error(Errc::Truncated, "checksum field lies past EOF");

  std::uint64_t sum = 0;
  for (std::size_t off = 0; off < b.size(); off += 2) {
    if (off >= field && off < field + 4) continue;
    std::uint32_t word = b[off];
    if (off + 1 < b.size()) word |= static_cast<std::uint32_t>(b[off + 1]) << 8;
    sum += word;
    sum = (sum & 0xFFFF) + (sum >> 16);
  }
  sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint32_t>(sum + b.size());
}

std::optional<std::uint32_t> try_rva_to_offset(const PeFile& pe, std::uint32_t rva) {
  if (rva < pe.optional.size_of_headers && rva < pe.bytes.size()) return rva;
  // Raw data may run past the next section's address; the closest section
  // at or below `rva` owns it.
  const Section* owner = nullptr;
  for (const auto& s : pe.sections) {
    if (rva >= s.virtual_address && rva - s.virtual_address < s.raw_size &&
        (!owner || s.virtual_address > owner->virtual_address)) {
      owner = &s;
    }
  }
  if (!owner) return std::nullopt;
  const std::uint64_t off = std::uint64_t{owner->raw_pointer} + (rva - owner->virtual_address);
  if (off >= pe.bytes.size()) return std::nullopt;
  return static_cast<std::uint32_t>(off);
}

std::uint32_t rva_to_offset(const PeFile& pe, std::uint32_t rva) {
  if (auto off = try_rva_to_offset(pe, rva)) return *off;
  char buf[32];
  std::snprintf(buf, sizeof buf, "rva 0x%x", rva);
  throw Error(Errc::UnmappedRva, std::string(buf) + " is not backed by file data");
}

namespace {

std::optional<std::string> read_cstring(const PeFile& pe, std::uint32_t rva, std::size_t max_len = 256) {
  auto off = try_rva_to_offset(pe, rva);
  if (!off) return std::nullopt;
  std::string out;
  for (std::size_t i = *off; i < pe.bytes.size() && out.size() < max_len; ++i) {
    if (pe.bytes[i] == 0) return out;
    out.push_back(static_cast<char>(pe.bytes[i]));
  }
  return std::nullopt;
}

}  // namespace

std::vector<ImportEntry> read_imports(const PeFile& pe) {
  std::vector<ImportEntry> out;
  DataDirectory dir = pe.directory(pe::kImportDirectory);
  if (dir.rva == 0) return out;
  auto base = try_rva_to_offset(pe, dir.rva);
  if (!base) return out;
  const ByteView b(pe.bytes);
  const std::size_t thunk_size = pe.optional.pe32_plus ? 8 : 4;
  const std::uint64_t ordinal_flag = pe.optional.pe32_plus ? (1ULL << 63) : (1ULL << 31);

  for (std::size_t d = 0; d < 4096; ++d) {
    const std::size_t off = *base + d * pe::kImportDescriptorSize;
    if (off + pe::kImportDescriptorSize > b.size()) break;
    const std::uint32_t oft = read_le32(b, off);
    const std::uint32_t name_rva = read_le32(b, off + 12);
    const std::uint32_t ft = read_le32(b, off + 16);
    if (oft == 0 && name_rva == 0 && ft == 0) break;
    auto dll = read_cstring(pe, name_rva);
    if (!dll) break;
    auto thunks = try_rva_to_offset(pe, oft != 0 ? oft : ft);
    if (!thunks) continue;
    for (std::size_t t = 0; t < 65536; ++t) {
      const std::size_t toff = *thunks + t * thunk_size;
      if (toff + thunk_size > b.size()) break;
      const std::uint64_t value = thunk_size == 8 ? read_le64(b, toff) : read_le32(b, toff);
      if (value == 0) break;
      if (value & ordinal_flag) {
        out.push_back({*dll, "#" + std::to_string(value & 0xFFFF)});
      } else if (auto fn = read_cstring(pe, static_cast<std::uint32_t>(value) + 2)) {
        out.push_back({*dll, *fn});
      }
    }
  }
  return out;
}

std::vector<DebugEntry> read_debug_directory(const PeFile& pe) {
  std::vector<DebugEntry> out;
  DataDirectory dir = pe.directory(pe::kDebugDirectory);
  if (dir.rva == 0 || dir.size < pe::kDebugEntrySize) return out;
  auto base = try_rva_to_offset(pe, dir.rva);
  if (!base) return out;
  const ByteView b(pe.bytes);
  for (std::size_t i = 0; i < dir.size / pe::kDebugEntrySize; ++i) {
    const std::size_t off = *base + i * pe::kDebugEntrySize;
    if (off + pe::kDebugEntrySize > b.size()) break;
    DebugEntry e;
    e.entry_offset = off;
    e.timestamp = read_le32(b, off + 4);
    e.type = read_le32(b, off + 12);
    e.size_of_data = read_le32(b, off + 16);
    e.address_of_raw_data = read_le32(b, off + 20);
    e.pointer_to_raw_data = read_le32(b, off + 24);
    out.push_back(e);
  }
  return out;
}

}  // namespace evbench
