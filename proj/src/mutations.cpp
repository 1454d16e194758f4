#include "evbench/mutations.hpp"

#include <algorithm>
#include <limits>

#include "evbench/detectors.hpp"
#include "evbench/error.hpp"
#include "evbench/sha256.hpp"

namespace evbench {

std::string_view to_string(MutationKind kind) noexcept {
  switch (kind) {
    case MutationKind::RenameSection: return "RenameSection";
    case MutationKind::AddSection: return "AddSection";
    case MutationKind::AppendToSection: return "AppendToSection";
    case MutationKind::AppendOverlay: return "AppendOverlay";
    case MutationKind::AddImport: return "AddImport";
    case MutationKind::NewEntryPoint: return "NewEntryPoint";
    case MutationKind::ZeroChecksum: return "ZeroChecksum";
    case MutationKind::StripSignature: return "StripSignature";
    case MutationKind::ScrambleDebug: return "ScrambleDebug";
  }
  return "Unknown";
}

MutationKind parse_mutation_kind(std::string_view text) {
  for (auto kind : kAllMutations) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(Errc::InvalidArgument, "unknown mutation '" + std::string(text) + "'");
}

std::string_view to_string(ChainStatus status) noexcept {
  switch (status) {
    case ChainStatus::AlreadyEvading: return "already_evading";
    case ChainStatus::Evaded: return "evaded";
    case ChainStatus::Survived: return "survived";
  }
  return "unknown";
}

namespace {

constexpr std::uint32_t kNewDataCharacteristics = pe::kScnInitializedData | pe::kScnMemRead;
constexpr std::uint32_t kNewImportCharacteristics =
    pe::kScnInitializedData | pe::kScnMemRead | pe::kScnMemWrite;
constexpr std::uint32_t kNewCodeCharacteristics = pe::kScnCode | pe::kScnMemExecute | pe::kScnMemRead;

std::uint32_t checked_u32(std::uint64_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::NoRoom, std::string(what) + " exceeds 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

std::uint32_t file_alignment(const PeFile& pe) {
  return pe.optional.file_alignment ? pe.optional.file_alignment : 1;
}

std::uint32_t section_alignment(const PeFile& pe) {
  return pe.optional.section_alignment ? pe.optional.section_alignment : 1;
}

void fill(std::span<std::uint8_t> out, Rng& rng, const MutationOptions& opts) {
  if (opts.filler == FillerMode::Uniform || opts.benign_pool.empty()) {
    rng.fill(out);
    return;
  }
  std::vector<std::size_t> fits;
  for (std::size_t i = 0; i < opts.benign_pool.size(); ++i) {
    if (opts.benign_pool[i].size() >= out.size()) fits.push_back(i);
  }
  if (!fits.empty()) {
    ByteView src = opts.benign_pool[fits[rng.below(fits.size())]];
    std::size_t start = rng.below(src.size() - out.size() + 1);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(start), out.size(), out.begin());
    return;
  }
  std::size_t pos = 0;
  while (pos < out.size()) {
    ByteView src = opts.benign_pool[rng.below(opts.benign_pool.size())];
    if (src.empty()) continue;
    std::size_t take = std::min(src.size(), out.size() - pos);
    std::size_t start = rng.below(src.size() - take + 1);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(start), take, out.begin() + static_cast<std::ptrdiff_t>(pos));
    pos += take;
  }
}

/// Shifts every modeled or directory-held file pointer >= `at` by `delta`.
void shift_file_pointers(PeFile& pe, std::size_t at, std::int64_t delta,
                         const std::vector<DebugEntry>& debug_before) {
  for (auto& s : pe.sections) {
    if (s.raw_size != 0 && s.raw_pointer >= at) {
      s.raw_pointer = checked_u32(static_cast<std::int64_t>(s.raw_pointer) + delta, "raw pointer");
    }
  }
  if (pe.optional.data_directories.size() > pe::kCertificateDirectory) {
    auto& cert = pe.optional.data_directories[pe::kCertificateDirectory];
    if (cert.size != 0 && cert.rva >= at) {
      cert.rva = checked_u32(static_cast<std::int64_t>(cert.rva) + delta, "certificate offset");
    }
  }
  // Debug entries live inside section data; relocate the entry itself first.
  for (const auto& e : debug_before) {
    if (e.pointer_to_raw_data < at || e.size_of_data == 0) continue;
    std::size_t entry = e.entry_offset;
    if (entry >= at) entry = static_cast<std::size_t>(static_cast<std::int64_t>(entry) + delta);
    if (entry + pe::kDebugEntrySize > pe.bytes.size()) continue;
    write_le32(pe.bytes, entry + 24,
               checked_u32(static_cast<std::int64_t>(e.pointer_to_raw_data) + delta, "debug pointer"));
  }
}

void insert_bytes(PeFile& pe, std::size_t at, ByteView data) {
  auto debug = read_debug_directory(pe);
  pe.bytes.insert(pe.bytes.begin() + static_cast<std::ptrdiff_t>(at), data.begin(), data.end());
  shift_file_pointers(pe, at, static_cast<std::int64_t>(data.size()), debug);
}

void erase_bytes(PeFile& pe, ByteRange range) {
  auto debug = read_debug_directory(pe);
  pe.bytes.erase(pe.bytes.begin() + static_cast<std::ptrdiff_t>(range.begin),
                 pe.bytes.begin() + static_cast<std::ptrdiff_t>(range.end));
  shift_file_pointers(pe, range.end, -static_cast<std::int64_t>(range.size()), debug);
}

std::uint32_t next_section_rva(const PeFile& pe) {
  std::uint64_t end = align_up(pe.optional.size_of_headers, section_alignment(pe));
  for (const auto& s : pe.sections) end = std::max<std::uint64_t>(end, std::uint64_t{s.virtual_address} + s.virtual_extent());
  return checked_u32(align_up(end, section_alignment(pe)), "section rva");
}

void refresh_size_of_image(PeFile& pe) {
  std::uint64_t end = pe.optional.size_of_image;
  for (const auto& s : pe.sections) {
    end = std::max<std::uint64_t>(end, align_up(std::uint64_t{s.virtual_address} + s.virtual_extent(), section_alignment(pe)));
  }
  pe.optional.size_of_image = checked_u32(end, "SizeOfImage");
}

/// Lowest virtual address above `index`'s own, or UINT32 max for the last one.
std::uint64_t virtual_limit(const PeFile& pe, std::size_t index) {
  std::uint64_t limit = std::numeric_limits<std::uint32_t>::max();
  const std::uint32_t va = pe.sections[index].virtual_address;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    if (i != index && pe.sections[i].virtual_address > va) limit = std::min<std::uint64_t>(limit, pe.sections[i].virtual_address);
  }
  return limit;
}

bool has_header_slack(const PeFile& pe) { return pe.section_table_slack() >= pe::kSectionHeaderSize; }

/// Appends a section header and places `content` after the last section's
/// raw data, ahead of any overlay. Returns the new section's index.
std::size_t append_section(PeFile& pe, std::string_view name, ByteView content, std::uint32_t characteristics,
                           Errc no_room = Errc::NoHeaderSlack) {
  if (!has_header_slack(pe)) throw Error(no_room, "no room in the header for another section header");
  if (pe.sections.size() >= 0xFFFF) throw Error(no_room, "section count limit");

  const std::uint32_t fa = file_alignment(pe);
  const std::uint32_t va = next_section_rva(pe);
  std::size_t insert_at = std::min(std::max(pe.sections_raw_end(), std::size_t{pe.optional.size_of_headers}), pe.bytes.size());
  const std::size_t raw_pointer = align_up(insert_at, fa);
  const std::size_t raw_size = align_up(content.size(), fa);

  const std::size_t slot = pe.section_header_offset(pe.sections.size());
  std::fill_n(pe.bytes.begin() + static_cast<std::ptrdiff_t>(slot), pe::kSectionHeaderSize, std::uint8_t{0});

  Bytes block(raw_pointer - insert_at + raw_size, 0);
  std::copy(content.begin(), content.end(), block.begin() + static_cast<std::ptrdiff_t>(raw_pointer - insert_at));
  insert_bytes(pe, insert_at, block);

  Section s;
  s.set_name(name);
  s.virtual_size = checked_u32(content.size(), "section size");
  s.virtual_address = va;
  s.raw_size = checked_u32(raw_size, "section size");
  s.raw_pointer = checked_u32(raw_pointer, "raw pointer");
  s.characteristics = characteristics;
  pe.sections.push_back(s);
  pe.coff.number_of_sections = static_cast<std::uint16_t>(pe.sections.size());
  refresh_size_of_image(pe);
  return pe.sections.size() - 1;
}

struct StubSite {
  std::size_t section;
  std::uint32_t rva;
};

std::vector<StubSite> stub_sites(const PeFile& pe) {
  std::vector<StubSite> sites;
  const std::uint32_t entry = pe.optional.entry_point_rva;
  for (std::size_t i = 0; i < pe.sections.size(); ++i) {
    const Section& s = pe.sections[i];
    if ((s.characteristics & (pe::kScnMemExecute | pe::kScnCode)) == 0) continue;
    if (s.virtual_size == 0 || std::uint64_t{s.virtual_size} + kEntryStubSize > s.raw_size) continue;
    if (s.raw_range().end > pe.bytes.size()) continue;
    const std::uint64_t stub = std::uint64_t{s.virtual_address} + s.virtual_size;
    if (stub + kEntryStubSize > virtual_limit(pe, i)) continue;
    if (entry >= stub && entry < stub + kEntryStubSize) continue;
    sites.push_back({i, static_cast<std::uint32_t>(stub)});
  }
  return sites;
}

bool appendable(const PeFile& pe, const Section& s, bool growth) {
  if (s.raw_size == 0 || s.raw_range().end > pe.bytes.size()) return false;
  return growth || (s.virtual_size != 0 && s.virtual_size < s.raw_size);
}

bool import_pool_exhausted(const std::vector<ImportEntry>& present) {
  return std::all_of(kBenignImports.begin(), kBenignImports.end(), [&](const ImportPoolEntry& e) {
    return std::find(present.begin(), present.end(), ImportEntry{std::string(e.dll), std::string(e.function)}) !=
           present.end();
  });
}

void require_index(const PeFile& pe, std::size_t index) {
  if (pe.sections.empty()) throw Error(Errc::NoSections, "file has no sections");
  if (index >= pe.sections.size()) {
    throw Error(Errc::PreconditionViolated, "section index " + std::to_string(index) + " out of range");
  }
}

}  // namespace

Bytes rename_section(const PeFile& pe, std::size_t index, Rng& rng) {
  require_index(pe, index);
  const std::string current = pe.sections[index].name_string();
  std::vector<std::string_view> pool;
  for (auto name : kBenignSectionNames) {
    if (name != current) pool.push_back(name);
  }
  PeFile out = pe;
  out.sections[index].set_name(pool[rng.below(pool.size())]);
  return serialize(out);
}

Bytes add_section(const PeFile& pe, Rng& rng, const MutationOptions& opts) {
  const std::size_t len = rng.between(opts.new_section_min, opts.new_section_max);
  const std::string_view name = kBenignSectionNames[rng.below(kBenignSectionNames.size())];
  Bytes content(len);
  fill(content, rng, opts);
  PeFile out = pe;
  append_section(out, name, content, kNewDataCharacteristics);
  return serialize(out);
}

Bytes append_to_section(const PeFile& pe, std::size_t index, std::size_t count, Rng& rng,
                        const MutationOptions& opts) {
  require_index(pe, index);
  if (count == 0) return pe.bytes;
  PeFile out = pe;
  Section& s = out.sections[index];
  if (s.raw_size == 0 || s.raw_range().end > out.bytes.size()) {
    throw Error(Errc::NoSlack, "section has no raw data inside the file");
  }

  const std::uint64_t limit = virtual_limit(out, index);
  if (s.virtual_size == 0) s.virtual_size = s.raw_size;
  const std::size_t used = std::min(s.virtual_size, s.raw_size);
  const std::size_t slack = s.raw_size - used;

  Bytes filler(count);
  fill(filler, rng, opts);

  if (count > slack) {
    if (!opts.allow_section_growth) throw Error(Errc::NoSlack, "section has no raw slack and growth is disabled");
    const std::size_t new_raw = align_up(used + count, file_alignment(out));
    const std::size_t delta = new_raw - s.raw_size;
    const std::size_t at = s.raw_range().end;
    insert_bytes(out, at, Bytes(delta, 0));
    // insert_bytes shifted sections starting at `at`; this one starts before it.
    out.sections[index].raw_size = checked_u32(new_raw, "raw size");
  }
  Section& t = out.sections[index];
  std::copy(filler.begin(), filler.end(), out.bytes.begin() + static_cast<std::ptrdiff_t>(t.raw_pointer + used));
  if (std::uint64_t{t.virtual_address} + used + count <= limit) {
    t.virtual_size = checked_u32(used + count, "virtual size");
  }
  refresh_size_of_image(out);
  return serialize(out);
}

Bytes append_overlay(const PeFile& pe, std::size_t count, Rng& rng, const MutationOptions& opts) {
  Bytes out = pe.bytes;
  out.resize(pe.bytes.size() + count);
  fill(std::span<std::uint8_t>(out).subspan(pe.bytes.size()), rng, opts);
  return out;
}

Bytes add_import(const PeFile& pe, Rng& rng) {
  const DataDirectory dir = pe.directory(pe::kImportDirectory);
  if (dir.rva == 0) throw Error(Errc::NoImportDirectory, "import directory is empty");
  auto base = try_rva_to_offset(pe, dir.rva);
  if (!base) throw Error(Errc::NoImportDirectory, "import directory is not backed by file data");
  if (!has_header_slack(pe)) throw Error(Errc::NoRoom, "no room for a new import section");

  const auto present = read_imports(pe);
  const std::size_t first = rng.below(kBenignImports.size());
  const ImportPoolEntry* pick = nullptr;
  for (std::size_t k = 0; k < kBenignImports.size(); ++k) {
    const auto& cand = kBenignImports[(first + k) % kBenignImports.size()];
    if (std::find(present.begin(), present.end(), ImportEntry{std::string(cand.dll), std::string(cand.function)}) ==
        present.end()) {
      pick = &cand;
      break;
    }
  }
  if (!pick) throw Error(Errc::NoRoom, "every pool import is already present");

  // Existing descriptors are copied verbatim; their thunks stay where they are.
  std::size_t n = 0;
  while (true) {
    const std::size_t off = *base + n * pe::kImportDescriptorSize;
    if (off + pe::kImportDescriptorSize > pe.bytes.size()) {
      throw Error(Errc::NoImportDirectory, "import descriptors run past EOF");
    }
    if (std::all_of(pe.bytes.begin() + static_cast<std::ptrdiff_t>(off),
                    pe.bytes.begin() + static_cast<std::ptrdiff_t>(off + pe::kImportDescriptorSize),
                    [](std::uint8_t b) { return b == 0; })) {
      break;
    }
    ++n;
  }

  const std::size_t thunk = pe.optional.pe32_plus ? 8 : 4;
  const std::size_t desc_bytes = (n + 2) * pe::kImportDescriptorSize;
  const std::size_t ilt = align_up(desc_bytes, 8);
  const std::size_t iat = ilt + 2 * thunk;
  const std::size_t hint_name = iat + 2 * thunk;
  const std::size_t dll_name = align_up(hint_name + 2 + pick->function.size() + 1, 2);
  Bytes content(dll_name + pick->dll.size() + 1, 0);

  const std::uint32_t va = next_section_rva(pe);
  std::copy_n(pe.bytes.begin() + static_cast<std::ptrdiff_t>(*base), n * pe::kImportDescriptorSize, content.begin());
  const std::size_t d = n * pe::kImportDescriptorSize;
  write_le32(content, d + 0, checked_u32(va + ilt, "rva"));
  write_le32(content, d + 12, checked_u32(va + dll_name, "rva"));
  write_le32(content, d + 16, checked_u32(va + iat, "rva"));
  for (std::size_t slot : {ilt, iat}) {
    if (thunk == 8) {
      write_le64(content, slot, va + hint_name);
    } else {
      write_le32(content, slot, checked_u32(va + hint_name, "rva"));
    }
  }
  std::copy(pick->function.begin(), pick->function.end(), content.begin() + static_cast<std::ptrdiff_t>(hint_name + 2));
  std::copy(pick->dll.begin(), pick->dll.end(), content.begin() + static_cast<std::ptrdiff_t>(dll_name));

  PeFile out = pe;
  append_section(out, ".idata", content, kNewImportCharacteristics, Errc::NoRoom);
  out.optional.data_directories[pe::kImportDirectory] = {va, checked_u32(desc_bytes, "import size")};
  return serialize(out);
}

Bytes new_entry_point(const PeFile& pe, Rng& rng) {
  const std::uint32_t old_entry = pe.optional.entry_point_rva;
  PeFile out = pe;
  auto sites = stub_sites(pe);
  std::uint32_t stub_rva = 0;
  std::size_t stub_offset = 0;
  if (!sites.empty()) {
    const StubSite site = sites[rng.below(sites.size())];
    Section& s = out.sections[site.section];
    stub_rva = site.rva;
    stub_offset = std::size_t{s.raw_pointer} + s.virtual_size;
    s.virtual_size += kEntryStubSize;
  } else {
    if (!has_header_slack(pe)) throw Error(Errc::NoRoom, "no executable slack and no room for a new section");
    stub_rva = next_section_rva(pe);
    const std::size_t index =
        append_section(out, ".text", Bytes(kEntryStubSize, 0), kNewCodeCharacteristics, Errc::NoRoom);
    stub_offset = out.sections[index].raw_pointer;
  }
  const std::int64_t rel = static_cast<std::int64_t>(old_entry) - (static_cast<std::int64_t>(stub_rva) + 5);
  out.bytes[stub_offset] = 0xE9;
  write_le32(out.bytes, stub_offset + 1, static_cast<std::uint32_t>(static_cast<std::int32_t>(rel)));
  out.optional.entry_point_rva = stub_rva;
  refresh_size_of_image(out);
  return serialize(out);
}

std::optional<std::uint32_t> decode_jump_target(const PeFile& pe, std::uint32_t rva) {
  auto off = try_rva_to_offset(pe, rva);
  if (!off || *off + kEntryStubSize > pe.bytes.size() || pe.bytes[*off] != 0xE9) return std::nullopt;
  const auto rel = static_cast<std::int32_t>(read_le32(pe.bytes, *off + 1));
  return static_cast<std::uint32_t>(static_cast<std::int64_t>(rva) + 5 + rel);
}

Bytes zero_checksum(const PeFile& pe) {
  PeFile out = pe;
  out.optional.checksum = 0;
  return serialize(out);
}

Bytes strip_signature(const PeFile& pe) {
  auto cert = pe.certificate_range();
  if (!cert) return pe.bytes;
  PeFile out = pe;
  ByteRange range{std::min(cert->begin, pe.bytes.size()), std::min(cert->end, pe.bytes.size())};
  out.optional.data_directories[pe::kCertificateDirectory] = {0, 0};
  erase_bytes(out, range);
  return serialize(out);
}

Bytes scramble_debug(const PeFile& pe, Rng& rng) {
  Bytes out = pe.bytes;
  for (const auto& e : read_debug_directory(pe)) {
    write_le32(out, e.entry_offset + 4, 0);
    if (e.size_of_data == 0 || e.pointer_to_raw_data >= out.size()) continue;
    const std::size_t len = std::min<std::size_t>(e.size_of_data, out.size() - e.pointer_to_raw_data);
    rng.fill(std::span<std::uint8_t>(out).subspan(e.pointer_to_raw_data, len));
  }
  return out;
}

bool is_applicable(const PeFile& pe, MutationKind kind, const MutationOptions& opts) {
  switch (kind) {
    case MutationKind::RenameSection:
      return !pe.sections.empty();
    case MutationKind::AddSection:
      return has_header_slack(pe);
    case MutationKind::AppendToSection:
      return std::any_of(pe.sections.begin(), pe.sections.end(),
                         [&](const Section& s) { return appendable(pe, s, opts.allow_section_growth); });
    case MutationKind::AppendOverlay:
      return true;
    case MutationKind::AddImport:
      return pe.directory(pe::kImportDirectory).rva != 0 && has_header_slack(pe) &&
             try_rva_to_offset(pe, pe.directory(pe::kImportDirectory).rva).has_value() &&
             !import_pool_exhausted(read_imports(pe));
    case MutationKind::NewEntryPoint:
      return !stub_sites(pe).empty() || has_header_slack(pe);
    case MutationKind::ZeroChecksum:
    case MutationKind::StripSignature:
    case MutationKind::ScrambleDebug:
      return true;
  }
  return false;
}

MutationAction draw_action(const PeFile& pe, MutationKind kind, Rng& rng, const MutationOptions& opts) {
  MutationAction action;
  switch (kind) {
    case MutationKind::RenameSection:
      require_index(pe, 0);
      action.params = RenameSectionParams{rng.below(pe.sections.size())};
      break;
    case MutationKind::AddSection: action.params = AddSectionParams{}; break;
    case MutationKind::AppendToSection: {
      require_index(pe, 0);
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < pe.sections.size(); ++i) {
        if (appendable(pe, pe.sections[i], opts.allow_section_growth)) candidates.push_back(i);
      }
      if (candidates.empty()) throw Error(Errc::NoSlack, "no section can take appended bytes");
      const std::size_t index = candidates[rng.below(candidates.size())];
      std::size_t count = rng.between(opts.append_min, opts.append_max);
      if (!opts.allow_section_growth) {
        const Section& s = pe.sections[index];
        count = std::min<std::size_t>(count, s.raw_size - s.virtual_size);
      }
      action.params = AppendToSectionParams{index, count};
      break;
    }
    case MutationKind::AppendOverlay:
      action.params = AppendOverlayParams{rng.between(opts.append_min, opts.append_max)};
      break;
    case MutationKind::AddImport: action.params = AddImportParams{}; break;
    case MutationKind::NewEntryPoint: action.params = NewEntryPointParams{}; break;
    case MutationKind::ZeroChecksum: action.params = ZeroChecksumParams{}; break;
    case MutationKind::StripSignature: action.params = StripSignatureParams{}; break;
    case MutationKind::ScrambleDebug: action.params = ScrambleDebugParams{}; break;
  }
  action.seed = rng.next();
  return action;
}

Bytes apply_action(const PeFile& pe, const MutationAction& action, const MutationOptions& opts) {
  Rng rng(action.seed);
  return std::visit(
      [&](const auto& p) -> Bytes {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, RenameSectionParams>) return rename_section(pe, p.index, rng);
        else if constexpr (std::is_same_v<P, AddSectionParams>) return add_section(pe, rng, opts);
        else if constexpr (std::is_same_v<P, AppendToSectionParams>) return append_to_section(pe, p.index, p.count, rng, opts);
        else if constexpr (std::is_same_v<P, AppendOverlayParams>) return append_overlay(pe, p.count, rng, opts);
        else if constexpr (std::is_same_v<P, AddImportParams>) return add_import(pe, rng);
        else if constexpr (std::is_same_v<P, NewEntryPointParams>) return new_entry_point(pe, rng);
        else if constexpr (std::is_same_v<P, ZeroChecksumParams>) return zero_checksum(pe);
        else if constexpr (std::is_same_v<P, StripSignatureParams>) return strip_signature(pe);
        else return scramble_debug(pe, rng);
      },
      action.params);
}

ChainResult apply_random_chain(const RawBinary& bin, const DetectorHandle& detector, const ChainConfig& cfg) {
  ChainResult result;
  const ScanResult initial = detector.scan(bin.bytes());
  result.initial_score = initial.score;
  if (initial.decision == Decision::Benign) {
    result.status = ChainStatus::AlreadyEvading;
    result.final_bytes.assign(bin.bytes().begin(), bin.bytes().end());
    return result;
  }

  Rng rng(cfg.seed);
  Bytes current(bin.bytes().begin(), bin.bytes().end());
  std::string current_sha = bin.sha256_hex();
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    const PeFile pe = parse_pe(current, ParseMode::Lenient);
    std::vector<MutationKind> applicable;
    for (auto kind : kAllMutations) {
      if (is_applicable(pe, kind, cfg.options)) applicable.push_back(kind);
    }
    if (applicable.empty()) {
      throw Error(Errc::AllActionsInapplicable, "no modification applies at step " + std::to_string(step));
    }
    const MutationKind kind = applicable[rng.below(applicable.size())];
    MutationAction action = draw_action(pe, kind, rng, cfg.options);
    Bytes next = apply_action(pe, action, cfg.options);

    MutationRecord rec;
    rec.action = action;
    rec.rng_seed = action.seed;
    rec.pre_sha256 = current_sha;
    rec.post_sha256 = sha256_hex(next);
    rec.no_op = rec.pre_sha256 == rec.post_sha256;
    result.records.push_back(rec);

    const ScanResult scan = detector.scan(next);
    result.scores.push_back(scan.score);
    current = std::move(next);
    current_sha = rec.post_sha256;
    if (scan.decision == Decision::Benign) {
      result.status = ChainStatus::Evaded;
      result.evaded_at = step;
      result.final_bytes = std::move(current);
      return result;
    }
  }
  result.status = ChainStatus::Survived;
  result.final_bytes = std::move(current);
  return result;
}

std::vector<Bytes> replay_chain(const RawBinary& bin, const std::vector<MutationRecord>& records,
                                const MutationOptions& opts) {
  std::vector<Bytes> outputs;
  Bytes current(bin.bytes().begin(), bin.bytes().end());
  for (const auto& rec : records) {
    const PeFile pe = parse_pe(current, ParseMode::Lenient);
    current = apply_action(pe, rec.action, opts);
    outputs.push_back(current);
  }
  return outputs;
}

}  // namespace evbench
