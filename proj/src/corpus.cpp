#include "evbench/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "evbench/error.hpp"
#include "evbench/sha256.hpp"

namespace fs = std::filesystem;

namespace evbench {

std::string_view to_string(Split split) noexcept { return split == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view text) {
  if (text == "train" || text == "Train") return Split::Train;
  if (text == "test" || text == "Test") return Split::Test;
  throw Error(Errc::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

std::string Corpus::digest() const {
  std::vector<std::string> lines;
  lines.reserve(entries.size());
  for (const auto& e : entries) lines.push_back(e.sha256 + "," + std::string(to_string(e.label)) + "\n");
  std::sort(lines.begin(), lines.end());
  std::string all;
  for (const auto& l : lines) all += l;
  return sha256_hex(ByteView(reinterpret_cast<const std::uint8_t*>(all.data()), all.size()));
}

std::size_t Corpus::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.label == label; }));
}

std::size_t Corpus::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.split == s; }));
}

Corpus Corpus::filter(std::optional<Label> label, std::optional<Split> s) const {
  Corpus out;
  out.synthetic = synthetic;
  for (const auto& e : entries) {
    if ((!label || e.label == *label) && (!s || e.split == *s)) out.entries.push_back(e);
  }
  return out;
}

RawBinary Corpus::load(const ManifestEntry& entry) const {
  RawBinary bin(read_file(entry.path), entry.label, entry.path);
  if (bin.sha256_hex() != entry.sha256) {
    throw Error(Errc::Corrupt, "content of " + entry.path + " no longer matches its recorded sha256");
  }
  return bin;
}

std::vector<RawBinary> Corpus::load_all() const {
  std::vector<RawBinary> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(load(e));
  return out;
}

Corpus make_corpus(std::vector<ManifestEntry> entries, bool fail_on_conflict) {
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.sha256, a.path) < std::tie(b.sha256, b.path);
  });
  Corpus out;
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    bool conflict = false;
    while (j < entries.size() && entries[j].sha256 == entries[i].sha256) {
      conflict |= entries[j].label != entries[i].label;
      ++j;
    }
    if (conflict) {
      out.conflicts.push_back(entries[i].sha256);
    } else {
      out.entries.push_back(entries[i]);
    }
    i = j;
  }
  if (fail_on_conflict && !out.conflicts.empty()) {
    std::string list;
    for (const auto& h : out.conflicts) list += (list.empty() ? "" : ", ") + h;
    throw Error(Errc::LabelConflict, "files labeled both benign and malicious: " + list);
  }
  return out;
}

namespace {

std::vector<ManifestEntry> hash_tree(const std::string& root, Label label) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(Errc::MissingRoot, "not a directory: " + root);
  std::vector<std::string> paths;
  for (const auto& item : fs::recursive_directory_iterator(root)) {
    if (item.is_regular_file()) paths.push_back(fs::absolute(item.path()).lexically_normal().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ManifestEntry> out;
  for (const auto& p : paths) {
    const Bytes bytes = read_file(p);
    ManifestEntry e;
    e.path = p;
    e.label = label;
    e.sha256 = sha256_hex(bytes);
    e.size = bytes.size();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

Corpus ingest_directories(const std::string& benign_root, const std::string& malicious_root,
                          bool fail_on_conflict) {
  auto entries = hash_tree(benign_root, Label::Benign);
  auto mal = hash_tree(malicious_root, Label::Malicious);
  entries.insert(entries.end(), mal.begin(), mal.end());
  return make_corpus(std::move(entries), fail_on_conflict);
}

Corpus ingest_tree(const std::string& root, bool fail_on_conflict) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(Errc::MissingRoot, "not a directory: " + root);
  return ingest_directories((fs::path(root) / "benign").string(), (fs::path(root) / "malicious").string(),
                            fail_on_conflict);
}

// ---------------------------------------------------------------------------
// Manifest CSV

namespace {

constexpr std::array<std::string_view, 5> kColumns = {"path", "label", "sha256", "size", "split"};

std::vector<std::string> parse_csv_line(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          fields.back() += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      if (!fields.back().empty() || was_quoted) {
        throw Error(Errc::Corrupt, "manifest line " + std::to_string(lineno) + ": stray quote");
      }
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
      was_quoted = false;
    } else {
      if (was_quoted) throw Error(Errc::Corrupt, "manifest line " + std::to_string(lineno) + ": text after quote");
      fields.back() += c;
    }
  }
  if (quoted) throw Error(Errc::Corrupt, "manifest line " + std::to_string(lineno) + ": unterminated quote");
  return fields;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Corpus read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open manifest " + path);
  const fs::path base = fs::absolute(fs::path(path)).parent_path();

  bool synthetic = false;
  bool header_seen = false;
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (!header_seen && entries.empty() && line == kSyntheticTag) synthetic = true;
      continue;
    }
    auto fields = parse_csv_line(line, lineno);
    if (!header_seen) {
      if (fields.size() != kColumns.size() || !std::equal(fields.begin(), fields.end(), kColumns.begin())) {
        throw Error(Errc::InvalidConfig,
                    "manifest header must be exactly 'path,label,sha256,size,split', got '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != kColumns.size()) {
      throw Error(Errc::InvalidConfig, "manifest line " + std::to_string(lineno) + ": expected 5 columns, got " +
                                           std::to_string(fields.size()));
    }
    ManifestEntry e;
    fs::path p(fields[0]);
    e.path = (p.is_absolute() ? p : base / p).lexically_normal().string();
    try {
      e.label = parse_label(fields[1]);
      e.split = parse_split(fields[4]);
    } catch (const Error& err) {
      throw Error(Errc::InvalidConfig, "manifest line " + std::to_string(lineno) + ": " + err.what());
    }
    if (e.label == Label::Unknown) {
      throw Error(Errc::InvalidConfig, "manifest line " + std::to_string(lineno) + ": label must be benign or malicious");
    }
    e.sha256 = fields[2];
    if (e.sha256.size() != 64 || e.sha256.find_first_not_of("0123456789abcdef") != std::string::npos) {
      throw Error(Errc::InvalidConfig, "manifest line " + std::to_string(lineno) + ": bad sha256");
    }
    char* end = nullptr;
    e.size = std::strtoull(fields[3].c_str(), &end, 10);
    if (fields[3].empty() || *end != '\0') {
      throw Error(Errc::InvalidConfig, "manifest line " + std::to_string(lineno) + ": bad size");
    }
    std::error_code ec;
    if (!fs::is_regular_file(e.path, ec)) throw Error(Errc::IoError, "manifest file missing: " + e.path);
    entries.push_back(std::move(e));
  }
  if (!header_seen) throw Error(Errc::InvalidConfig, "manifest " + path + " has no header");
  Corpus out = make_corpus(std::move(entries), true);
  out.synthetic = synthetic;
  return out;
}

std::string format_manifest(const Corpus& corpus, const std::string& base_dir) {
  const fs::path base = fs::absolute(fs::path(base_dir)).lexically_normal();
  std::string out;
  if (corpus.synthetic) out += std::string(kSyntheticTag) + "\n";
  out += "path,label,sha256,size,split\n";
  for (const auto& e : corpus.entries) {
    fs::path rel = fs::path(e.path).lexically_relative(base);
    std::string p = (!rel.empty() && *rel.begin() != "..") ? rel.generic_string() : e.path;
    out += csv_quote(p) + "," + std::string(to_string(e.label)) + "," + e.sha256 + "," + std::to_string(e.size) +
           "," + std::string(to_string(e.split)) + "\n";
  }
  return out;
}

void write_manifest(const Corpus& corpus, const std::string& path) {
  const std::string text = format_manifest(corpus, fs::absolute(fs::path(path)).parent_path().string());
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Corpus sample(const Corpus& corpus, std::size_t n, std::uint64_t seed, std::optional<Label> label) {
  Corpus pool = corpus.filter(label);
  if (n > pool.entries.size()) {
    throw Error(Errc::NotEnoughFiles, "requested " + std::to_string(n) + " files, only " +
                                          std::to_string(pool.entries.size()) + " available");
  }
  Rng rng(seed);
  auto& v = pool.entries;
  for (std::size_t i = 0; i < n; ++i) std::swap(v[i], v[i + rng.below(v.size() - i)]);
  v.resize(n);
  Corpus out = make_corpus(std::move(v), true);
  out.synthetic = corpus.synthetic;
  return out;
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw Error(Errc::DegenerateFraction, "test fraction must lie in [0,1)");
  }
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  std::uint64_t stream = 0;
  for (Label label : {Label::Benign, Label::Malicious}) {
    auto cls = corpus.filter(label).entries;
    Rng rng(derive_seed(seed, stream++));
    for (std::size_t i = cls.size(); i > 1; --i) std::swap(cls[i - 1], cls[rng.below(i)]);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(cls.size())));
    for (std::size_t i = 0; i < cls.size(); ++i) {
      cls[i].split = i < n_test ? Split::Test : Split::Train;
      (i < n_test ? test : train).push_back(cls[i]);
    }
  }
  Corpus a = make_corpus(std::move(train), true);
  Corpus b = make_corpus(std::move(test), true);
  a.synthetic = b.synthetic = corpus.synthetic;
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// Synthetic PE files

namespace {

struct Region {
  std::size_t begin;
  std::size_t end;
};

constexpr std::string_view kPdbName = "synthetic.pdb";

/// Filler is a short random pattern repeated to fill the region, so each file
/// contributes few distinct n-grams and hashed features rarely collide.
void fill_periodic(std::span<std::uint8_t> out, Rng& rng) {
  Bytes pattern(static_cast<std::size_t>(rng.between(8, 24)));
  rng.fill(pattern);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pattern[i % pattern.size()];
}

}  // namespace

SyntheticPeOptions random_synthetic_options(Rng& rng, bool malicious) {
  SyntheticPeOptions o;
  o.num_sections = static_cast<std::size_t>(rng.between(1, 3));
  o.pe32_plus = rng.below(2) == 1;
  o.with_debug = rng.below(2) == 1;
  o.with_certificate = rng.below(4) == 0;
  o.vsize_slack = rng.below(4) != 0;
  o.plant_marker = malicious;
  return o;
}

SyntheticPe make_synthetic_pe(Rng& rng, const SyntheticPeOptions& opts) {
  if (opts.num_sections < 1 || opts.num_sections > 3) {
    throw Error(Errc::InvalidArgument, "synthetic PE needs 1 to 3 sections");
  }
  if (opts.min_content < 64 || opts.max_content < opts.min_content) {
    throw Error(Errc::InvalidArgument, "synthetic content bounds are inconsistent");
  }
  const bool plus = opts.pe32_plus;
  const std::size_t opt_size = plus ? 240 : 224;
  const std::size_t coff = kSyntheticLfanew + 4;
  const std::size_t optional = coff + 20;
  const std::size_t table = optional + opt_size;
  const std::size_t thunk = plus ? 8 : 4;
  const std::size_t n = opts.num_sections;
  const std::size_t meta = std::min<std::size_t>(1, n - 1);

  static constexpr std::array<std::string_view, 3> kNames = {".text", ".rdata", ".data"};
  static constexpr std::array<std::uint32_t, 3> kFlags = {
      pe::kScnCode | pe::kScnMemExecute | pe::kScnMemRead,
      pe::kScnInitializedData | pe::kScnMemRead,
      pe::kScnInitializedData | pe::kScnMemRead | pe::kScnMemWrite,
  };

  // Structures appended to the meta section after its filler.
  const std::size_t imports_size = opts.with_imports ? align_up(40 + 4 * thunk + 14 + 13, 8) : 0;
  const std::size_t debug_size = opts.with_debug ? 28 + 24 + kPdbName.size() + 1 : 0;

  struct Layout {
    std::size_t filler;
    std::size_t content;
    std::uint32_t va;
    std::uint32_t raw_ptr;
    std::uint32_t raw_size;
    std::uint32_t vsize;
  };
  std::vector<Layout> layout(n);
  std::uint32_t va = kSyntheticSectionAlignment;
  std::uint32_t raw = kSyntheticHeadersSize;
  for (std::size_t i = 0; i < n; ++i) {
    auto& l = layout[i];
    l.filler = static_cast<std::size_t>(rng.between(opts.min_content, opts.max_content));
    l.content = l.filler;
    if (i == meta) l.content = align_up(l.filler, 8) + imports_size + debug_size;
    const std::size_t aligned = align_up(l.content, kSyntheticFileAlignment);
    const std::size_t slack_needed = opts.vsize_slack ? 16 : 0;
    l.raw_size = static_cast<std::uint32_t>(aligned - l.content < slack_needed ? aligned + kSyntheticFileAlignment
                                                                                : aligned);
    l.vsize = static_cast<std::uint32_t>(opts.vsize_slack ? l.content : l.raw_size);
    l.va = va;
    l.raw_ptr = raw;
    va += static_cast<std::uint32_t>(align_up(l.vsize, kSyntheticSectionAlignment));
    raw += l.raw_size;
  }
  const std::uint32_t size_of_image = va;

  Bytes out(raw, 0);
  std::vector<Region> filler_regions;

  // DOS header and stub.
  out[0] = 'M';
  out[1] = 'Z';
  write_le16(out, 2, 0x90);
  write_le16(out, 4, 3);
  write_le16(out, 8, 4);
  write_le16(out, 0x10, 0xFFFF);
  write_le16(out, 0x12, 0xB8);
  write_le16(out, 0x18, 0x40);
  write_le32(out, 0x3C, kSyntheticLfanew);
  static constexpr std::string_view kStub = "This program cannot be run in DOS mode.\r\r\n$";
  std::copy(kStub.begin(), kStub.end(), out.begin() + 0x4E);

  // PE signature and COFF header.
  out[kSyntheticLfanew] = 'P';
  out[kSyntheticLfanew + 1] = 'E';
  write_le16(out, coff + 0, plus ? 0x8664 : 0x014C);
  write_le16(out, coff + 2, static_cast<std::uint16_t>(n));
  write_le32(out, coff + 4, static_cast<std::uint32_t>(rng.next()));
  write_le16(out, coff + 16, static_cast<std::uint16_t>(opt_size));
  write_le16(out, coff + 18, plus ? 0x0022 : 0x0102);

  // Optional header.
  const std::size_t entry_off = static_cast<std::size_t>(rng.below(std::min<std::size_t>(layout[0].filler - 16, 64)));
  const std::uint32_t entry_rva = layout[0].va + static_cast<std::uint32_t>(entry_off);
  write_le16(out, optional + 0, plus ? pe::kMagicPe32Plus : pe::kMagicPe32);
  out[optional + 2] = 14;
  write_le32(out, optional + 4, layout[0].raw_size);
  write_le32(out, optional + 16, entry_rva);
  write_le32(out, optional + 20, layout[0].va);
  if (plus) {
    write_le64(out, optional + 24, 0x140000000ULL);
  } else {
    write_le32(out, optional + 24, n > 1 ? layout[1].va : layout[0].va);
    write_le32(out, optional + 28, 0x400000);
  }
  write_le32(out, optional + 32, kSyntheticSectionAlignment);
  write_le32(out, optional + 36, kSyntheticFileAlignment);
  write_le16(out, optional + 40, 6);
  write_le16(out, optional + 48, 6);
  write_le32(out, optional + 56, size_of_image);
  write_le32(out, optional + 60, kSyntheticHeadersSize);
  write_le16(out, optional + 68, 3);
  write_le16(out, optional + 70, 0x8140);
  if (plus) {
    write_le64(out, optional + 72, 0x100000);
    write_le64(out, optional + 80, 0x1000);
    write_le64(out, optional + 88, 0x100000);
    write_le64(out, optional + 96, 0x1000);
    write_le32(out, optional + 108, 16);
  } else {
    write_le32(out, optional + 72, 0x100000);
    write_le32(out, optional + 76, 0x1000);
    write_le32(out, optional + 80, 0x100000);
    write_le32(out, optional + 84, 0x1000);
    write_le32(out, optional + 92, 16);
  }
  const std::size_t dirs = optional + (plus ? 112 : 96);

  // Section headers and filler.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = layout[i];
    const std::size_t h = table + i * pe::kSectionHeaderSize;
    std::copy(kNames[i].begin(), kNames[i].end(), out.begin() + static_cast<std::ptrdiff_t>(h));
    write_le32(out, h + 8, l.vsize);
    write_le32(out, h + 12, l.va);
    write_le32(out, h + 16, l.raw_size);
    write_le32(out, h + 20, l.raw_ptr);
    write_le32(out, h + 36, kFlags[i]);
    fill_periodic(std::span<std::uint8_t>(out).subspan(l.raw_ptr, l.filler), rng);
    filler_regions.push_back({l.raw_ptr, l.raw_ptr + l.filler});
  }

  const Layout& m = layout[meta];
  std::size_t cursor = align_up(m.filler, 8);
  auto rva_of = [&](std::size_t rel) { return static_cast<std::uint32_t>(m.va + rel); };
  auto off_of = [&](std::size_t rel) { return m.raw_ptr + rel; };

  if (opts.with_imports) {
    const std::size_t desc = cursor;
    const std::size_t ilt = desc + 40;
    const std::size_t iat = ilt + 2 * thunk;
    const std::size_t hint = iat + 2 * thunk;
    const std::size_t dll = hint + 2 + 12;  // "ExitProcess\0"
    static constexpr std::string_view kFn = "ExitProcess";
    static constexpr std::string_view kDll = "KERNEL32.dll";
    write_le32(out, off_of(desc) + 0, rva_of(ilt));
    write_le32(out, off_of(desc) + 12, rva_of(dll));
    write_le32(out, off_of(desc) + 16, rva_of(iat));
    for (std::size_t slot : {ilt, iat}) {
      if (plus) {
        write_le64(out, off_of(slot), rva_of(hint));
      } else {
        write_le32(out, off_of(slot), rva_of(hint));
      }
    }
    std::copy(kFn.begin(), kFn.end(), out.begin() + static_cast<std::ptrdiff_t>(off_of(hint) + 2));
    std::copy(kDll.begin(), kDll.end(), out.begin() + static_cast<std::ptrdiff_t>(off_of(dll)));
    write_le32(out, dirs + 8 * pe::kImportDirectory, rva_of(desc));
    write_le32(out, dirs + 8 * pe::kImportDirectory + 4, 40);
    write_le32(out, dirs + 8 * 12, rva_of(iat));
    write_le32(out, dirs + 8 * 12 + 4, static_cast<std::uint32_t>(2 * thunk));
    cursor += imports_size;
  }

  if (opts.with_debug) {
    const std::size_t entry = cursor;
    const std::size_t payload = entry + 28;
    const std::uint32_t payload_size = static_cast<std::uint32_t>(24 + kPdbName.size() + 1);
    write_le32(out, off_of(entry) + 4, static_cast<std::uint32_t>(rng.next()));
    write_le32(out, off_of(entry) + 12, 2);
    write_le32(out, off_of(entry) + 16, payload_size);
    write_le32(out, off_of(entry) + 20, rva_of(payload));
    write_le32(out, off_of(entry) + 24, static_cast<std::uint32_t>(off_of(payload)));
    static constexpr std::string_view kRsds = "RSDS";
    std::copy(kRsds.begin(), kRsds.end(), out.begin() + static_cast<std::ptrdiff_t>(off_of(payload)));
    rng.fill(std::span<std::uint8_t>(out).subspan(off_of(payload) + 4, 16));
    write_le32(out, off_of(payload) + 20, 1);
    std::copy(kPdbName.begin(), kPdbName.end(), out.begin() + static_cast<std::ptrdiff_t>(off_of(payload) + 24));
    write_le32(out, dirs + 8 * pe::kDebugDirectory, rva_of(entry));
    write_le32(out, dirs + 8 * pe::kDebugDirectory + 4, 28);
    cursor += debug_size;
  }

  if (opts.with_certificate) {
    const std::size_t body = static_cast<std::size_t>(rng.between(64, 512));
    const std::size_t len = align_up(8 + body, 8);
    const std::size_t at = out.size();
    out.resize(at + len, 0);
    write_le32(out, at, static_cast<std::uint32_t>(len));
    write_le16(out, at + 4, 0x0200);
    write_le16(out, at + 6, 0x0002);
    rng.fill(std::span<std::uint8_t>(out).subspan(at + 8, body));
    write_le32(out, dirs + 8 * pe::kCertificateDirectory, static_cast<std::uint32_t>(at));
    write_le32(out, dirs + 8 * pe::kCertificateDirectory + 4, static_cast<std::uint32_t>(len));
  }

  // Scrub accidental marker occurrences; random bytes are the only source.
  const auto find_marker = [&](std::size_t from) {
    auto it = std::search(out.begin() + static_cast<std::ptrdiff_t>(from), out.end(),
                          std::boyer_moore_horspool_searcher(kSyntheticMarker.begin(), kSyntheticMarker.end()));
    return it == out.end() ? std::optional<std::size_t>{} : std::optional<std::size_t>(it - out.begin());
  };
  for (auto hit = find_marker(0); hit; hit = find_marker(*hit >= 5 ? *hit - 5 : 0)) out[*hit] ^= 0x01;

  SyntheticPe result;
  if (opts.plant_marker) {
    std::vector<Region> fits;
    for (const auto& r : filler_regions) {
      if (r.end - r.begin >= kSyntheticMarker.size()) fits.push_back(r);
    }
    const Region& r = fits[rng.below(fits.size())];
    const std::size_t at = r.begin + static_cast<std::size_t>(rng.below(r.end - r.begin - kSyntheticMarker.size() + 1));
    std::copy(kSyntheticMarker.begin(), kSyntheticMarker.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
    result.marker_offset = at;
  }

  write_le32(out, optional + pe::kChecksumFieldOffset, compute_pe_checksum(out));
  result.bytes = std::move(out);
  return result;
}

Corpus generate_synthetic_corpus(std::size_t n_per_class, std::uint64_t seed, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (Label label : {Label::Benign, Label::Malicious}) {
      const bool mal = label == Label::Malicious;
      Rng rng(derive_seed(seed, 2 * i + (mal ? 1 : 0)));
      const auto opts = random_synthetic_options(rng, mal);
      const auto pe = make_synthetic_pe(rng, opts);
      char name[64];
      std::snprintf(name, sizeof name, "%s-%05zu.bin", mal ? "malicious" : "benign", i);
      const fs::path p = fs::absolute(fs::path(out_dir) / name).lexically_normal();
      write_file(p.string(), pe.bytes);
      ManifestEntry e;
      e.path = p.string();
      e.label = label;
      e.sha256 = sha256_hex(pe.bytes);
      e.size = pe.bytes.size();
      entries.push_back(std::move(e));
    }
  }
  Corpus out = make_corpus(std::move(entries), true);
  out.synthetic = true;
  return out;
}

}  // namespace evbench
