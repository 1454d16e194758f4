#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evbench/bytes.hpp"
#include "evbench/pe.hpp"
#include "evbench/rng.hpp"

namespace evbench {

enum class Split { Train, Test };
std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

struct ManifestEntry {
  std::string path;  // absolute
  Label label = Label::Unknown;
  std::string sha256;
  std::uint64_t size = 0;
  Split split = Split::Test;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Entries are kept sorted by sha256 and never share one.
struct Corpus {
  std::vector<ManifestEntry> entries;
  /// Set for generated corpora; lifts the live-malware gate in the CLI.
  bool synthetic = false;
  /// Hashes seen under both labels, dropped from `entries`.
  std::vector<std::string> conflicts;

  /// sha256 over the sorted "sha256,label\n" lines.
  std::string digest() const;
  std::size_t count(Label label) const;
  std::size_t count(Split split) const;
  Corpus filter(std::optional<Label> label, std::optional<Split> split = std::nullopt) const;
  /// Reads the file and checks it still hashes to the recorded digest.
  RawBinary load(const ManifestEntry& entry) const;
  std::vector<RawBinary> load_all() const;
};

/// Builds a canonical corpus: sorted, deduplicated within a label. Hashes
/// present under both labels are dropped and listed in `conflicts`; with
/// `fail_on_conflict` they raise LabelConflict instead.
Corpus make_corpus(std::vector<ManifestEntry> entries, bool fail_on_conflict = true);

/// Hashes every regular file below the two roots.
Corpus ingest_directories(const std::string& benign_root, const std::string& malicious_root,
                          bool fail_on_conflict = true);
/// `root/benign` and `root/malicious`.
Corpus ingest_tree(const std::string& root, bool fail_on_conflict = true);

/// CSV with header `path,label,sha256,size,split`. Relative paths resolve
/// against the manifest's directory. A leading `# synthetic-corpus` line marks
/// a generated corpus; other `#` lines are comments.
Corpus read_manifest(const std::string& path);
std::string format_manifest(const Corpus& corpus, const std::string& base_dir);
void write_manifest(const Corpus& corpus, const std::string& path);

inline constexpr std::string_view kSyntheticTag = "# synthetic-corpus";

/// Uniform without replacement among entries matching `label`.
Corpus sample(const Corpus& corpus, std::size_t n, std::uint64_t seed,
              std::optional<Label> label = std::nullopt);

/// Stratified by label: each class contributes round(fraction * count) files
/// to the test side. Entries carry their new split.
std::pair<Corpus, Corpus> split(const Corpus& corpus, double test_fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic PE files

/// Planted in malicious synthetic files; never present in benign ones.
inline constexpr std::array<std::uint8_t, 6> kSyntheticMarker = {0xE7, 0x1C, 0x9B, 0x4D, 0x02, 0xF5};

struct SyntheticPeOptions {
  std::size_t num_sections = 1;  // 1..3
  bool pe32_plus = false;
  bool with_imports = true;
  bool with_debug = true;
  bool with_certificate = false;
  /// Leaves raw space past each section's virtual size.
  bool vsize_slack = true;
  std::size_t min_content = 256;
  std::size_t max_content = 2048;
  bool plant_marker = false;
};

struct SyntheticPe {
  Bytes bytes;
  std::optional<std::size_t> marker_offset;
};

inline constexpr std::uint32_t kSyntheticFileAlignment = 0x200;
inline constexpr std::uint32_t kSyntheticSectionAlignment = 0x1000;
inline constexpr std::uint32_t kSyntheticHeadersSize = 0x400;
inline constexpr std::uint32_t kSyntheticLfanew = 0x80;

/// Draws section count, bitness and optional directories.
SyntheticPeOptions random_synthetic_options(Rng& rng, bool malicious);

/// A minimal PE that passes strict validation, with a valid checksum.
SyntheticPe make_synthetic_pe(Rng& rng, const SyntheticPeOptions& opts);

/// Writes `n_per_class` files of each label as `<label>-<index>.bin`.
Corpus generate_synthetic_corpus(std::size_t n_per_class, std::uint64_t seed, const std::string& out_dir);

}  // namespace evbench
