#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "evbench/bytes.hpp"
#include "evbench/pe.hpp"
#include "evbench/rng.hpp"

namespace evbench {

class DetectorHandle;

enum class MutationKind {
  RenameSection,
  AddSection,
  AppendToSection,
  AppendOverlay,
  AddImport,
  NewEntryPoint,
  ZeroChecksum,
  StripSignature,
  ScrambleDebug,
};

inline constexpr std::array<MutationKind, 9> kAllMutations = {
    MutationKind::RenameSection, MutationKind::AddSection,     MutationKind::AppendToSection,
    MutationKind::AppendOverlay, MutationKind::AddImport,      MutationKind::NewEntryPoint,
    MutationKind::ZeroChecksum,  MutationKind::StripSignature, MutationKind::ScrambleDebug,
};

std::string_view to_string(MutationKind kind) noexcept;
MutationKind parse_mutation_kind(std::string_view text);

/// Versioned pools shipped with the artifact so runs are reproducible.
inline constexpr int kMutationPoolVersion = 1;
inline constexpr std::array<std::string_view, 5> kBenignSectionNames = {".text", ".rdata", ".data",
                                                                        ".rsrc", ".reloc"};
struct ImportPoolEntry {
  std::string_view dll;
  std::string_view function;
};
inline constexpr std::array<ImportPoolEntry, 12> kBenignImports = {{
    {"KERNEL32.dll", "GetTickCount"},
    {"KERNEL32.dll", "GetCurrentProcessId"},
    {"KERNEL32.dll", "GetLastError"},
    {"KERNEL32.dll", "Sleep"},
    {"KERNEL32.dll", "GetVersion"},
    {"USER32.dll", "GetSystemMetrics"},
    {"USER32.dll", "MessageBeep"},
    {"ADVAPI32.dll", "GetUserNameA"},
    {"GDI32.dll", "GetStockObject"},
    {"SHELL32.dll", "SHGetFolderPathA"},
    {"msvcrt.dll", "rand"},
    {"ole32.dll", "CoInitialize"},
}};

/// Bytes drawn for appended or overwritten regions.
enum class FillerMode { Uniform, BenignSample };

struct MutationOptions {
  std::size_t append_min = 1;
  std::size_t append_max = 4096;
  std::size_t new_section_min = 64;
  std::size_t new_section_max = 4096;
  bool allow_section_growth = true;
  FillerMode filler = FillerMode::Uniform;
  /// Benign files to slice filler from when filler == BenignSample.
  std::vector<ByteView> benign_pool;
};

struct RenameSectionParams { std::size_t index = 0; };
struct AddSectionParams {};
struct AppendToSectionParams { std::size_t index = 0; std::size_t count = 0; };
struct AppendOverlayParams { std::size_t count = 0; };
struct AddImportParams {};
struct NewEntryPointParams {};
struct ZeroChecksumParams {};
struct StripSignatureParams {};
struct ScrambleDebugParams {};

using MutationParams =
    std::variant<RenameSectionParams, AddSectionParams, AppendToSectionParams, AppendOverlayParams,
                 AddImportParams, NewEntryPointParams, ZeroChecksumParams, StripSignatureParams,
                 ScrambleDebugParams>;

/// One concrete modification: the variant index of `params` is the kind.
/// `seed` drives every random choice the action makes (names, filler).
struct MutationAction {
  MutationParams params;
  std::uint64_t seed = 0;

  MutationKind kind() const { return static_cast<MutationKind>(params.index()); }
};

struct MutationRecord {
  MutationAction action;
  std::uint64_t rng_seed = 0;
  std::string pre_sha256;
  std::string post_sha256;
  bool no_op = false;
};

enum class ChainStatus { AlreadyEvading, Evaded, Survived };
std::string_view to_string(ChainStatus status) noexcept;

struct ChainResult {
  ChainStatus status = ChainStatus::Survived;
  std::size_t evaded_at = 0;  // k when status == Evaded
  std::vector<MutationRecord> records;
  double initial_score = 0.0;
  std::vector<double> scores;  // after each step
  Bytes final_bytes;
};

// Individual actions. Each returns the complete output file.
Bytes rename_section(const PeFile& pe, std::size_t index, Rng& rng);
Bytes add_section(const PeFile& pe, Rng& rng, const MutationOptions& opts = {});
Bytes append_to_section(const PeFile& pe, std::size_t index, std::size_t count, Rng& rng,
                        const MutationOptions& opts = {});
Bytes append_overlay(const PeFile& pe, std::size_t count, Rng& rng, const MutationOptions& opts = {});
Bytes add_import(const PeFile& pe, Rng& rng);
Bytes new_entry_point(const PeFile& pe, Rng& rng);
Bytes zero_checksum(const PeFile& pe);
Bytes strip_signature(const PeFile& pe);
Bytes scramble_debug(const PeFile& pe, Rng& rng);

/// Size of the entry stub: `E9 rel32`.
inline constexpr std::size_t kEntryStubSize = 5;
/// Decodes a `jmp rel32` at `rva`; returns the jump target RVA.
std::optional<std::uint32_t> decode_jump_target(const PeFile& pe, std::uint32_t rva);

bool is_applicable(const PeFile& pe, MutationKind kind, const MutationOptions& opts = {});

/// Draws kind-specific parameters (index, byte counts) for `pe`.
MutationAction draw_action(const PeFile& pe, MutationKind kind, Rng& rng,
                           const MutationOptions& opts = {});

Bytes apply_action(const PeFile& pe, const MutationAction& action, const MutationOptions& opts = {});

struct ChainConfig {
  std::size_t max_steps = 10;
  std::uint64_t seed = 0;
  MutationOptions options;
};

/// Scans, and while the decision is Malicious, applies a uniformly chosen
/// applicable action and rescans, for at most `max_steps` steps.
ChainResult apply_random_chain(const RawBinary& bin, const DetectorHandle& detector,
                               const ChainConfig& cfg);

/// Re-applies recorded actions in order; returns the per-step outputs.
std::vector<Bytes> replay_chain(const RawBinary& bin, const std::vector<MutationRecord>& records,
                                const MutationOptions& opts = {});

}  // namespace evbench
