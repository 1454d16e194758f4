#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "evbench/bytes.hpp"
#include "evbench/detectors.hpp"
#include "evbench/error.hpp"
#include "evbench/pe.hpp"
#include "evbench/rng.hpp"

namespace evbench {

enum class SourceKind { RandomUniform, BenignSample, ZeroFill };
std::string_view to_string(SourceKind kind) noexcept;

/// Replacement-byte distribution for occlusion. A draw is a pure function of
/// (kind, seed, draw index, length).
class ByteSource {
 public:
  static ByteSource random_uniform(std::uint64_t seed);
  static ByteSource zero_fill();
  /// Every file must be labeled Benign; throws InvalidArgument otherwise.
  static ByteSource benign_sample(std::vector<RawBinary> benign, std::uint64_t seed);

  SourceKind kind() const { return kind_; }
  std::uint64_t seed() const { return seed_; }
  /// Same distribution and benign pool, different seed.
  ByteSource with_seed(std::uint64_t seed) const {
    ByteSource copy = *this;
    copy.seed_ = seed;
    return copy;
  }

  /// Fills `out`. Returns true if a benign draw had to stitch slices of
  /// several files because no single benign file was long enough.
  bool draw(std::span<std::uint8_t> out, std::uint64_t draw_index) const;

 private:
  ByteSource(SourceKind kind, std::uint64_t seed) : kind_(kind), seed_(seed) {}

  SourceKind kind_;
  std::uint64_t seed_;
  std::shared_ptr<const std::vector<RawBinary>> benign_;
};

enum class TieBreak { Left, Right };
enum class Side { Left, Right };

struct OcclusionConfig {
  std::size_t beta = 2048;
  TieBreak tie_break = TieBreak::Left;
  ByteSource source = ByteSource::random_uniform(0);
};

struct OcclusionLevel {
  std::size_t window_start = 0;
  std::size_t window_end = 0;
  std::size_t split = 0;
  double left_score = 0.0;   // score with [window_start, split) occluded
  double right_score = 0.0;  // score with [split, window_end) occluded
  Side choice = Side::Left;
};

struct OcclusionOutcome {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<double> baseline_score;  // set by targeted_occlusion_attack
  double final_left_score = 0.0;
  double final_right_score = 0.0;
  std::size_t calls = 0;
  std::vector<OcclusionLevel> trace;
  bool stitched_source = false;
};

/// Thrown when the detector fails mid-search; carries the levels completed.
class SearchFailure : public Error {
 public:
  SearchFailure(const std::string& detail, OcclusionOutcome partial)
      : Error(Errc::DetectorFailure, detail), partial_(std::move(partial)) {}
  const OcclusionOutcome& partial() const { return partial_; }

 private:
  OcclusionOutcome partial_;
};

/// Copy of `bytes` with [start, end) replaced by one draw from `source`.
Bytes occlude_region(ByteView bytes, std::size_t start, std::size_t end, const ByteSource& source,
                     std::uint64_t draw_index = 0);

/// Binary search for the region whose occlusion lowers the detector's score
/// the most. Each level occludes both halves of the current window (two
/// queries) and keeps the half whose occlusion scored lower, until the window
/// is no longer than beta. Issues exactly 2 queries per level and none else.
OcclusionOutcome occlusion_search(const RawBinary& bin, const DetectorHandle& detector, const OcclusionConfig& cfg);

struct AttackResult {
  Bytes occluded;
  OcclusionOutcome outcome;
  ScanResult before;
  ScanResult after;
  bool evaded = false;
};

/// Draw index used for the final occlusion of the located window.
inline constexpr std::uint64_t kFinalDrawIndex = 1ULL << 32;

AttackResult targeted_occlusion_attack(const RawBinary& bin, const DetectorHandle& detector,
                                       const OcclusionConfig& cfg);

struct UndirectedResult {
  Bytes occluded;
  std::size_t start = 0;
  std::size_t end = 0;
};

/// Overwrites a uniformly placed window of `beta` bytes with uniform random
/// bytes. No detector queries.
UndirectedResult undirected_occlusion(ByteView bytes, std::size_t beta, Rng& rng);

}  // namespace evbench
