#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evbench/corpus.hpp"
#include "evbench/detectors.hpp"
#include "evbench/protocol.hpp"
#include "evbench/report.hpp"

namespace evbench {

inline constexpr std::string_view kArtifactVersion = "1.0.0";

enum class DetectorKind { NGram, External, Constant, Marker };

struct DetectorSpec {
  std::string id;
  DetectorKind kind = DetectorKind::NGram;
  std::string arg;  // model path, command line, constant score or marker hex
  double threshold = 0.5;
  std::chrono::milliseconds startup_timeout{10'000};
  std::chrono::milliseconds scan_timeout{30'000};
  bool restart_on_error = true;
  std::size_t pool = 1;
};

/// `id=ngram:PATH`, `id=external:COMMAND`, `id=constant:SCORE` or
/// `id=marker:HEX`. Throws InvalidArgument.
DetectorSpec parse_detector_spec(std::string_view text);

/// Loads the model or prepares the adapter pool.
DetectorHandle make_detector(const DetectorSpec& spec);

struct BenignModSettings {
  std::size_t max_steps = 10;
  std::size_t subset = 0;  // 0 = every malicious file
  FillerMode filler = FillerMode::Uniform;
};

struct OcclusionSettings {
  std::string search_detector;
  OcclusionExperimentConfig experiment;
  std::size_t subset = 0;
};

struct TransformSettings {
  std::string command;
  std::chrono::milliseconds timeout{60'000};
};

enum class SplitSelection { Test, Train, All };

struct RunConfig {
  std::string manifest;
  SplitSelection split = SplitSelection::Test;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::string output;
  std::vector<DetectorSpec> detectors;
  std::optional<BenignModSettings> benign_mod;
  std::optional<OcclusionSettings> occlusion;
  std::optional<TransformSettings> packing;
  std::optional<TransformSettings> mutator;
};

/// Flat sections of `key = value` lines: [run], [detector.<id>], [benign_mod],
/// [occlusion], [packing], [mutator]. Relative paths resolve against
/// `base_dir`. Throws InvalidConfig naming the offending field.
RunConfig parse_run_config(std::string_view text, const std::string& base_dir);
RunConfig load_run_config(const std::string& path);

/// Cross-field checks: seed present, ids unique, referenced detectors and
/// paths exist. Throws InvalidConfig.
void validate(const RunConfig& cfg);

/// Canonical form of everything that affects results (no output path, no
/// worker count).
Json canonical_config(const RunConfig& cfg);

/// Executes every configured technique over the selected corpus entries and
/// returns the ledger. Progress lines go to `log` when given.
Ledger run_protocol(const RunConfig& cfg, const Corpus& corpus, std::ostream* log = nullptr);

}  // namespace evbench
