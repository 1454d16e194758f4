#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evbench/detectors.hpp"
#include "evbench/mutations.hpp"
#include "evbench/occlusion.hpp"
#include "evbench/pe.hpp"

namespace evbench {

// ---------------------------------------------------------------------------
// Confusion counts and metrics. Malware is the positive class.

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  void add(Label truth, Decision decision);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
  double tp_pct = 0.0;  // over malicious
  double fn_pct = 0.0;
  double tn_pct = 0.0;  // over benign
  double fp_pct = 0.0;
  double accuracy_pct = 0.0;
};

/// Throws ZeroClass if either class is empty and PreconditionViolated if the
/// counts do not add up to the class sizes.
Metrics compute_metrics(const ConfusionCounts& counts, std::size_t n_malicious, std::size_t n_benign);

/// post_detect - (100 - pre_benign_acc): detections on transformed benign
/// files net of the baseline false-positive rate.
double compute_lift(double pre_benign_acc_pct, double post_detect_pct);

/// 100 * num / den, nullopt when den == 0.
std::optional<double> percent(std::size_t num, std::size_t den);

// ---------------------------------------------------------------------------
// Execution helpers

/// Runs fn(0..n-1) on up to `workers` threads. Exceptions escaping fn are
/// rethrown after all workers stop (the first one wins).
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Per-file seed: independent of corpus order, stable across runs.
std::uint64_t file_seed(std::uint64_t technique_seed, const std::string& sha256_hex);

struct ScanRecord {
  std::string sha256;
  Label label = Label::Unknown;
  std::optional<ScanResult> result;  // empty when the scan failed
  std::string error;
};

// ---------------------------------------------------------------------------
// Baseline

struct BaselineResult {
  ConfusionCounts counts;
  std::vector<ScanRecord> records;  // input order
  std::size_t errors = 0;
};

/// One scan per file; failed scans are recorded and excluded from counts.
/// Throws EmptyCorpus for no files.
BaselineResult baseline_eval(const std::vector<RawBinary>& files, const DetectorHandle& detector,
                             std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Benign modification chains

struct EvasionCurve {
  std::vector<std::size_t> evaded_by;  // index k = 0..max_steps
  std::size_t already_fn = 0;
  std::size_t survived = 0;  // includes files whose chain errored
  std::size_t errors = 0;

  std::size_t tested() const { return already_fn + (evaded_by.empty() ? 0 : evaded_by.back()) + survived; }
};

struct ChainFileRecord {
  std::string sha256;
  std::string detector;
  std::uint64_t seed = 0;
  std::optional<ChainResult> result;
  std::string error;
};

/// Folds chain outcomes into a curve: Evaded at k counts toward evaded_by[j]
/// for every j >= k.
EvasionCurve make_curve(const std::vector<ChainFileRecord>& records, std::size_t max_steps);

struct BenignModResult {
  std::map<std::string, EvasionCurve> curves;  // by detector id
  std::vector<ChainFileRecord> records;        // file-major, detector-minor
};

/// Every file must be labeled Malicious. Each detector sees the same per-file
/// seed, so chains differ only where the detectors' decisions differ.
BenignModResult run_benign_mod_experiment(const std::vector<RawBinary>& files,
                                          const std::vector<DetectorHandle>& detectors, std::size_t max_steps,
                                          std::uint64_t seed, const MutationOptions& options = {},
                                          std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Occlusion

enum class OcclusionMode { None, Undirected, TargetedRandom, TargetedAdversarial };
std::string_view to_string(OcclusionMode mode) noexcept;
OcclusionMode parse_occlusion_mode(std::string_view text);
inline constexpr std::array<OcclusionMode, 4> kAllOcclusionModes = {
    OcclusionMode::None, OcclusionMode::Undirected, OcclusionMode::TargetedRandom,
    OcclusionMode::TargetedAdversarial};

struct OcclusionExperimentConfig {
  std::size_t beta = 2048;
  TieBreak tie_break = TieBreak::Left;
  std::vector<OcclusionMode> modes{kAllOcclusionModes.begin(), kAllOcclusionModes.end()};
  /// Search against every detector instead of transferring one search.
  bool per_detector_search = false;
};

struct OcclusionFileRecord {
  std::string sha256;
  OcclusionMode mode = OcclusionMode::None;
  std::string search_detector;  // empty for None and Undirected
  std::uint64_t seed = 0;
  std::optional<OcclusionOutcome> outcome;  // targeted modes
  std::size_t start = 0;
  std::size_t end = 0;
  std::string occluded_sha256;
  std::string error;
  /// Scans of the occluded file (or the original for None), one per detector.
  std::vector<std::pair<std::string, ScanRecord>> scans;
};

struct OcclusionResult {
  std::vector<OcclusionFileRecord> records;
};

/// For each malicious file and mode: locate and occlude a region (searching
/// against `search_detector`), then scan the result with every detector.
/// `benign` feeds the adversarial byte source.
OcclusionResult run_occlusion_experiment(const std::vector<RawBinary>& malicious, const std::vector<RawBinary>& benign,
                                         const std::string& search_detector,
                                         const std::vector<DetectorHandle>& detectors,
                                         const OcclusionExperimentConfig& cfg, std::uint64_t seed,
                                         std::size_t workers = 1);

// ---------------------------------------------------------------------------
// External transformations (packers, injection tools)

struct TransformCommand {
  std::vector<std::string> argv;  // contains {in} and {out}
  std::chrono::milliseconds timeout{60'000};
};

/// Parses and checks a command template; throws InvalidConfig.
TransformCommand parse_transform_command(const std::string& line,
                                         std::chrono::milliseconds timeout = std::chrono::milliseconds(60'000));

struct TransformFileRecord {
  std::string sha256;
  Label label = Label::Unknown;
  bool ok = false;
  std::string output_sha256;
  std::string error;
  std::vector<std::pair<std::string, ScanRecord>> original_scans;
  std::vector<std::pair<std::string, ScanRecord>> transformed_scans;
};

struct TransformResult {
  std::vector<TransformFileRecord> records;
  std::size_t failures = 0;
};

/// Runs the packer over every file (outputs under `work_dir`) and scans the
/// originals and packed outputs. Throws PackerMissing if the executable
/// cannot be found; per-file failures are recorded as PackerFailed.
TransformResult run_packing_experiment(const std::vector<RawBinary>& files,
                                       const std::vector<DetectorHandle>& detectors, const TransformCommand& pack,
                                       const std::string& work_dir, std::size_t workers = 1);

/// Same flow for benign files and an injection tool; the mutated outputs are
/// ground-truth malicious. Per-file failures are recorded as MutatorFailed.
TransformResult run_external_mutator_experiment(const std::vector<RawBinary>& benign,
                                                const std::vector<DetectorHandle>& detectors,
                                                const TransformCommand& mutate, const std::string& work_dir,
                                                std::size_t workers = 1);

}  // namespace evbench
