#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evbench/bytes.hpp"
#include "evbench/pe.hpp"

namespace evbench {

enum class Decision { Benign, Malicious };
std::string_view to_string(Decision d) noexcept;

struct ScanResult {
  double score = 0.0;
  Decision decision = Decision::Benign;
  std::chrono::nanoseconds latency{0};
};

/// A confidence oracle: bytes -> probability the file is malicious. Callers
/// only ever see the score, never features or gradients.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(ByteView bytes) = 0;
  /// Whether concurrent score() calls are safe.
  virtual bool reentrant() const { return true; }
  virtual std::string describe() const = 0;
};

class DetectorHandle {
 public:
  DetectorHandle(std::string id, std::shared_ptr<Scorer> scorer, double threshold = 0.5);

  const std::string& id() const { return id_; }
  double threshold() const { return threshold_; }
  bool reentrant() const { return scorer_->reentrant(); }
  std::string describe() const { return scorer_->describe(); }

  /// Scores `bytes`; decision is Malicious iff score >= threshold. Scores
  /// outside [0,1] are rejected with DetectorFailure.
  ScanResult scan(ByteView bytes) const;
  Decision decide(double score) const { return score >= threshold_ ? Decision::Malicious : Decision::Benign; }

 private:
  std::string id_;
  std::shared_ptr<Scorer> scorer_;
  double threshold_;
  std::shared_ptr<std::mutex> serial_;  // held around non-reentrant scorers
};

// ---------------------------------------------------------------------------
// Byte n-gram model

inline constexpr std::uint32_t kDefaultGramLength = 6;
inline constexpr std::uint64_t kDefaultBuckets = 1ULL << 20;

std::uint64_t fnv1a64(ByteView data);

/// Sorted, distinct bucket indices of every n-gram present in `bytes`.
std::vector<std::uint64_t> extract_features(ByteView bytes, std::uint32_t n = kDefaultGramLength,
                                            std::uint64_t num_buckets = kDefaultBuckets);

struct TrainParams {
  std::uint32_t n = kDefaultGramLength;
  std::uint64_t num_buckets = kDefaultBuckets;
  std::size_t epochs = 8;
  double learning_rate = 0.2;
  double l2 = 1e-6;
  std::uint64_t seed = 0;
};

struct NGramModel {
  std::uint32_t n = kDefaultGramLength;
  std::uint64_t num_buckets = kDefaultBuckets;
  std::vector<double> weights;
  double bias = 0.0;
  TrainParams training;  // only `seed` survives save/load

  static NGramModel zeros(std::uint32_t n = kDefaultGramLength, std::uint64_t num_buckets = kDefaultBuckets);
};

struct LabeledBytes {
  ByteView bytes;
  Label label = Label::Unknown;
};

/// Logistic regression on presence features, SGD with L2. Deterministic for
/// a given seed; throws DegenerateCorpus unless both classes are present.
NGramModel train(std::span<const LabeledBytes> corpus, const TrainParams& params);

/// logistic(bias + sum of weights over present buckets).
double predict(const NGramModel& model, ByteView bytes);

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::string_view kModelMagic = "SUBNG1";

Bytes encode_model(const NGramModel& model);
NGramModel decode_model(ByteView data);
void save_model(const NGramModel& model, const std::string& path);
NGramModel load_model(const std::string& path);

class NGramScorer final : public Scorer {
 public:
  explicit NGramScorer(std::shared_ptr<const NGramModel> model) : model_(std::move(model)) {}
  double score(ByteView bytes) override { return predict(*model_, bytes); }
  std::string describe() const override;
  const NGramModel& model() const { return *model_; }

 private:
  std::shared_ptr<const NGramModel> model_;
};

// ---------------------------------------------------------------------------
// Built-in diagnostic scorers

/// Always returns the same score.
class ConstantScorer final : public Scorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(ByteView) override { return value_; }
  std::string describe() const override;

 private:
  double value_;
};

/// 1.0 if the byte pattern occurs anywhere in the file, else 0.0.
class MarkerScorer final : public Scorer {
 public:
  explicit MarkerScorer(Bytes marker);
  double score(ByteView bytes) override;
  std::string describe() const override;

 private:
  Bytes marker_;
};

class FunctionScorer final : public Scorer {
 public:
  FunctionScorer(std::function<double(ByteView)> fn, std::string name, bool reentrant = true)
      : fn_(std::move(fn)), name_(std::move(name)), reentrant_(reentrant) {}
  double score(ByteView bytes) override { return fn_(bytes); }
  bool reentrant() const override { return reentrant_; }
  std::string describe() const override { return name_; }

 private:
  std::function<double(ByteView)> fn_;
  std::string name_;
  bool reentrant_;
};

// ---------------------------------------------------------------------------
// External adapters over the line protocol:
//   adapter -> READY
//   engine  -> SCAN <absolute-path>
//   adapter -> SCORE <x> | DECISION MALICIOUS | DECISION BENIGN | ERROR <msg>
//   engine  -> QUIT

struct AdapterConfig {
  std::vector<std::string> command;
  std::chrono::milliseconds startup_timeout{10'000};
  std::chrono::milliseconds scan_timeout{30'000};
  bool restart_on_error = true;
};

/// Checks the adapter config invariants; throws InvalidConfig.
void validate(const AdapterConfig& cfg);

/// Parses one reply line into a score; throws AdapterProtocolError on a
/// malformed or out-of-range reply and DetectorFailure on `ERROR`.
double parse_adapter_reply(std::string_view line);

class ChildProcess;

/// One adapter process. Not thread-safe; a pool serializes access.
class ExternalAdapter {
 public:
  explicit ExternalAdapter(AdapterConfig cfg);
  ~ExternalAdapter();
  ExternalAdapter(const ExternalAdapter&) = delete;
  ExternalAdapter& operator=(const ExternalAdapter&) = delete;

  /// Launches the process if it is not running and waits for READY.
  void start();
  bool running() const;
  /// Sends QUIT and reaps the process.
  void stop();
  /// One SCAN exchange. On crash or timeout the process is discarded; with
  /// restart_on_error a crashed adapter is restarted and the scan retried once.
  double scan_path(const std::string& absolute_path);
  std::size_t restarts() const { return restarts_; }

 private:
  double exchange(const std::string& absolute_path);
  void kill();

  AdapterConfig cfg_;
  std::unique_ptr<ChildProcess> child_;
  std::size_t launches_ = 0;
  std::size_t restarts_ = 0;
};

ScanResult external_scan(ExternalAdapter& adapter, const std::string& absolute_path, double threshold = 0.5);

/// Scores bytes by writing them to a private temporary file and asking one of
/// `pool_size` adapter processes to scan it.
class ExternalScorer final : public Scorer {
 public:
  ExternalScorer(AdapterConfig cfg, std::size_t pool_size = 1);
  ~ExternalScorer() override;
  double score(ByteView bytes) override;
  std::string describe() const override;

 private:
  struct Pool;
  AdapterConfig cfg_;
  std::unique_ptr<Pool> pool_;
};

}  // namespace evbench
