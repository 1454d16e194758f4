#include "evbench/detectors.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>

#include "evbench/error.hpp"
#include "evbench/process.hpp"
#include "evbench/rng.hpp"

namespace evbench {

std::string_view to_string(Decision d) noexcept { return d == Decision::Malicious ? "malicious" : "benign"; }

DetectorHandle::DetectorHandle(std::string id, std::shared_ptr<Scorer> scorer, double threshold)
    : id_(std::move(id)), scorer_(std::move(scorer)), threshold_(threshold) {
  if (!scorer_) throw Error(Errc::InvalidArgument, "detector '" + id_ + "' has no scorer");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(Errc::InvalidArgument, "detector '" + id_ + "' threshold must lie in [0,1]");
  }
  if (!scorer_->reentrant()) serial_ = std::make_shared<std::mutex>();
}

ScanResult DetectorHandle::scan(ByteView bytes) const {
  const auto t0 = std::chrono::steady_clock::now();
  double score = 0.0;
  if (serial_) {
    std::lock_guard lock(*serial_);
    score = scorer_->score(bytes);
  } else {
    score = scorer_->score(bytes);
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error(Errc::DetectorFailure, "detector '" + id_ + "' returned score outside [0,1]");
  }
  ScanResult r;
  r.score = score;
  r.decision = decide(score);
  r.latency = std::chrono::steady_clock::now() - t0;
  return r;
}

// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(ByteView data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint64_t> extract_features(ByteView bytes, std::uint32_t n, std::uint64_t num_buckets) {
  if (n < 1) throw Error(Errc::PreconditionViolated, "n-gram length must be at least 1");
  if (num_buckets < 1) throw Error(Errc::PreconditionViolated, "bucket count must be at least 1");
  std::vector<std::uint64_t> out;
  if (bytes.size() < n) return out;
  out.reserve(bytes.size() - n + 1);
  for (std::size_t i = 0; i + n <= bytes.size(); ++i) {
    out.push_back(fnv1a64(bytes.subspan(i, n)) % num_buckets);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

NGramModel NGramModel::zeros(std::uint32_t n, std::uint64_t num_buckets) {
  NGramModel m;
  m.n = n;
  m.num_buckets = num_buckets;
  m.weights.assign(num_buckets, 0.0);
  return m;
}

namespace {

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

NGramModel train(std::span<const LabeledBytes> corpus, const TrainParams& params) {
  std::size_t n_mal = 0;
  std::size_t n_ben = 0;
  for (const auto& ex : corpus) {
    if (ex.label == Label::Malicious) ++n_mal;
    if (ex.label == Label::Benign) ++n_ben;
  }
  if (n_mal == 0 || n_ben == 0) {
    throw Error(Errc::DegenerateCorpus, "training needs both classes (malicious=" + std::to_string(n_mal) +
                                            ", benign=" + std::to_string(n_ben) + ")");
  }

  std::vector<std::vector<std::uint64_t>> features;
  std::vector<double> targets;
  for (const auto& ex : corpus) {
    if (ex.label == Label::Unknown) continue;
    features.push_back(extract_features(ex.bytes, params.n, params.num_buckets));
    targets.push_back(ex.label == Label::Malicious ? 1.0 : 0.0);
  }

  NGramModel model = NGramModel::zeros(params.n, params.num_buckets);
  model.training = params;
  // weights = scale * v, so L2 decay is a single multiply per example.
  std::vector<double>& v = model.weights;
  double scale = 1.0;
  Rng rng(params.seed);
  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const double lr = params.learning_rate / (1.0 + static_cast<double>(epoch));
    for (std::size_t idx : order) {
      const auto& f = features[idx];
      double z = 0.0;
      for (auto b : f) z += v[b];
      const double p = logistic(model.bias + scale * z);
      const double g = p - targets[idx];
      scale *= 1.0 - lr * params.l2;
      const double step = lr * g / scale;
      for (auto b : f) v[b] -= step;
      model.bias -= lr * g;
      if (scale < 1e-8) {
        for (auto& w : v) w *= scale;
        scale = 1.0;
      }
    }
  }
  for (auto& w : v) w *= scale;
  return model;
}

double predict(const NGramModel& model, ByteView bytes) {
  if (model.weights.size() != model.num_buckets) throw Error(Errc::Corrupt, "model weight count mismatch");
  double z = model.bias;
  for (auto b : extract_features(bytes, model.n, model.num_buckets)) z += model.weights[b];
  return logistic(z);
}

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(Bytes& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, sizeof v);
  put_u64(out, v);
}

double get_f64(ByteView b, std::size_t off) {
  std::uint64_t v = read_le64(b, off);
  double d;
  std::memcpy(&d, &v, sizeof d);
  return d;
}

}  // namespace

Bytes encode_model(const NGramModel& model) {
  if (model.weights.size() != model.num_buckets) throw Error(Errc::Corrupt, "model weight count mismatch");
  Bytes out(kModelMagic.begin(), kModelMagic.end());
  out.reserve(6 + 4 + 4 + 8 + 8 + 8 * model.weights.size() + 8);
  put_u32(out, kModelFormatVersion);
  put_u32(out, model.n);
  put_u64(out, model.num_buckets);
  put_f64(out, model.bias);
  for (double w : model.weights) put_f64(out, w);
  put_u64(out, model.training.seed);
  return out;
}

NGramModel decode_model(ByteView b) {
  const std::size_t magic = kModelMagic.size();
  const std::size_t prefix = std::min(b.size(), magic);
  if (!std::equal(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(prefix), kModelMagic.begin())) {
    throw Error(Errc::BadMagic, "not an n-gram model file");
  }
  constexpr std::size_t kFixed = 4 + 4 + 8 + 8;
  if (b.size() < magic + kFixed + 8) throw Error(Errc::Corrupt, "model file truncated");
  const std::uint32_t version = read_le32(b, magic);
  if (version != kModelFormatVersion) {
    throw Error(Errc::VersionMismatch, "model format version " + std::to_string(version) + ", expected " +
                                           std::to_string(kModelFormatVersion));
  }
  NGramModel m;
  m.n = read_le32(b, magic + 4);
  m.num_buckets = read_le64(b, magic + 8);
  m.bias = get_f64(b, magic + 16);
  if (m.n == 0 || m.num_buckets == 0 || m.num_buckets > (b.size() - magic - kFixed - 8) / 8 ||
      b.size() != magic + kFixed + 8 * m.num_buckets + 8) {
    throw Error(Errc::Corrupt, "model file size does not match its header");
  }
  m.weights.resize(m.num_buckets);
  std::size_t off = magic + kFixed;
  for (auto& w : m.weights) {
    w = get_f64(b, off);
    off += 8;
  }
  m.training.n = m.n;
  m.training.num_buckets = m.num_buckets;
  m.training.seed = read_le64(b, off);
  return m;
}

void save_model(const NGramModel& model, const std::string& path) { write_file(path, encode_model(model)); }

NGramModel load_model(const std::string& path) { return decode_model(read_file(path)); }

std::string NGramScorer::describe() const {
  return "ngram(n=" + std::to_string(model_->n) + ", buckets=" + std::to_string(model_->num_buckets) + ")";
}

std::string ConstantScorer::describe() const { return "constant(" + std::to_string(value_) + ")"; }

MarkerScorer::MarkerScorer(Bytes marker) : marker_(std::move(marker)) {
  if (marker_.empty()) throw Error(Errc::InvalidArgument, "marker must not be empty");
}

double MarkerScorer::score(ByteView bytes) {
  auto it = std::search(bytes.begin(), bytes.end(),
                        std::boyer_moore_horspool_searcher(marker_.begin(), marker_.end()));
  return it == bytes.end() ? 0.0 : 1.0;
}

std::string MarkerScorer::describe() const { return "marker(" + to_hex(marker_) + ")"; }

// ---------------------------------------------------------------------------

void validate(const AdapterConfig& cfg) {
  if (cfg.command.empty()) throw Error(Errc::InvalidConfig, "adapter command is empty");
  if (cfg.startup_timeout.count() <= 0 || cfg.scan_timeout.count() <= 0) {
    throw Error(Errc::InvalidConfig, "adapter timeouts must be positive");
  }
}

double parse_adapter_reply(std::string_view line) {
  auto starts = [&](std::string_view p) { return line.substr(0, p.size()) == p; };
  if (starts("SCORE ")) {
    std::string num(line.substr(6));
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(num.c_str(), &end);
    if (num.empty() || end != num.c_str() + num.size() || errno != 0 || !std::isfinite(v)) {
      throw Error(Errc::AdapterProtocolError, "unparseable score in reply '" + std::string(line) + "'");
    }
    if (v < 0.0 || v > 1.0) throw Error(Errc::AdapterProtocolError, "score out of [0,1]: '" + std::string(line) + "'");
    return v;
  }
  if (line == "DECISION MALICIOUS") return 1.0;
  if (line == "DECISION BENIGN") return 0.0;
  if (starts("ERROR")) {
    std::string_view msg = line.size() > 6 ? line.substr(6) : std::string_view{};
    throw Error(Errc::DetectorFailure, "adapter reported: " + std::string(msg));
  }
  throw Error(Errc::AdapterProtocolError, "unexpected reply '" + std::string(line) + "'");
}

namespace {

void ignore_sigpipe() {
  static const bool once = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

}  // namespace

ExternalAdapter::ExternalAdapter(AdapterConfig cfg) : cfg_(std::move(cfg)) {
  validate(cfg_);
  ignore_sigpipe();
}

ExternalAdapter::~ExternalAdapter() {
  try {
    stop();
  } catch (...) {
  }
}

bool ExternalAdapter::running() const { return child_ && !child_->eof(); }

void ExternalAdapter::kill() {
  if (child_) child_->terminate(std::chrono::milliseconds(0));
  child_.reset();
}

void ExternalAdapter::start() {
  if (running()) return;
  kill();
  if (launches_ > 0 && !cfg_.restart_on_error) {
    throw Error(Errc::AdapterCrashed, "adapter is down and restart_on_error is off");
  }
  if (!find_executable(cfg_.command.front())) {
    throw Error(Errc::AdapterCrashed, "adapter executable not found: " + cfg_.command.front());
  }
  child_ = std::make_unique<ChildProcess>(cfg_.command);
  if (launches_++ > 0) ++restarts_;
  auto line = child_->read_line(cfg_.startup_timeout);
  if (!line) {
    const bool crashed = child_->eof();
    kill();
    if (crashed) throw Error(Errc::AdapterCrashed, "adapter exited before READY");
    throw Error(Errc::AdapterTimeout, "adapter did not send READY within startup timeout");
  }
  if (*line != "READY") {
    kill();
    throw Error(Errc::AdapterProtocolError, "expected READY, got '" + *line + "'");
  }
}

void ExternalAdapter::stop() {
  if (child_ && !child_->eof()) {
    child_->write_line("QUIT");
    child_->terminate(std::chrono::milliseconds(1000));
  }
  child_.reset();
}

double ExternalAdapter::exchange(const std::string& absolute_path) {
  if (!child_->write_line("SCAN " + absolute_path)) {
    kill();
    throw Error(Errc::AdapterCrashed, "adapter stdin closed");
  }
  auto line = child_->read_line(cfg_.scan_timeout);
  if (!line) {
    const bool crashed = child_->eof();
    kill();
    if (crashed) throw Error(Errc::AdapterCrashed, "adapter exited during scan");
    throw Error(Errc::AdapterTimeout, "scan exceeded " + std::to_string(cfg_.scan_timeout.count()) + " ms");
  }
  try {
    return parse_adapter_reply(*line);
  } catch (const Error& e) {
    if (e.code() == Errc::AdapterProtocolError) kill();
    throw;
  }
}

double ExternalAdapter::scan_path(const std::string& absolute_path) {
  start();
  try {
    return exchange(absolute_path);
  } catch (const Error& e) {
    if (e.code() != Errc::AdapterCrashed || !cfg_.restart_on_error) throw;
  }
  start();
  return exchange(absolute_path);
}

ScanResult external_scan(ExternalAdapter& adapter, const std::string& absolute_path, double threshold) {
  const auto t0 = std::chrono::steady_clock::now();
  ScanResult r;
  r.score = adapter.scan_path(absolute_path);
  r.decision = r.score >= threshold ? Decision::Malicious : Decision::Benign;
  r.latency = std::chrono::steady_clock::now() - t0;
  return r;
}

struct ExternalScorer::Pool {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::unique_ptr<ExternalAdapter>> adapters;
  std::vector<ExternalAdapter*> idle;
};

ExternalScorer::ExternalScorer(AdapterConfig cfg, std::size_t pool_size)
    : cfg_(std::move(cfg)), pool_(std::make_unique<Pool>()) {
  validate(cfg_);
  for (std::size_t i = 0; i < std::max<std::size_t>(pool_size, 1); ++i) {
    pool_->adapters.push_back(std::make_unique<ExternalAdapter>(cfg_));
    pool_->idle.push_back(pool_->adapters.back().get());
  }
}

ExternalScorer::~ExternalScorer() = default;

double ExternalScorer::score(ByteView bytes) {
  static std::atomic<std::uint64_t> counter{0};
  const auto path = std::filesystem::temp_directory_path() /
                    ("evbench-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".bin");
  write_file(path.string(), bytes);

  ExternalAdapter* adapter = nullptr;
  {
    std::unique_lock lock(pool_->mu);
    pool_->cv.wait(lock, [&] { return !pool_->idle.empty(); });
    adapter = pool_->idle.back();
    pool_->idle.pop_back();
  }
  auto release = [&] {
    {
      std::lock_guard lock(pool_->mu);
      pool_->idle.push_back(adapter);
    }
    pool_->cv.notify_one();
    std::error_code ec;
    std::filesystem::remove(path, ec);
  };
  try {
    const double s = adapter->scan_path(std::filesystem::absolute(path).string());
    release();
    return s;
  } catch (...) {
    release();
    throw;
  }
}

std::string ExternalScorer::describe() const {
  std::string out = "external(";
  for (std::size_t i = 0; i < cfg_.command.size(); ++i) out += (i ? " " : "") + cfg_.command[i];
  return out + ")";
}

}  // namespace evbench
