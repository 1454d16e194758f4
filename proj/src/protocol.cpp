#include "evbench/protocol.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "evbench/error.hpp"
#include "evbench/process.hpp"
#include "evbench/sha256.hpp"

namespace fs = std::filesystem;

namespace evbench {

void ConfusionCounts::add(Label truth, Decision decision) {
  const bool flagged = decision == Decision::Malicious;
  if (truth == Label::Malicious) {
    ++(flagged ? tp : fn);
  } else if (truth == Label::Benign) {
    ++(flagged ? fp : tn);
  } else {
    throw Error(Errc::PreconditionViolated, "cannot count a file with unknown label");
  }
}

Metrics compute_metrics(const ConfusionCounts& c, std::size_t n_malicious, std::size_t n_benign) {
  if (n_malicious == 0 || n_benign == 0) {
    throw Error(Errc::ZeroClass, "metrics need at least one file of each class (malicious=" +
                                     std::to_string(n_malicious) + ", benign=" + std::to_string(n_benign) + ")");
  }
  if (c.tp + c.fn != n_malicious || c.tn + c.fp != n_benign) {
    throw Error(Errc::PreconditionViolated, "confusion counts do not match the class sizes");
  }
  const auto mal = static_cast<double>(n_malicious);
  const auto ben = static_cast<double>(n_benign);
  Metrics m;
  m.tp_pct = 100.0 * static_cast<double>(c.tp) / mal;
  m.fn_pct = 100.0 * static_cast<double>(c.fn) / mal;
  m.tn_pct = 100.0 * static_cast<double>(c.tn) / ben;
  m.fp_pct = 100.0 * static_cast<double>(c.fp) / ben;
  m.accuracy_pct = 100.0 * static_cast<double>(c.tp + c.tn) / (mal + ben);
  return m;
}

double compute_lift(double pre_benign_acc_pct, double post_detect_pct) {
  auto in_range = [](double v) { return v >= 0.0 && v <= 100.0; };
  if (!in_range(pre_benign_acc_pct) || !in_range(post_detect_pct)) {
    throw Error(Errc::PreconditionViolated, "lift inputs must be percentages in [0,100]");
  }
  return post_detect_pct - (100.0 - pre_benign_acc_pct);
}

std::optional<double> percent(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto body = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

std::uint64_t file_seed(std::uint64_t technique_seed, const std::string& sha256_hex) {
  const std::uint64_t prefix = std::stoull(sha256_hex.substr(0, 16), nullptr, 16);
  return derive_seed(technique_seed, prefix);
}

namespace {

// Independent seed streams per technique.
constexpr std::uint64_t kStreamBenignMod = 1;
constexpr std::uint64_t kStreamOcclusion = 2;

ScanRecord scan_record(const RawBinary& bin, const DetectorHandle& det, ByteView bytes) {
  ScanRecord r;
  r.sha256 = bin.sha256_hex();
  r.label = bin.label();
  try {
    r.result = det.scan(bytes);
  } catch (const Error& e) {
    r.error = e.what();
  }
  return r;
}

void require_label(const std::vector<RawBinary>& files, Label label, const char* what) {
  for (const auto& f : files) {
    if (f.label() != label) {
      throw Error(Errc::PreconditionViolated, std::string(what) + " needs only " + std::string(to_string(label)) +
                                                  " files; " + f.sha256_hex() + " is " +
                                                  std::string(to_string(f.label())));
    }
  }
}

}  // namespace

BaselineResult baseline_eval(const std::vector<RawBinary>& files, const DetectorHandle& detector,
                             std::size_t workers) {
  if (files.empty()) throw Error(Errc::EmptyCorpus, "baseline evaluation needs at least one file");
  for (const auto& f : files) {
    if (f.label() == Label::Unknown) {
      throw Error(Errc::PreconditionViolated, "baseline evaluation needs labeled files; " + f.sha256_hex() +
                                                  " is unknown");
    }
  }
  BaselineResult out;
  out.records.resize(files.size());
  parallel_for(files.size(), workers,
               [&](std::size_t i) { out.records[i] = scan_record(files[i], detector, files[i].bytes()); });
  for (const auto& r : out.records) {
    if (r.result) {
      out.counts.add(r.label, r.result->decision);
    } else {
      ++out.errors;
    }
  }
  return out;
}

EvasionCurve make_curve(const std::vector<ChainFileRecord>& records, std::size_t max_steps) {
  EvasionCurve c;
  c.evaded_by.assign(max_steps + 1, 0);
  for (const auto& r : records) {
    if (!r.result) {
      ++c.survived;
      ++c.errors;
      continue;
    }
    switch (r.result->status) {
      case ChainStatus::AlreadyEvading: ++c.already_fn; break;
      case ChainStatus::Survived: ++c.survived; break;
      case ChainStatus::Evaded:
        for (std::size_t k = std::min(r.result->evaded_at, max_steps); k <= max_steps; ++k) ++c.evaded_by[k];
        break;
    }
  }
  return c;
}

BenignModResult run_benign_mod_experiment(const std::vector<RawBinary>& files,
                                          const std::vector<DetectorHandle>& detectors, std::size_t max_steps,
                                          std::uint64_t seed, const MutationOptions& options, std::size_t workers) {
  require_label(files, Label::Malicious, "the benign modification experiment");
  const std::uint64_t technique_seed = derive_seed(seed, kStreamBenignMod);
  const std::size_t nd = detectors.size();
  BenignModResult out;
  out.records.resize(files.size() * nd);
  parallel_for(out.records.size(), workers, [&](std::size_t job) {
    const RawBinary& bin = files[job / nd];
    const DetectorHandle& det = detectors[job % nd];
    ChainFileRecord& rec = out.records[job];
    rec.sha256 = bin.sha256_hex();
    rec.detector = det.id();
    rec.seed = file_seed(technique_seed, rec.sha256);
    ChainConfig cfg;
    cfg.max_steps = max_steps;
    cfg.seed = rec.seed;
    cfg.options = options;
    try {
      rec.result = apply_random_chain(bin, det, cfg);
      rec.result->final_bytes.clear();
      rec.result->final_bytes.shrink_to_fit();
    } catch (const Error& e) {
      rec.error = e.what();
    }
  });
  for (const auto& det : detectors) {
    std::vector<ChainFileRecord> mine;
    for (const auto& r : out.records) {
      if (r.detector == det.id()) mine.push_back(r);
    }
    out.curves[det.id()] = make_curve(mine, max_steps);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Occlusion

std::string_view to_string(OcclusionMode mode) noexcept {
  switch (mode) {
    case OcclusionMode::None: return "none";
    case OcclusionMode::Undirected: return "undirected";
    case OcclusionMode::TargetedRandom: return "targeted_random";
    case OcclusionMode::TargetedAdversarial: return "targeted_adversarial";
  }
  return "none";
}

OcclusionMode parse_occlusion_mode(std::string_view text) {
  for (auto m : kAllOcclusionModes) {
    if (to_string(m) == text) return m;
  }
  throw Error(Errc::InvalidArgument, "unknown occlusion mode '" + std::string(text) + "'");
}

OcclusionResult run_occlusion_experiment(const std::vector<RawBinary>& malicious, const std::vector<RawBinary>& benign,
                                         const std::string& search_detector,
                                         const std::vector<DetectorHandle>& detectors,
                                         const OcclusionExperimentConfig& cfg, std::uint64_t seed,
                                         std::size_t workers) {
  require_label(malicious, Label::Malicious, "the occlusion experiment");
  if (cfg.beta < 1) throw Error(Errc::InvalidArgument, "beta must be at least 1");
  const bool adversarial = std::find(cfg.modes.begin(), cfg.modes.end(), OcclusionMode::TargetedAdversarial) !=
                           cfg.modes.end();
  if (adversarial && benign.empty()) {
    throw Error(Errc::PreconditionViolated, "adversarial occlusion needs a benign byte pool");
  }
  std::vector<const DetectorHandle*> searchers;
  if (cfg.per_detector_search) {
    for (const auto& d : detectors) searchers.push_back(&d);
  } else {
    for (const auto& d : detectors) {
      if (d.id() == search_detector) searchers.push_back(&d);
    }
    if (searchers.empty()) throw Error(Errc::InvalidArgument, "unknown search detector '" + search_detector + "'");
  }
  const ByteSource benign_source =
      adversarial ? ByteSource::benign_sample(benign, 0) : ByteSource::random_uniform(0);

  struct Job {
    std::size_t file;
    OcclusionMode mode;
    const DetectorHandle* searcher;  // targeted modes only
  };
  std::vector<Job> jobs;
  for (std::size_t f = 0; f < malicious.size(); ++f) {
    for (auto mode : cfg.modes) {
      const bool targeted = mode == OcclusionMode::TargetedRandom || mode == OcclusionMode::TargetedAdversarial;
      if (targeted) {
        for (auto* s : searchers) jobs.push_back({f, mode, s});
      } else {
        jobs.push_back({f, mode, nullptr});
      }
    }
  }

  OcclusionResult out;
  out.records.resize(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t j) {
    const Job& job = jobs[j];
    const RawBinary& bin = malicious[job.file];
    OcclusionFileRecord& rec = out.records[j];
    rec.sha256 = bin.sha256_hex();
    rec.mode = job.mode;
    rec.seed = file_seed(derive_seed(seed, kStreamOcclusion * 16 + static_cast<std::uint64_t>(job.mode)), rec.sha256);
    if (job.searcher) rec.search_detector = job.searcher->id();

    std::optional<RawBinary> variant;
    try {
      switch (job.mode) {
        case OcclusionMode::None: break;
        case OcclusionMode::Undirected: {
          Rng rng(rec.seed);
          auto u = undirected_occlusion(bin.bytes(), cfg.beta, rng);
          rec.start = u.start;
          rec.end = u.end;
          variant.emplace(std::move(u.occluded), bin.label());
          break;
        }
        case OcclusionMode::TargetedRandom:
        case OcclusionMode::TargetedAdversarial: {
          OcclusionConfig oc;
          oc.beta = cfg.beta;
          oc.tie_break = cfg.tie_break;
          oc.source = job.mode == OcclusionMode::TargetedRandom ? ByteSource::random_uniform(rec.seed)
                                                                : benign_source.with_seed(rec.seed);
          try {
            rec.outcome = occlusion_search(bin, *job.searcher, oc);
          } catch (const SearchFailure& e) {
            rec.outcome = e.partial();
            throw;
          }
          rec.start = rec.outcome->start;
          rec.end = rec.outcome->end;
          variant.emplace(occlude_region(bin.bytes(), rec.start, rec.end, oc.source, kFinalDrawIndex), bin.label());
          break;
        }
      }
    } catch (const Error& e) {
      rec.error = e.what();
      return;
    }
    if (variant) rec.occluded_sha256 = variant->sha256_hex();
    const ByteView bytes = variant ? variant->bytes() : bin.bytes();
    for (const auto& det : detectors) {
      if (job.searcher && cfg.per_detector_search && &det != job.searcher) continue;
      rec.scans.emplace_back(det.id(), scan_record(bin, det, bytes));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// External transformations

TransformCommand parse_transform_command(const std::string& line, std::chrono::milliseconds timeout) {
  TransformCommand cmd;
  cmd.argv = split_command(line);
  cmd.timeout = timeout;
  if (cmd.argv.empty()) throw Error(Errc::InvalidConfig, "command template is empty");
  bool has_in = false;
  bool has_out = false;
  for (const auto& a : cmd.argv) {
    has_in |= a.find("{in}") != std::string::npos;
    has_out |= a.find("{out}") != std::string::npos;
  }
  if (!has_in || !has_out) {
    throw Error(Errc::InvalidConfig, "command template must contain both {in} and {out}: '" + line + "'");
  }
  if (timeout.count() <= 0) throw Error(Errc::InvalidConfig, "command timeout must be positive");
  return cmd;
}

namespace {

TransformResult run_transform(const std::vector<RawBinary>& files, const std::vector<DetectorHandle>& detectors,
                              const TransformCommand& cmd, const std::string& work_dir, std::string_view tag,
                              Errc failure, std::size_t workers) {
  std::error_code ec;
  fs::create_directories(work_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + work_dir + ": " + ec.message());

  TransformResult out;
  out.records.resize(files.size());
  parallel_for(files.size(), workers, [&](std::size_t i) {
    const RawBinary& bin = files[i];
    TransformFileRecord& rec = out.records[i];
    rec.sha256 = bin.sha256_hex();
    rec.label = bin.label();
    const fs::path in = fs::path(work_dir) / (rec.sha256 + ".in.bin");
    const fs::path dst = fs::path(work_dir) / (rec.sha256 + "." + std::string(tag) + ".bin");
    try {
      write_file(in.string(), bin.bytes());
      fs::remove(dst, ec);
      const auto res = run_command(expand_template(cmd.argv, in.string(), dst.string()), cmd.timeout);
      fs::remove(in, ec);
      if (res.timed_out) throw Error(failure, "timed out after " + std::to_string(cmd.timeout.count()) + " ms");
      if (res.exit_code != 0) throw Error(failure, "exit status " + std::to_string(res.exit_code));
      if (!fs::is_regular_file(dst) || fs::file_size(dst) == 0) throw Error(failure, "no output written");
      RawBinary variant(read_file(dst.string()), bin.label(), dst.string());
      rec.ok = true;
      rec.output_sha256 = variant.sha256_hex();
      for (const auto& det : detectors) {
        rec.original_scans.emplace_back(det.id(), scan_record(bin, det, bin.bytes()));
        rec.transformed_scans.emplace_back(det.id(), scan_record(bin, det, variant.bytes()));
      }
    } catch (const Error& e) {
      rec.ok = false;
      rec.error = e.what();
    }
  });
  for (const auto& r : out.records) out.failures += r.ok ? 0 : 1;
  return out;
}

void require_executable(const TransformCommand& cmd, Errc code) {
  if (cmd.argv.empty() || !find_executable(cmd.argv.front())) {
    throw Error(code, "command not found: " + (cmd.argv.empty() ? std::string() : cmd.argv.front()));
  }
}

}  // namespace

TransformResult run_packing_experiment(const std::vector<RawBinary>& files,
                                       const std::vector<DetectorHandle>& detectors, const TransformCommand& pack,
                                       const std::string& work_dir, std::size_t workers) {
  require_executable(pack, Errc::PackerMissing);
  return run_transform(files, detectors, pack, work_dir, "packed", Errc::PackerFailed, workers);
}

TransformResult run_external_mutator_experiment(const std::vector<RawBinary>& benign,
                                                const std::vector<DetectorHandle>& detectors,
                                                const TransformCommand& mutate, const std::string& work_dir,
                                                std::size_t workers) {
  require_label(benign, Label::Benign, "the external mutator experiment");
  require_executable(mutate, Errc::InvalidConfig);
  return run_transform(benign, detectors, mutate, work_dir, "mutated", Errc::MutatorFailed, workers);
}

}  // namespace evbench
