#include "evbench/occlusion.hpp"

#include <algorithm>

namespace evbench {

std::string_view to_string(SourceKind kind) noexcept {
  switch (kind) {
    case SourceKind::RandomUniform: return "random";
    case SourceKind::BenignSample: return "adversarial";
    case SourceKind::ZeroFill: return "zero";
  }
  return "unknown";
}

ByteSource ByteSource::random_uniform(std::uint64_t seed) { return ByteSource(SourceKind::RandomUniform, seed); }

ByteSource ByteSource::zero_fill() { return ByteSource(SourceKind::ZeroFill, 0); }

ByteSource ByteSource::benign_sample(std::vector<RawBinary> benign, std::uint64_t seed) {
  if (benign.empty()) throw Error(Errc::InvalidArgument, "benign byte source needs at least one file");
  for (const auto& b : benign) {
    if (b.label() != Label::Benign) {
      throw Error(Errc::InvalidArgument, "benign byte source given a file not labeled benign: " + b.origin());
    }
  }
  ByteSource src(SourceKind::BenignSample, seed);
  src.benign_ = std::make_shared<const std::vector<RawBinary>>(std::move(benign));
  return src;
}

bool ByteSource::draw(std::span<std::uint8_t> out, std::uint64_t draw_index) const {
  switch (kind_) {
    case SourceKind::ZeroFill:
      std::fill(out.begin(), out.end(), std::uint8_t{0});
      return false;
    case SourceKind::RandomUniform: {
      Rng rng(derive_seed(seed_, draw_index));
      rng.fill(out);
      return false;
    }
    case SourceKind::BenignSample: {
      Rng rng(derive_seed(seed_, draw_index));
      const auto& files = *benign_;
      std::vector<std::size_t> fits;
      for (std::size_t i = 0; i < files.size(); ++i) {
        if (files[i].size() >= out.size()) fits.push_back(i);
      }
      if (!fits.empty()) {
        ByteView src = files[fits[rng.below(fits.size())]].bytes();
        const std::size_t start = rng.below(src.size() - out.size() + 1);
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(start), out.size(), out.begin());
        return false;
      }
      std::size_t pos = 0;
      while (pos < out.size()) {
        ByteView src = files[rng.below(files.size())].bytes();
        const std::size_t take = std::min(src.size(), out.size() - pos);
        const std::size_t start = rng.below(src.size() - take + 1);
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(start), take,
                    out.begin() + static_cast<std::ptrdiff_t>(pos));
        pos += take;
      }
      return true;
    }
  }
  return false;
}

Bytes occlude_region(ByteView bytes, std::size_t start, std::size_t end, const ByteSource& source,
                     std::uint64_t draw_index) {
  if (start >= end || end > bytes.size()) {
    throw Error(Errc::RangeOutOfBounds, "occlusion range [" + std::to_string(start) + "," + std::to_string(end) +
                                            ") invalid for " + std::to_string(bytes.size()) + " bytes");
  }
  Bytes out(bytes.begin(), bytes.end());
  source.draw(std::span<std::uint8_t>(out).subspan(start, end - start), draw_index);
  return out;
}

namespace {

/// Scores `work` with [begin, end) temporarily replaced, restoring afterwards.
double score_occluded(Bytes& work, ByteView original, std::size_t begin, std::size_t end, const ByteSource& source,
                      std::uint64_t draw_index, const DetectorHandle& detector, bool& stitched) {
  auto region = std::span<std::uint8_t>(work).subspan(begin, end - begin);
  stitched |= source.draw(region, draw_index);
  double score = 0.0;
  try {
    score = detector.scan(work).score;
  } catch (...) {
    std::copy_n(original.begin() + static_cast<std::ptrdiff_t>(begin), end - begin, region.begin());
    throw;
  }
  std::copy_n(original.begin() + static_cast<std::ptrdiff_t>(begin), end - begin, region.begin());
  return score;
}

}  // namespace

OcclusionOutcome occlusion_search(const RawBinary& bin, const DetectorHandle& detector, const OcclusionConfig& cfg) {
  if (cfg.beta < 1) throw Error(Errc::PreconditionViolated, "beta must be at least 1");
  const ByteView original = bin.bytes();
  if (original.size() <= cfg.beta) {
    throw Error(Errc::PreconditionViolated, "file of " + std::to_string(original.size()) +
                                                " bytes is not larger than beta=" + std::to_string(cfg.beta));
  }

  OcclusionOutcome outcome;
  Bytes work(original.begin(), original.end());
  std::size_t lo = 0;
  std::size_t hi = original.size();
  std::uint64_t level = 0;
  while (hi - lo > cfg.beta) {
    // Odd windows give the extra byte to the left half.
    const std::size_t split = lo + (hi - lo + 1) / 2;
    OcclusionLevel rec{lo, hi, split};
    try {
      rec.left_score = score_occluded(work, original, lo, split, cfg.source, 2 * level, detector, outcome.stitched_source);
      ++outcome.calls;
      rec.right_score = score_occluded(work, original, split, hi, cfg.source, 2 * level + 1, detector, outcome.stitched_source);
      ++outcome.calls;
    } catch (const std::exception& e) {
      outcome.start = lo;
      outcome.end = hi;
      throw SearchFailure(e.what(), outcome);
    }

    if (rec.left_score < rec.right_score) {
      rec.choice = Side::Left;
    } else if (rec.right_score < rec.left_score) {
      rec.choice = Side::Right;
    } else {
      rec.choice = cfg.tie_break == TieBreak::Left ? Side::Left : Side::Right;
    }
    if (rec.choice == Side::Left) {
      hi = split;
    } else {
      lo = split;
    }
    outcome.final_left_score = rec.left_score;
    outcome.final_right_score = rec.right_score;
    outcome.trace.push_back(rec);
    ++level;
  }
  outcome.start = lo;
  outcome.end = hi;
  return outcome;
}

AttackResult targeted_occlusion_attack(const RawBinary& bin, const DetectorHandle& detector,
                                       const OcclusionConfig& cfg) {
  AttackResult result;
  result.before = detector.scan(bin.bytes());
  if (result.before.decision != Decision::Malicious) {
    throw Error(Errc::PreconditionViolated, "targeted occlusion needs a file the detector flags as malicious");
  }
  result.outcome = occlusion_search(bin, detector, cfg);
  result.outcome.baseline_score = result.before.score;
  result.occluded = occlude_region(bin.bytes(), result.outcome.start, result.outcome.end, cfg.source, kFinalDrawIndex);
  result.after = detector.scan(result.occluded);
  result.evaded = result.after.decision == Decision::Benign;
  return result;
}

UndirectedResult undirected_occlusion(ByteView bytes, std::size_t beta, Rng& rng) {
  if (beta < 1) throw Error(Errc::PreconditionViolated, "beta must be at least 1");
  if (bytes.size() < beta) {
    throw Error(Errc::FileTooSmall, "file of " + std::to_string(bytes.size()) + " bytes is smaller than beta");
  }
  UndirectedResult r;
  r.start = rng.below(bytes.size() - beta + 1);
  r.end = r.start + beta;
  r.occluded.assign(bytes.begin(), bytes.end());
  rng.fill(std::span<std::uint8_t>(r.occluded).subspan(r.start, beta));
  return r;
}

}  // namespace evbench
