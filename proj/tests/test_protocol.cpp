#include "doctest.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>

#include "evbench/corpus.hpp"
#include "evbench/error.hpp"
#include "evbench/protocol.hpp"
#include "support.hpp"

using namespace evbench;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an evbench::Error");
  return Errc::IoError;
}

DetectorHandle constant(const std::string& id, double v) {
  return DetectorHandle(id, std::make_shared<ConstantScorer>(v));
}

DetectorHandle marker(const std::string& id = "marker") {
  return DetectorHandle(id, std::make_shared<MarkerScorer>(Bytes(kSyntheticMarker.begin(), kSyntheticMarker.end())));
}

std::vector<RawBinary> synthetic_files(std::size_t n, Label label, std::uint64_t base) {
  std::vector<RawBinary> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.emplace_back(testsupport::synthetic(base + i, label == Label::Malicious), label);
  }
  return out;
}

/// Counts reconstructed from published percentages over the stated class sizes.
ConfusionCounts from_rates(double tp_pct, double fp_pct, std::size_t n_mal, std::size_t n_ben) {
  ConfusionCounts c;
  c.tp = static_cast<std::size_t>(std::llround(tp_pct / 100.0 * static_cast<double>(n_mal)));
  c.fn = n_mal - c.tp;
  c.fp = static_cast<std::size_t>(std::llround(fp_pct / 100.0 * static_cast<double>(n_ben)));
  c.tn = n_ben - c.fp;
  return c;
}

std::string mock(const std::string& args) { return std::string("\"") + MOCK_TRANSFORM_PATH + "\" " + args; }

const ScanRecord& scan_for(const std::vector<std::pair<std::string, ScanRecord>>& scans, const std::string& id) {
  for (const auto& [det, rec] : scans) {
    if (det == id) return rec;
  }
  FAIL("no scan for " << id);
  return scans.front().second;
}

}  // namespace

TEST_CASE("metrics from confusion counts") {
  ConfusionCounts c{.tp = 987, .fp = 79, .tn = 921, .fn = 13};
  const Metrics m = compute_metrics(c, 1000, 1000);
  CHECK(m.tp_pct == doctest::Approx(98.7));
  CHECK(m.fn_pct == doctest::Approx(1.3));
  CHECK(m.tn_pct == doctest::Approx(92.1));
  CHECK(m.fp_pct == doctest::Approx(7.9));
  CHECK(m.accuracy_pct == doctest::Approx(95.4));

  const Metrics perfect = compute_metrics({.tp = 5, .fp = 0, .tn = 7, .fn = 0}, 5, 7);
  CHECK(perfect.accuracy_pct == 100.0);
  CHECK(perfect.tp_pct == 100.0);
  const Metrics wrong = compute_metrics({.tp = 0, .fp = 7, .tn = 0, .fn = 5}, 5, 7);
  CHECK(wrong.accuracy_pct == 0.0);
  CHECK(wrong.fp_pct == 100.0);

  CHECK(error_of([] { compute_metrics({}, 0, 3); }) == Errc::ZeroClass);
  CHECK(error_of([] { compute_metrics({}, 3, 0); }) == Errc::ZeroClass);
  CHECK(error_of([] { compute_metrics({.tp = 1, .fp = 0, .tn = 1, .fn = 0}, 2, 1); }) == Errc::PreconditionViolated);
}

TEST_CASE("metric identities hold on random counts") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n_mal = rng.between(1, 500);
    const std::size_t n_ben = rng.between(1, 500);
    ConfusionCounts c;
    c.tp = rng.below(n_mal + 1);
    c.fn = n_mal - c.tp;
    c.fp = rng.below(n_ben + 1);
    c.tn = n_ben - c.fp;
    const Metrics m = compute_metrics(c, n_mal, n_ben);
    CHECK(m.tp_pct + m.fn_pct == doctest::Approx(100.0));
    CHECK(m.tn_pct + m.fp_pct == doctest::Approx(100.0));
    const double weighted = (m.tp_pct * static_cast<double>(n_mal) + m.tn_pct * static_cast<double>(n_ben)) /
                            static_cast<double>(n_mal + n_ben);
    CHECK(m.accuracy_pct == doctest::Approx(weighted));
    CHECK(m.accuracy_pct >= std::min(m.tp_pct, m.tn_pct) - 1e-9);
    CHECK(m.accuracy_pct <= std::max(m.tp_pct, m.tn_pct) + 1e-9);
  }
}

TEST_CASE("published baseline rows reproduce their accuracy") {
  struct Row {
    double tn, tp, fp, acc;
  };
  const Row rows[] = {{92.1, 98.7, 7.9, 95.5}, {90.7, 97.2, 9.3, 94.1}, {94.3, 99.5, 5.7, 97.0},
                      {99.4, 64.9, 0.6, 81.6}, {98.5, 80.5, 1.5, 89.2}, {93.8, 91.9, 6.6, 92.6}};
  const std::size_t n_mal = 41'360;
  const std::size_t n_ben = 38'640;
  for (const Row& r : rows) {
    const Metrics m = compute_metrics(from_rates(r.tp, r.fp, n_mal, n_ben), n_mal, n_ben);
    CHECK(std::abs(m.accuracy_pct - r.acc) <= 0.1);
    // The last row's TN and FP columns sum to 100.4; its counts follow FP.
    if (r.tn + r.fp == doctest::Approx(100.0)) CHECK(std::abs(m.tn_pct - r.tn) <= 0.05);
  }
}

TEST_CASE("lift nets out the baseline false-positive rate") {
  const std::pair<std::pair<double, double>, double> rows[] = {
      {{85.1, 15.3}, 0.4}, {{82.4, 18.8}, 1.2}, {{99.3, 1.3}, 0.6},
      {{98.7, 1.2}, -0.1}, {{97.9, 0.7}, -1.4}, {{89.2, 32.9}, 22.1}};
  for (const auto& [in, want] : rows) {
    const double lift = compute_lift(in.first, in.second);
    CHECK(std::round(lift * 10.0) / 10.0 == doctest::Approx(want).epsilon(1e-12));
    CHECK(std::abs(lift - want) < 1e-9);
  }
  for (double x : {0.0, 12.5, 100.0}) CHECK(compute_lift(100.0, x) == x);
  CHECK(compute_lift(0.0, 100.0) == 0.0);
  CHECK(error_of([] { compute_lift(101.0, 0.0); }) == Errc::PreconditionViolated);
  CHECK(error_of([] { compute_lift(50.0, -1.0); }) == Errc::PreconditionViolated);
  CHECK(percent(1, 4) == 25.0);
  CHECK_FALSE(percent(1, 0).has_value());
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  for (std::size_t workers : {1u, 3u, 8u}) {
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
  CHECK(error_of([] {
          parallel_for(10, 4, [](std::size_t i) {
            if (i == 5) throw Error(Errc::IoError, "boom");
          });
        }) == Errc::IoError);
  parallel_for(0, 4, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("file seeds depend only on the technique seed and the hash") {
  const std::string a(64, 'a');
  const std::string b = std::string(63, 'a') + "b";
  CHECK(file_seed(1, a) == file_seed(1, a));
  CHECK(file_seed(1, a) != file_seed(2, a));
  CHECK(file_seed(1, a) != file_seed(1, std::string(16, 'b') + std::string(48, 'a')));
  CHECK(file_seed(1, a) == file_seed(1, b));  // only the 64-bit prefix is used
}

TEST_CASE("baseline evaluation counts decisions and skips failed scans") {
  auto files = synthetic_files(3, Label::Malicious, 0);
  for (auto& f : synthetic_files(4, Label::Benign, 100)) files.push_back(std::move(f));
  const BaselineResult r = baseline_eval(files, marker());
  CHECK(r.counts == ConfusionCounts{.tp = 3, .fp = 0, .tn = 4, .fn = 0});
  CHECK(r.errors == 0);
  REQUIRE(r.records.size() == files.size());
  for (std::size_t i = 0; i < files.size(); ++i) CHECK(r.records[i].sha256 == files[i].sha256_hex());

  const DetectorHandle flaky("flaky", std::make_shared<FunctionScorer>(
                                          [](ByteView b) { return b.size() % 2 == 0 ? 0.9 : 7.0; }, "flaky"));
  Bytes odd = testsupport::synthetic(50, true);
  odd.push_back(0);
  files.emplace_back(odd, Label::Malicious);
  const BaselineResult f = baseline_eval(files, flaky, 3);
  std::size_t even = 0;
  for (const auto& x : files) even += x.size() % 2 == 0;
  CHECK(f.errors == files.size() - even);
  CHECK(f.errors >= 1);
  CHECK(f.counts.total() == even);
  for (const auto& rec : f.records) CHECK(rec.result.has_value() == rec.error.empty());

  CHECK(error_of([] { baseline_eval({}, constant("c", 0.1)); }) == Errc::EmptyCorpus);
  std::vector<RawBinary> unknown;
  unknown.emplace_back(Bytes{1, 2, 3}, Label::Unknown);
  CHECK(error_of([&] { baseline_eval(unknown, constant("c", 0.1)); }) == Errc::PreconditionViolated);

  auto ten = synthetic_files(10, Label::Malicious, 200);
  for (auto& f2 : synthetic_files(10, Label::Benign, 300)) ten.push_back(std::move(f2));
  const Metrics m = compute_metrics(baseline_eval(ten, marker()).counts, 10, 10);
  CHECK(m.accuracy_pct == 100.0);
}

TEST_CASE("evasion curves fold chain outcomes") {
  const auto rec = [](std::optional<ChainStatus> s, std::size_t k = 0) {
    ChainFileRecord r;
    if (s) {
      r.result = ChainResult{};
      r.result->status = *s;
      r.result->evaded_at = k;
    } else {
      r.error = "adapter crashed";
    }
    return r;
  };
  const std::vector<ChainFileRecord> rs = {rec(ChainStatus::AlreadyEvading), rec(ChainStatus::Evaded, 1),
                                           rec(ChainStatus::Evaded, 3),      rec(ChainStatus::Evaded, 3),
                                           rec(ChainStatus::Survived),       rec(std::nullopt)};
  const EvasionCurve c = make_curve(rs, 4);
  CHECK(c.evaded_by == std::vector<std::size_t>{0, 1, 1, 3, 3});
  CHECK(c.already_fn == 1);
  CHECK(c.survived == 2);
  CHECK(c.errors == 1);
  CHECK(c.tested() == rs.size());
}

TEST_CASE("benign modification experiment") {
  const auto mal = synthetic_files(12, Label::Malicious, 400);
  const std::vector<DetectorHandle> dets = {constant("always", 0.9), constant("never", 0.1), marker()};
  const BenignModResult r = run_benign_mod_experiment(mal, dets, 5, 11, {}, 2);
  CHECK(r.records.size() == mal.size() * dets.size());

  const EvasionCurve& always = r.curves.at("always");
  CHECK(always.evaded_by.back() == 0);
  CHECK(always.survived == mal.size());
  CHECK(r.curves.at("never").already_fn == mal.size());
  const EvasionCurve& m = r.curves.at("marker");
  CHECK(m.already_fn == 0);
  // Tan bar: already + evaded + survived adds up to the files tested.
  for (const auto& [id, c] : r.curves) {
    CHECK(c.tested() == mal.size());
    CHECK(std::is_sorted(c.evaded_by.begin(), c.evaded_by.end()));
  }
  // Same per-file seed for every detector.
  for (std::size_t f = 0; f < mal.size(); ++f) {
    CHECK(r.records[f * 3].seed == r.records[f * 3 + 1].seed);
    CHECK(r.records[f * 3].seed == r.records[f * 3 + 2].seed);
  }
  const BenignModResult again = run_benign_mod_experiment(mal, dets, 5, 11, {}, 1);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    REQUIRE(again.records[i].result.has_value());
    CHECK(again.records[i].result->status == r.records[i].result->status);
    CHECK(again.records[i].result->scores == r.records[i].result->scores);
  }
  CHECK(error_of([&] { run_benign_mod_experiment(synthetic_files(1, Label::Benign, 0), dets, 5, 1); }) ==
        Errc::PreconditionViolated);
}

TEST_CASE("occlusion experiment") {
  auto mal = synthetic_files(6, Label::Malicious, 500);
  const auto ben = synthetic_files(4, Label::Benign, 600);
  const std::vector<DetectorHandle> dets = {marker(), constant("always", 0.9)};
  OcclusionExperimentConfig cfg;
  cfg.beta = 64;
  const OcclusionResult r = run_occlusion_experiment(mal, ben, "marker", dets, cfg, 3);
  CHECK(r.records.size() == mal.size() * kAllOcclusionModes.size());
  for (const auto& rec : r.records) {
    INFO(to_string(rec.mode));
    REQUIRE(rec.error.empty());
    REQUIRE(rec.scans.size() == 2);
    const ScanRecord& m = scan_for(rec.scans, "marker");
    const ScanRecord& a = scan_for(rec.scans, "always");
    REQUIRE(m.result.has_value());
    CHECK(a.result->decision == Decision::Malicious);
    switch (rec.mode) {
      case OcclusionMode::None:
        CHECK(m.result->decision == Decision::Malicious);
        CHECK(rec.occluded_sha256.empty());
        break;
      case OcclusionMode::Undirected: CHECK(rec.end - rec.start == cfg.beta); break;
      case OcclusionMode::TargetedRandom:
      case OcclusionMode::TargetedAdversarial:
        CHECK(rec.search_detector == "marker");
        CHECK(m.result->decision == Decision::Benign);
        CHECK(rec.end - rec.start <= cfg.beta);
        CHECK(rec.end - rec.start > cfg.beta / 2);
        CHECK(rec.occluded_sha256 != rec.sha256);
        break;
    }
  }
  const OcclusionResult again = run_occlusion_experiment(mal, ben, "marker", dets, cfg, 3, 3);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    CHECK(again.records[i].occluded_sha256 == r.records[i].occluded_sha256);
    CHECK(again.records[i].start == r.records[i].start);
  }

  OcclusionExperimentConfig per = cfg;
  per.per_detector_search = true;
  per.modes = {OcclusionMode::TargetedRandom};
  const OcclusionResult p = run_occlusion_experiment(mal, ben, "", dets, per, 3);
  CHECK(p.records.size() == mal.size() * dets.size());
  for (const auto& rec : p.records) {
    REQUIRE(rec.scans.size() == 1);
    CHECK(rec.scans[0].first == rec.search_detector);
  }

  CHECK(error_of([&] { run_occlusion_experiment(mal, ben, "nope", dets, cfg, 3); }) == Errc::InvalidArgument);
  CHECK(error_of([&] { run_occlusion_experiment(mal, {}, "marker", dets, cfg, 3); }) == Errc::PreconditionViolated);
  CHECK(error_of([&] { run_occlusion_experiment(ben, ben, "marker", dets, cfg, 3); }) == Errc::PreconditionViolated);
  CHECK(parse_occlusion_mode("targeted_adversarial") == OcclusionMode::TargetedAdversarial);
  CHECK(error_of([] { parse_occlusion_mode("blind"); }) == Errc::InvalidArgument);
}

TEST_CASE("transform command templates") {
  const TransformCommand c = parse_transform_command("upx -o {out} {in}");
  CHECK(c.argv == std::vector<std::string>{"upx", "-o", "{out}", "{in}"});
  CHECK(error_of([] { parse_transform_command("upx {in}"); }) == Errc::InvalidConfig);
  CHECK(error_of([] { parse_transform_command("upx -o {out}"); }) == Errc::InvalidConfig);
  CHECK(error_of([] { parse_transform_command(""); }) == Errc::InvalidConfig);
  CHECK(error_of([] { parse_transform_command("x {in} {out}", std::chrono::milliseconds(0)); }) ==
        Errc::InvalidConfig);
}

TEST_CASE("packing with an identity packer leaves every decision unchanged") {
  auto files = synthetic_files(5, Label::Malicious, 700);
  for (auto& f : synthetic_files(5, Label::Benign, 800)) files.push_back(std::move(f));
  const std::vector<DetectorHandle> dets = {marker()};
  const auto dir = testsupport::scratch_dir("pack-copy");
  const TransformResult r =
      run_packing_experiment(files, dets, parse_transform_command(mock("copy {in} {out}")), dir.string(), 2);
  CHECK(r.failures == 0);
  for (const auto& rec : r.records) {
    CHECK(rec.ok);
    CHECK(rec.output_sha256 == rec.sha256);
    CHECK(scan_for(rec.original_scans, "marker").result->decision ==
          scan_for(rec.transformed_scans, "marker").result->decision);
  }
}

TEST_CASE("scrambling packer destroys the marker") {
  const auto files = synthetic_files(6, Label::Malicious, 900);
  const auto dir = testsupport::scratch_dir("pack-xor");
  const TransformResult r =
      run_packing_experiment(files, {marker()}, parse_transform_command(mock("xor {in} {out}")), dir.string());
  for (const auto& rec : r.records) {
    REQUIRE(rec.ok);
    CHECK(scan_for(rec.original_scans, "marker").result->decision == Decision::Malicious);
    CHECK(scan_for(rec.transformed_scans, "marker").result->decision == Decision::Benign);
  }
}

TEST_CASE("packer failures are recorded per file") {
  const auto files = synthetic_files(3, Label::Malicious, 950);
  const auto dir = testsupport::scratch_dir("pack-fail");
  for (const char* mode : {"fail", "noout"}) {
    const TransformResult r = run_packing_experiment(
        files, {marker()}, parse_transform_command(mock(std::string(mode) + " {in} {out}")), dir.string());
    CHECK(r.failures == files.size());
    for (const auto& rec : r.records) {
      CHECK_FALSE(rec.ok);
      CHECK_FALSE(rec.error.empty());
      CHECK(rec.transformed_scans.empty());
    }
  }
  CHECK(error_of([&] {
          run_packing_experiment(files, {marker()}, parse_transform_command("/nonexistent/packer {in} {out}"),
                                 dir.string());
        }) == Errc::PackerMissing);
}

TEST_CASE("external mutator experiment") {
  const auto ben = synthetic_files(4, Label::Benign, 1000);
  const auto dir = testsupport::scratch_dir("mutator");
  const std::vector<DetectorHandle> dets = {marker()};

  const TransformResult same =
      run_external_mutator_experiment(ben, dets, parse_transform_command(mock("copy {in} {out}")), dir.string());
  std::size_t pre_ok = 0;
  std::size_t post_hit = 0;
  for (const auto& rec : same.records) {
    pre_ok += scan_for(rec.original_scans, "marker").result->decision == Decision::Benign;
    post_hit += scan_for(rec.transformed_scans, "marker").result->decision == Decision::Malicious;
  }
  const double pre = *percent(pre_ok, ben.size());
  CHECK(compute_lift(pre, *percent(post_hit, ben.size())) == 0.0);

  std::string hex;
  for (auto b : kSyntheticMarker) {
    const char* digits = "0123456789abcdef";
    hex += digits[b >> 4];
    hex += digits[b & 15];
  }
  const TransformResult inj = run_external_mutator_experiment(
      ben, dets, parse_transform_command(mock("append " + hex + " {in} {out}")), dir.string());
  for (const auto& rec : inj.records) {
    REQUIRE(rec.ok);
    CHECK(rec.label == Label::Benign);
    CHECK(scan_for(rec.transformed_scans, "marker").result->decision == Decision::Malicious);
  }
  CHECK(error_of([&] {
          run_external_mutator_experiment(synthetic_files(1, Label::Malicious, 0), dets,
                                          parse_transform_command(mock("copy {in} {out}")), dir.string());
        }) == Errc::PreconditionViolated);
}
