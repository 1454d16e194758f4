#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "evbench/error.hpp"
#include "evbench/report.hpp"
#include "support.hpp"

using namespace evbench;
namespace fs = std::filesystem;

namespace {

std::string hex_id(std::size_t i) {
  char buf[65];
  std::snprintf(buf, sizeof buf, "%064zx", i);
  return buf;
}

ScanRecord scan(std::size_t i, Label label, bool flagged) {
  ScanRecord r;
  r.sha256 = hex_id(i);
  r.label = label;
  r.result = ScanResult{.score = flagged ? 0.75 : 0.25,
                        .decision = flagged ? Decision::Malicious : Decision::Benign,
                        .latency = {}};
  return r;
}

/// `n` files of `label`; the first `before` are flagged originally and the
/// first `after` are flagged once transformed.
void add_files(TransformResult& out, Label label, std::size_t base, std::size_t n, std::size_t before,
               std::size_t after, const std::string& det) {
  for (std::size_t i = 0; i < n; ++i) {
    TransformFileRecord r;
    r.sha256 = hex_id(base + i);
    r.label = label;
    r.ok = true;
    r.output_sha256 = hex_id(base + i + 1'000'000);
    r.original_scans.emplace_back(det, scan(base + i, label, i < before));
    r.transformed_scans.emplace_back(det, scan(base + i, label, i < after));
    out.records.push_back(std::move(r));
  }
}

Ledger sample_ledger() {
  Ledger l;
  l.header = {{"run_id", "abc"}, {"seed", 5}, {"detectors", {{{"id", "d1"}, {"threshold", 0.5}}}}};
  BaselineResult b;
  for (std::size_t i = 0; i < 10; ++i) b.records.push_back(scan(i, i < 6 ? Label::Malicious : Label::Benign, i < 5));
  ScanRecord failed;
  failed.sha256 = hex_id(99);
  failed.label = Label::Benign;
  failed.error = "timeout";
  b.records.push_back(failed);
  l.add_baseline("d1", b);

  BenignModResult bm;
  const auto chain = [](std::size_t i, ChainStatus s, std::size_t k) {
    ChainFileRecord r;
    r.sha256 = hex_id(i);
    r.detector = "d1";
    r.seed = i;
    r.result = ChainResult{};
    r.result->status = s;
    r.result->evaded_at = k;
    r.result->initial_score = 0.9;
    return r;
  };
  bm.records = {chain(0, ChainStatus::Evaded, 2), chain(1, ChainStatus::Survived, 0),
                chain(2, ChainStatus::AlreadyEvading, 0), chain(3, ChainStatus::Evaded, 1)};
  ChainFileRecord err;
  err.sha256 = hex_id(4);
  err.detector = "d1";
  err.error = "adapter crashed";
  bm.records.push_back(err);
  l.add_benign_mod(bm, 3);
  return l;
}

}  // namespace

TEST_CASE("ledger survives a JSON-lines round trip") {
  const Ledger l = sample_ledger();
  const std::string text = l.to_jsonl();
  const Ledger back = Ledger::from_jsonl(text);
  CHECK(back.header == l.header);
  CHECK(back.records == l.records);
  CHECK(back.to_jsonl() == text);

  const auto dir = testsupport::scratch_dir("ledger");
  l.write((dir / "ledger.jsonl").string());
  CHECK(Ledger::read((dir / "ledger.jsonl").string()).to_jsonl() == text);

  CHECK_THROWS_AS(Ledger::from_jsonl(""), Error);
  CHECK_THROWS_AS(Ledger::from_jsonl("{\"kind\":\"scan\"}\n"), Error);
  CHECK_THROWS_AS(Ledger::from_jsonl("{\"kind\":\"run\"}\n{oops\n"), Error);
  try {
    Ledger::from_jsonl("{\"kind\":\"run\"}\n{oops\n");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Corrupt);
  }
}

TEST_CASE("baseline and chain aggregates") {
  const Json r = build_report(sample_ledger());
  CHECK(r.at("detectors") == Json::array({"d1"}));
  const Json& b = r.at("baseline").at("d1");
  CHECK(b.at("counts") == Json{{"tp", 5}, {"fp", 0}, {"tn", 4}, {"fn", 1}});
  CHECK(b.at("errors") == 1);
  CHECK(b.at("accuracy_pct").get<double>() == doctest::Approx(90.0));
  CHECK(b.at("tp_pct").get<double>() == doctest::Approx(500.0 / 6.0));

  const Json& c = r.at("benign_mod").at("d1");
  CHECK(c.at("evaded_by") == Json::array({0, 1, 2, 2}));
  CHECK(c.at("already_fn") == 1);
  CHECK(c.at("evaded") == 2);
  CHECK(c.at("survived") == 2);
  CHECK(c.at("errors") == 1);
  CHECK(c.at("tested") == 5);
  CHECK(c.at("evasion_rate_pct").get<double>() == doctest::Approx(50.0));
  CHECK_FALSE(r.contains("packing"));
  CHECK_FALSE(r.contains("occlusion"));
}

TEST_CASE("report renderings agree with the JSON") {
  const Json r = build_report(sample_ledger());
  const std::string md = render_markdown(r);
  CHECK(md.find("| d1 | 100.0 | 83.3 | 16.7 | 0.0 | 90.0 | 1 |") != std::string::npos);
  CHECK(md.find("| d1 | 1 | 2 | 2 | 1 | 50.0 |") != std::string::npos);
  CHECK(md.find("| d1 | 0 | 1 | 2 | 2 |") != std::string::npos);
  CHECK(md.find("Table") == std::string::npos);
  CHECK(md.find("Fig.") == std::string::npos);

  const std::string curves = render_curves_csv(r);
  CHECK(curves.rfind("series,detector,x,value\n", 0) == 0);
  CHECK(curves.find("evaded_by,d1,3,2\n") != std::string::npos);
  CHECK(curves.find("already_fn,d1,,1\n") != std::string::npos);

  const std::string records = render_records_csv(sample_ledger());
  std::istringstream in(records);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 1 + sample_ledger().records.size());
  CHECK(records.find(",timeout\n") != std::string::npos);
}

TEST_CASE("baseline-only report") {
  Ledger l;
  BaselineResult b;
  b.records = {scan(0, Label::Malicious, true), scan(1, Label::Benign, false)};
  l.add_baseline("only", b);
  const Json r = build_report(l);
  CHECK(r.at("baseline").at("only").at("accuracy_pct") == 100.0);
  CHECK_FALSE(r.contains("benign_mod"));
  const std::string md = render_markdown(r);
  CHECK(md.find("## Baseline accuracy") != std::string::npos);
  CHECK(md.find("## Benign modifications") == std::string::npos);
}

TEST_CASE("packing quadrants render in column order") {
  TransformResult t;
  add_files(t, Label::Benign, 0, 1000, 57, 30, "AV1");
  add_files(t, Label::Malicious, 5000, 1000, 995, 608, "AV1");
  TransformFileRecord failed;
  failed.sha256 = hex_id(9999);
  failed.label = Label::Malicious;
  failed.error = "exit status 1";
  t.records.push_back(failed);
  Ledger l;
  l.add_packing(t);
  const Json r = build_report(l);
  const Json& p = r.at("packing");
  CHECK(p.at("transformed") == 2000);
  CHECK(p.at("failures") == 1);
  const Json& d = p.at("detectors").at("AV1");
  CHECK(d.at("benign_tn_pct").get<double>() == doctest::Approx(94.3));
  CHECK(d.at("packed_benign_tn_pct").get<double>() == doctest::Approx(97.0));
  CHECK(d.at("malware_tp_pct").get<double>() == doctest::Approx(99.5));
  CHECK(d.at("packed_malware_tp_pct").get<double>() == doctest::Approx(60.8));
  const std::string md = render_markdown(r);
  CHECK(md.find("| Classifier | Benign | Packed Benign | Malware | Packed Malware |") != std::string::npos);
  CHECK(md.find("| AV1 | 94.3 | 97.0 | 99.5 | 60.8 |") != std::string::npos);
}

TEST_CASE("identity transform quadrants equal the baseline rates") {
  TransformResult t;
  add_files(t, Label::Benign, 0, 40, 3, 3, "d");
  add_files(t, Label::Malicious, 100, 60, 51, 51, "d");
  Ledger l;
  l.add_packing(t);
  const Json d = build_report(l).at("packing").at("detectors").at("d");
  CHECK(d.at("benign_tn_pct") == d.at("packed_benign_tn_pct"));
  CHECK(d.at("malware_tp_pct") == d.at("packed_malware_tp_pct"));
  CHECK(d.at("accuracy_pct") == d.at("packed_accuracy_pct"));
  CHECK(d.at("malware_retained_pct") == 100.0);
}

TEST_CASE("mutator lift") {
  TransformResult t;
  add_files(t, Label::Benign, 0, 1000, 7, 13, "AV1");
  Ledger l;
  l.add_mutator(t);
  const Json r = build_report(l);
  const Json& d = r.at("mutator").at("detectors").at("AV1");
  CHECK(d.at("pre_benign_acc_pct").get<double>() == doctest::Approx(99.3));
  CHECK(d.at("post_detect_pct").get<double>() == doctest::Approx(1.3));
  CHECK(d.at("lift").get<double>() == doctest::Approx(0.6));
  CHECK(render_markdown(r).find("| AV1 | 99.3 | 1.3 | 0.6 |") != std::string::npos);
}

TEST_CASE("emitted report files are reproducible from the ledger") {
  const auto a = testsupport::scratch_dir("emit-a");
  const auto b = testsupport::scratch_dir("emit-b");
  const Ledger l = sample_ledger();
  emit_report(l, a.string());
  emit_report(Ledger::from_jsonl(l.to_jsonl()), b.string());
  for (const char* name : {"report.json", "report.md", "curves.csv", "records.csv"}) {
    INFO(name);
    REQUIRE(fs::exists(a / name));
    CHECK(read_file((a / name).string()) == read_file((b / name).string()));
  }
  CHECK(Json::parse(std::ifstream(a / "report.json")) == build_report(l));
}
