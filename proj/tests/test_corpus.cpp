#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "evbench/corpus.hpp"
#include "evbench/error.hpp"
#include "evbench/pe.hpp"
#include "evbench/sha256.hpp"
#include "support.hpp"

using namespace evbench;
namespace fs = std::filesystem;

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

void put(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

fs::path two_class_tree(const std::string& name) {
  const auto root = testsupport::scratch_dir(name);
  for (int i = 0; i < 3; ++i) {
    put(root / "benign" / ("b" + std::to_string(i)), "benign file " + std::to_string(i));
    put(root / "malicious" / "nested" / ("m" + std::to_string(i)), "malicious file " + std::to_string(i));
  }
  return root;
}

Corpus labeled(std::size_t n_benign, std::size_t n_malicious) {
  std::vector<ManifestEntry> v;
  for (std::size_t i = 0; i < n_benign + n_malicious; ++i) {
    ManifestEntry e;
    const std::string s = "entry" + std::to_string(i);
    e.sha256 = sha256_hex(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
    e.path = "/nowhere/" + s;
    e.label = i < n_benign ? Label::Benign : Label::Malicious;
    e.size = i;
    v.push_back(e);
  }
  return make_corpus(std::move(v));
}

std::set<std::string> hashes(const Corpus& c) {
  std::set<std::string> out;
  for (const auto& e : c.entries) out.insert(e.sha256);
  return out;
}

}  // namespace

TEST_CASE("ingesting two directories hashes every file under its label") {
  const auto root = two_class_tree("ingest");
  const Corpus c = ingest_tree(root.string());
  CHECK(c.entries.size() == 6);
  CHECK(c.count(Label::Benign) == 3);
  CHECK(c.count(Label::Malicious) == 3);
  CHECK(std::is_sorted(c.entries.begin(), c.entries.end(),
                       [](const auto& a, const auto& b) { return a.sha256 < b.sha256; }));
  for (const auto& e : c.entries) {
    CHECK(fs::path(e.path).is_absolute());
    const Bytes b = read_file(e.path);
    CHECK(sha256_hex(b) == e.sha256);
    CHECK(b.size() == e.size);
  }
  CHECK(ingest_tree(root.string()).digest() == c.digest());
  CHECK(ingest_directories((root / "benign").string(), (root / "malicious").string()).digest() == c.digest());
}

TEST_CASE("duplicate content within a label collapses to one entry") {
  const auto root = two_class_tree("dedup");
  put(root / "benign" / "copy", "benign file 0");
  CHECK(ingest_tree(root.string()).entries.size() == 6);
}

TEST_CASE("a file under both labels is a conflict") {
  const auto root = two_class_tree("conflict");
  put(root / "malicious" / "dup", "benign file 1");
  CHECK(error_of([&] { ingest_tree(root.string()); }) == Errc::LabelConflict);
  const Corpus c = ingest_tree(root.string(), false);
  CHECK(c.entries.size() == 5);
  REQUIRE(c.conflicts.size() == 1);
  const std::string s = "benign file 1";
  CHECK(c.conflicts[0] == sha256_hex(ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())));
}

TEST_CASE("missing roots") {
  const auto root = testsupport::scratch_dir("missing");
  CHECK(error_of([&] { ingest_tree((root / "absent").string()); }) == Errc::MissingRoot);
  fs::create_directories(root / "benign");
  CHECK(error_of([&] { ingest_tree(root.string()); }) == Errc::MissingRoot);
}

TEST_CASE("manifest round trip keeps entries, splits and the synthetic tag") {
  const auto root = two_class_tree("manifest");
  Corpus c = ingest_tree(root.string());
  c.entries[0].split = Split::Train;
  c.synthetic = true;
  const auto path = root / "manifest.csv";
  write_manifest(c, path.string());
  const Corpus back = read_manifest(path.string());
  CHECK(back.entries == c.entries);
  CHECK(back.synthetic);
  CHECK(back.digest() == c.digest());

  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first == kSyntheticTag);

  c.synthetic = false;
  write_manifest(c, path.string());
  CHECK_FALSE(read_manifest(path.string()).synthetic);
}

TEST_CASE("manifest paths are relative to the manifest and may be quoted") {
  const auto root = testsupport::scratch_dir("quoted");
  put(root / "data" / "a,b \"x\"", "payload");
  const std::string sha = sha256_hex(read_file((root / "data" / "a,b \"x\"").string()));
  put(root / "m.csv", "# comment\npath,label,sha256,size,split\n\"data/a,b \"\"x\"\"\",malicious," + sha +
                          ",7,train\n");
  const Corpus c = read_manifest((root / "m.csv").string());
  REQUIRE(c.entries.size() == 1);
  CHECK(c.entries[0].path == (root / "data" / "a,b \"x\"").lexically_normal().string());
  CHECK(c.entries[0].label == Label::Malicious);
  CHECK(c.entries[0].split == Split::Train);
  CHECK_FALSE(c.synthetic);  // the tag must be the exact first comment
  CHECK(c.load(c.entries[0]).size() == 7);

  write_manifest(c, (root / "again.csv").string());
  CHECK(read_manifest((root / "again.csv").string()).entries == c.entries);
}

TEST_CASE("malformed manifests") {
  const auto root = testsupport::scratch_dir("badmanifest");
  put(root / "f", "x");
  const std::string sha = sha256_hex(read_file((root / "f").string()));
  const auto bad = [&](const std::string& text) {
    put(root / "m.csv", text);
    return error_of([&] { read_manifest((root / "m.csv").string()); });
  };
  const std::string header = "path,label,sha256,size,split\n";
  CHECK(bad("") == Errc::InvalidConfig);
  CHECK(bad("path,label,sha256,size\n") == Errc::InvalidConfig);
  CHECK(bad(header + "f,benign," + sha + ",1\n") == Errc::InvalidConfig);
  CHECK(bad(header + "f,evil," + sha + ",1,test\n") == Errc::InvalidConfig);
  CHECK(bad(header + "f,unknown," + sha + ",1,test\n") == Errc::InvalidConfig);
  CHECK(bad(header + "f,benign,XYZ,1,test\n") == Errc::InvalidConfig);
  CHECK(bad(header + "f,benign," + sha + ",1x,test\n") == Errc::InvalidConfig);
  CHECK(bad(header + "f,benign," + sha + ",1,dev\n") == Errc::InvalidConfig);
  CHECK(bad(header + "\"f,benign," + sha + ",1,test\n") == Errc::Corrupt);
  CHECK(bad(header + "g,benign," + sha + ",1,test\n") == Errc::IoError);
  CHECK(bad(header + "f,benign," + sha + ",1,test\nf,malicious," + sha + ",1,test\n") == Errc::LabelConflict);
  CHECK(error_of([&] { read_manifest((root / "absent.csv").string()); }) == Errc::IoError);
}

TEST_CASE("loading a file whose content changed is an error") {
  const auto root = two_class_tree("tamper");
  const Corpus c = ingest_tree(root.string());
  put(c.entries[2].path, "changed");
  CHECK(error_of([&] { c.load(c.entries[2]); }) == Errc::Corrupt);
  CHECK(c.load(c.entries[0]).sha256_hex() == c.entries[0].sha256);
}

TEST_CASE("sample draws without replacement and is seed-determined") {
  const Corpus c = labeled(30, 20);
  CHECK(hashes(sample(c, 50, 1)) == hashes(c));
  const Corpus a = sample(c, 10, 42);
  CHECK(a.entries.size() == 10);
  CHECK(hashes(sample(c, 10, 42)) == hashes(a));
  CHECK(hashes(sample(c, 10, 43)) != hashes(a));
  for (const auto& h : hashes(a)) CHECK(hashes(c).count(h) == 1);
  const Corpus m = sample(c, 20, 3, Label::Malicious);
  CHECK(m.count(Label::Malicious) == 20);
  CHECK(error_of([&] { sample(c, 21, 3, Label::Malicious); }) == Errc::NotEnoughFiles);
  CHECK(error_of([&] { sample(c, 51, 3); }) == Errc::NotEnoughFiles);
}

TEST_CASE("split is stratified and partitions the corpus") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Corpus c = labeled(37 + seed, 11 + 3 * seed);
    for (double f : {0.0, 0.1, 0.2, 0.5, 0.9}) {
      const auto [train, test] = split(c, f, seed);
      CHECK(train.entries.size() + test.entries.size() == c.entries.size());
      std::set<std::string> all = hashes(train);
      for (const auto& h : hashes(test)) CHECK(all.insert(h).second);
      CHECK(all == hashes(c));
      for (Label l : {Label::Benign, Label::Malicious}) {
        const double want = f * static_cast<double>(c.count(l));
        CHECK(std::abs(static_cast<double>(test.count(l)) - want) <= 1.0);
      }
      CHECK(train.count(Split::Train) == train.entries.size());
      CHECK(test.count(Split::Test) == test.entries.size());
      if (f == 0.0) CHECK(test.entries.empty());
    }
    CHECK(hashes(split(c, 0.2, seed).second) == hashes(split(c, 0.2, seed).second));
  }
  const Corpus c = labeled(5, 5);
  CHECK(error_of([&] { split(c, 1.0, 0); }) == Errc::DegenerateFraction);
  CHECK(error_of([&] { split(c, -0.1, 0); }) == Errc::DegenerateFraction);
}

TEST_CASE("synthetic files are strictly valid and carry the marker iff malicious") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(seed);
    const bool mal = seed % 2 == 1;
    const auto opts = random_synthetic_options(rng, mal);
    const SyntheticPe s = make_synthetic_pe(rng, opts);
    const PeFile pe = parse_pe(s.bytes, ParseMode::Strict);
    CHECK(validate(pe).empty());
    CHECK(pe.optional.checksum == compute_pe_checksum(s.bytes));
    const auto hit = std::search(s.bytes.begin(), s.bytes.end(), kSyntheticMarker.begin(), kSyntheticMarker.end());
    CHECK((hit != s.bytes.end()) == mal);
    CHECK(s.marker_offset.has_value() == mal);
    if (mal) CHECK(static_cast<std::size_t>(hit - s.bytes.begin()) == *s.marker_offset);
  }
  CHECK(testsupport::synthetic(5, true) == testsupport::synthetic(5, true));
  CHECK(testsupport::synthetic(5, true) != testsupport::synthetic(6, true));
  SyntheticPeOptions bad;
  bad.num_sections = 4;
  Rng rng(1);
  CHECK(error_of([&] { make_synthetic_pe(rng, bad); }) == Errc::InvalidArgument);
}

TEST_CASE("generated corpus is tagged, labeled and reproducible") {
  const auto a = testsupport::scratch_dir("gen-a");
  const auto b = testsupport::scratch_dir("gen-b");
  const Corpus ca = generate_synthetic_corpus(8, 77, a.string());
  const Corpus cb = generate_synthetic_corpus(8, 77, b.string());
  CHECK(ca.synthetic);
  CHECK(ca.count(Label::Benign) == 8);
  CHECK(ca.count(Label::Malicious) == 8);
  CHECK(ca.digest() == cb.digest());
  for (const auto& e : ca.entries) {
    const auto name = fs::path(e.path).filename().string();
    CHECK(name.rfind(e.label == Label::Malicious ? "malicious-" : "benign-", 0) == 0);
    CHECK(ca.load(e).sha256_hex() == e.sha256);
  }
  CHECK(generate_synthetic_corpus(8, 78, b.string()).digest() != ca.digest());
}
