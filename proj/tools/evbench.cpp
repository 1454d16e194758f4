// evbench: command-line front end for corpus handling, training, evasion
// techniques and reporting.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "evbench/config.hpp"
#include "evbench/corpus.hpp"
#include "evbench/detectors.hpp"
#include "evbench/error.hpp"
#include "evbench/mutations.hpp"
#include "evbench/occlusion.hpp"
#include "evbench/protocol.hpp"
#include "evbench/report.hpp"

namespace fs = std::filesystem;
using namespace evbench;

namespace {

/// Bad invocation: exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void safety_gate(bool synthetic, bool acknowledged) {
  if (synthetic) return;
  if (!acknowledged) {
    throw UsageError(
        "refusing to process a corpus that is not marked synthetic.\n"
        "  These files may be live malware. They are only ever read, never executed, but\n"
        "  handle them on an isolated machine. Pass --i-understand-live-malware to proceed.");
  }
  std::cerr << "*** WARNING: processing a non-synthetic corpus. Files may be live malware. ***\n";
}

std::vector<DetectorSpec> parse_specs(const std::vector<std::string>& texts, double threshold,
                                      std::size_t scan_timeout_ms) {
  std::vector<DetectorSpec> out;
  for (const auto& t : texts) {
    try {
      out.push_back(parse_detector_spec(t));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    out.back().threshold = threshold;
    out.back().scan_timeout = std::chrono::milliseconds(scan_timeout_ms);
  }
  return out;
}

std::string fmt_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", s);
  return buf;
}

void finish_run(const Ledger& ledger, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir + ": " + ec.message());
  ledger.write((fs::path(out_dir) / "ledger.jsonl").string());
  emit_report(ledger, out_dir);
  std::cout << "report written to " << out_dir << " (run " << ledger.header.value("run_id", "") << ")\n";
}

MutationAction action_from_json(const Json& step) {
  MutationAction a;
  a.seed = step.at("action_seed").get<std::uint64_t>();
  const Json& p = step.at("params");
  switch (parse_mutation_kind(step.at("action").get<std::string>())) {
    case MutationKind::RenameSection: a.params = RenameSectionParams{p.at("index").get<std::size_t>()}; break;
    case MutationKind::AddSection: a.params = AddSectionParams{}; break;
    case MutationKind::AppendToSection:
      a.params = AppendToSectionParams{p.at("index").get<std::size_t>(), p.at("count").get<std::size_t>()};
      break;
    case MutationKind::AppendOverlay: a.params = AppendOverlayParams{p.at("count").get<std::size_t>()}; break;
    case MutationKind::AddImport: a.params = AddImportParams{}; break;
    case MutationKind::NewEntryPoint: a.params = NewEntryPointParams{}; break;
    case MutationKind::ZeroChecksum: a.params = ZeroChecksumParams{}; break;
    case MutationKind::StripSignature: a.params = StripSignatureParams{}; break;
    case MutationKind::ScrambleDebug: a.params = ScrambleDebugParams{}; break;
  }
  return a;
}

/// Regenerates every mutated step file from the chain records in the ledger.
void write_chain_steps(const Ledger& ledger, const Corpus& corpus, const fs::path& dir) {
  std::map<std::string, const ManifestEntry*> by_sha;
  for (const auto& e : corpus.entries) by_sha[e.sha256] = &e;
  for (const auto& r : ledger.records) {
    if (r.value("kind", "") != "chain" || !r.contains("steps") || r.at("steps").empty()) continue;
    const auto it = by_sha.find(r.at("sha256").get<std::string>());
    if (it == by_sha.end()) continue;
    const RawBinary bin = corpus.load(*it->second);
    std::vector<MutationRecord> recs;
    for (const auto& s : r.at("steps")) {
      MutationRecord m;
      m.action = action_from_json(s);
      recs.push_back(std::move(m));
    }
    const auto outputs = replay_chain(bin, recs);
    const fs::path sub = dir / r.at("detector").get<std::string>();
    fs::create_directories(sub);
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      write_file((sub / (bin.sha256_hex() + ".step" + std::to_string(k + 1) + ".bin")).string(), outputs[k]);
    }
  }
}

// ---------------------------------------------------------------------------

struct Options {
  // shared
  std::string manifest;
  std::string out;
  std::string file;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::vector<std::string> detectors;
  double threshold = 0.5;
  std::size_t scan_timeout_ms = 30'000;
  bool live = false;
  std::string split = "test";
  // corpus
  std::string root;
  std::string benign_dir;
  std::string malicious_dir;
  bool allow_conflicts = false;
  std::size_t n = 0;
  std::string label;
  double test_fraction = 0.2;
  // train
  std::size_t epochs = 8;
  double learning_rate = 0.2;
  double l2 = 1e-6;
  std::uint32_t gram = kDefaultGramLength;
  std::uint64_t buckets = kDefaultBuckets;
  // evade
  std::size_t max_steps = 10;
  std::size_t subset = 0;
  bool write_steps = false;
  // occlude
  std::string mode = "targeted_random";
  std::size_t beta = 2048;
  std::string search_detector;
  std::string write_occluded;
  std::string benign_manifest;
  std::string tie_break = "left";
  // packeval
  std::string pack_cmd;
  std::size_t pack_timeout_ms = 60'000;
  // run / report
  std::string config;
  std::string ledger;
};

std::optional<Split> split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  if (s == "test") return Split::Test;
  if (s == "train") return Split::Train;
  throw UsageError("--split must be test, train or all");
}

SplitSelection split_selection(const std::string& s) {
  if (s == "all") return SplitSelection::All;
  if (s == "train") return SplitSelection::Train;
  if (s == "test") return SplitSelection::Test;
  throw UsageError("--split must be test, train or all");
}

std::uint64_t need_seed(const Options& o) {
  if (!o.seed) throw UsageError("--seed is required");
  return *o.seed;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_corpus_ingest(const Options& o) {
  Corpus c;
  if (!o.manifest.empty()) {
    c = read_manifest(o.manifest);
  } else if (!o.root.empty()) {
    c = ingest_tree(o.root, !o.allow_conflicts);
  } else if (!o.benign_dir.empty() && !o.malicious_dir.empty()) {
    c = ingest_directories(o.benign_dir, o.malicious_dir, !o.allow_conflicts);
  } else {
    throw UsageError("give --root, --benign and --malicious, or --manifest");
  }
  write_manifest(c, o.out);
  for (const auto& h : c.conflicts) std::cerr << "excluded (label conflict): " << h << "\n";
  std::cout << "entries " << c.entries.size() << " (malicious " << c.count(Label::Malicious) << ", benign "
            << c.count(Label::Benign) << ")\ndigest " << c.digest() << "\n";
  return kExitOk;
}

int cmd_corpus_sample(const Options& o) {
  const Corpus c = read_manifest(o.manifest);
  std::optional<Label> label;
  if (!o.label.empty()) {
    try {
      label = parse_label(o.label);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  const Corpus s = sample(c, o.n, need_seed(o), label);
  write_manifest(s, o.out);
  std::cout << "entries " << s.entries.size() << "\ndigest " << s.digest() << "\n";
  return kExitOk;
}

int cmd_corpus_split(const Options& o) {
  const Corpus c = read_manifest(o.manifest);
  auto [train, test] = split(c, o.test_fraction, need_seed(o));
  Corpus merged = train;
  merged.entries.insert(merged.entries.end(), test.entries.begin(), test.entries.end());
  merged = [&] {
    Corpus m = make_corpus(merged.entries, true);
    m.synthetic = c.synthetic;
    return m;
  }();
  write_manifest(merged, o.out);
  std::cout << "train " << train.entries.size() << ", test " << test.entries.size() << "\ndigest "
            << merged.digest() << "\n";
  return kExitOk;
}

int cmd_corpus_synth(const Options& o) {
  const Corpus c = generate_synthetic_corpus(o.n, need_seed(o), o.out);
  write_manifest(c, (fs::path(o.out) / "manifest.csv").string());
  std::cout << "generated " << c.entries.size() << " files in " << o.out << "\ndigest " << c.digest() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o) {
  const Corpus c = read_manifest(o.manifest);
  safety_gate(c.synthetic, o.live);
  const Corpus train_set = c.filter(std::nullopt, Split::Train);
  if (train_set.entries.empty()) {
    throw Error(Errc::DegenerateCorpus, "manifest has no train entries; run 'corpus split' first");
  }
  const auto files = train_set.load_all();
  std::vector<LabeledBytes> data;
  for (const auto& f : files) data.push_back({f.bytes(), f.label()});
  TrainParams p;
  p.n = o.gram;
  p.num_buckets = o.buckets;
  p.epochs = o.epochs;
  p.learning_rate = o.learning_rate;
  p.l2 = o.l2;
  p.seed = need_seed(o);
  const NGramModel model = train(data, p);
  save_model(model, o.out);
  std::cout << "trained on " << files.size() << " files; model written to " << o.out << "\n";

  const Corpus test_set = c.filter(std::nullopt, Split::Test);
  if (!test_set.entries.empty()) {
    ConfusionCounts cc;
    for (const auto& f : test_set.load_all()) {
      cc.add(f.label(), predict(model, f.bytes()) >= 0.5 ? Decision::Malicious : Decision::Benign);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "held-out: %zu files, tp=%zu fp=%zu tn=%zu fn=%zu, accuracy %.2f%%",
                  cc.total(), cc.tp, cc.fp, cc.tn, cc.fn, *percent(cc.tp + cc.tn, cc.total()));
    std::cout << buf << "\n";
  }
  return kExitOk;
}

int cmd_scan(const Options& o) {
  const auto specs = parse_specs(o.detectors, o.threshold, o.scan_timeout_ms);
  if (specs.size() != 1) throw UsageError("scan takes exactly one --detector");
  std::vector<RawBinary> files;
  if (!o.file.empty()) {
    safety_gate(false, o.live);
    files.push_back(RawBinary::from_file(o.file));
  } else if (!o.manifest.empty()) {
    const Corpus c = read_manifest(o.manifest);
    safety_gate(c.synthetic, o.live);
    const Corpus sel = c.filter(std::nullopt, split_filter(o.split));
    if (sel.entries.empty()) throw Error(Errc::EmptyCorpus, "manifest selects no files");
    files = sel.load_all();
  } else {
    throw UsageError("give --file or --manifest");
  }
  const DetectorHandle det = make_detector(specs.front());
  int status = kExitOk;
  for (const auto& f : files) {
    try {
      const ScanResult r = det.scan(f.bytes());
      std::cout << f.sha256_hex() << "," << fmt_score(r.score) << "," << to_string(r.decision) << "\n";
    } catch (const Error& e) {
      std::cout << "ERROR " << f.sha256_hex() << " " << e.what() << "\n";
      status = kExitFailure;
    }
  }
  return status;
}

RunConfig base_config(const Options& o) {
  if (o.manifest.empty()) throw UsageError("--manifest is required");
  if (o.out.empty()) throw UsageError("--out is required");
  RunConfig cfg;
  cfg.manifest = fs::absolute(o.manifest).string();
  cfg.split = split_selection(o.split);
  cfg.seed = need_seed(o);
  cfg.workers = o.workers;
  cfg.output = o.out;
  cfg.detectors = parse_specs(o.detectors, o.threshold, o.scan_timeout_ms);
  if (cfg.detectors.empty()) throw UsageError("at least one --detector is required");
  return cfg;
}

void validate_or_usage(const RunConfig& cfg) {
  try {
    validate(cfg);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

int cmd_evade(const Options& o) {
  RunConfig cfg = base_config(o);
  cfg.benign_mod = BenignModSettings{o.max_steps, o.subset, FillerMode::Uniform};
  validate_or_usage(cfg);
  const Corpus c = read_manifest(cfg.manifest);
  safety_gate(c.synthetic, o.live);
  const Corpus sel = cfg.split == SplitSelection::All
                         ? c
                         : c.filter(std::nullopt, cfg.split == SplitSelection::Test ? Split::Test : Split::Train);
  if (sel.count(Label::Benign) > 0) {
    throw Error(Errc::PreconditionViolated, "evade needs malicious files only; the selection has " +
                                                std::to_string(sel.count(Label::Benign)) +
                                                " benign files (use 'corpus sample --label malicious')");
  }
  const Ledger ledger = run_protocol(cfg, c, &std::cerr);
  finish_run(ledger, o.out);
  if (o.write_steps) write_chain_steps(ledger, c, fs::path(o.out) / "mutated");
  return kExitOk;
}

int cmd_occlude(const Options& o) {
  std::optional<OcclusionMode> mode;
  try {
    mode = parse_occlusion_mode(o.mode);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (*mode == OcclusionMode::None) throw UsageError("--mode none performs no occlusion");
  TieBreak tie = o.tie_break == "right" ? TieBreak::Right : TieBreak::Left;

  if (!o.file.empty()) {
    safety_gate(false, o.live);
    const RawBinary bin = RawBinary::from_file(o.file, Label::Malicious);
    const std::uint64_t seed = need_seed(o);
    Json rec = {{"sha256", bin.sha256_hex()}, {"mode", to_string(*mode)}, {"beta", o.beta}, {"seed", seed}};
    Bytes occluded;
    if (*mode == OcclusionMode::Undirected) {
      Rng rng(seed);
      auto u = undirected_occlusion(bin.bytes(), o.beta, rng);
      rec["start"] = u.start;
      rec["end"] = u.end;
      rec["calls"] = 0;
      occluded = std::move(u.occluded);
    } else {
      const auto specs = parse_specs(o.detectors, o.threshold, o.scan_timeout_ms);
      if (specs.empty()) throw UsageError("targeted occlusion needs a --detector");
      const std::string search_id = o.search_detector.empty() ? specs.front().id : o.search_detector;
      auto it = std::find_if(specs.begin(), specs.end(), [&](const DetectorSpec& s) { return s.id == search_id; });
      if (it == specs.end()) throw UsageError("no detector named '" + search_id + "'");
      const DetectorHandle det = make_detector(*it);
      OcclusionConfig oc;
      oc.beta = o.beta;
      oc.tie_break = tie;
      if (*mode == OcclusionMode::TargetedRandom) {
        oc.source = ByteSource::random_uniform(seed);
      } else {
        if (o.benign_manifest.empty()) throw UsageError("targeted_adversarial needs --benign-manifest");
        oc.source = ByteSource::benign_sample(read_manifest(o.benign_manifest).filter(Label::Benign).load_all(), seed);
      }
      const AttackResult a = targeted_occlusion_attack(bin, det, oc);
      rec["search_detector"] = det.id();
      rec["start"] = a.outcome.start;
      rec["end"] = a.outcome.end;
      rec["calls"] = a.outcome.calls;
      rec["baseline_score"] = a.before.score;
      rec["final_score"] = a.after.score;
      rec["decision_before"] = to_string(a.before.decision);
      rec["decision_after"] = to_string(a.after.decision);
      rec["evaded"] = a.evaded;
      rec["stitched_source"] = a.outcome.stitched_source;
      occluded = a.occluded;
    }
    rec["occluded_sha256"] = sha256_hex(occluded);
    fs::path dest;
    if (!o.write_occluded.empty()) {
      dest = o.write_occluded;
    } else if (!o.out.empty()) {
      fs::create_directories(o.out);
      dest = fs::path(o.out) / (bin.sha256_hex() + ".occl." + std::string(to_string(*mode)) + ".bin");
    }
    if (!dest.empty()) {
      write_file(dest.string(), occluded);
      rec["written"] = dest.string();
    }
    std::cout << rec.dump() << "\n";
    return kExitOk;
  }

  RunConfig cfg = base_config(o);
  OcclusionSettings s;
  s.search_detector = o.search_detector.empty() ? cfg.detectors.front().id : o.search_detector;
  s.experiment.beta = o.beta;
  s.experiment.tie_break = tie;
  s.experiment.modes = {OcclusionMode::None, *mode};
  s.subset = o.subset;
  cfg.occlusion = s;
  validate_or_usage(cfg);
  const Corpus c = read_manifest(cfg.manifest);
  safety_gate(c.synthetic, o.live);
  finish_run(run_protocol(cfg, c, &std::cerr), o.out);
  return kExitOk;
}

int cmd_packeval(const Options& o) {
  RunConfig cfg = base_config(o);
  if (o.pack_cmd.empty()) throw UsageError("--pack-cmd is required");
  cfg.packing = TransformSettings{o.pack_cmd, std::chrono::milliseconds(o.pack_timeout_ms)};
  validate_or_usage(cfg);
  const Corpus c = read_manifest(cfg.manifest);
  safety_gate(c.synthetic, o.live);
  finish_run(run_protocol(cfg, c, &std::cerr), o.out);
  return kExitOk;
}

int cmd_run(const Options& o) {
  RunConfig cfg;
  try {
    cfg = load_run_config(o.config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (o.seed) cfg.seed = o.seed;
  if (o.workers != 1) cfg.workers = o.workers;
  if (!o.out.empty()) cfg.output = fs::absolute(o.out).string();
  if (cfg.output.empty()) throw UsageError("[run] output: required (or pass --out)");
  validate_or_usage(cfg);
  const Corpus c = read_manifest(cfg.manifest);
  safety_gate(c.synthetic, o.live);
  finish_run(run_protocol(cfg, c, &std::cerr), cfg.output);
  return kExitOk;
}

int cmd_report(const Options& o) {
  const Ledger ledger = Ledger::read(o.ledger);
  emit_report(ledger, o.out);
  std::cout << "report written to " << o.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness benchmark for static malware detectors"};
  app.set_version_flag("--version",
                       "evbench " + std::string(kArtifactVersion) + " (model format " +
                           std::to_string(kModelFormatVersion) + ", mutation pools " +
                           std::to_string(kMutationPoolVersion) + ")");
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--seed", o.seed, "Master seed");
    if (required) opt->required();
  };
  auto add_detectors = [&](CLI::App* c) {
    c->add_option("--detector,-d", o.detectors, "id=ngram:PATH | id=external:CMD | id=constant:X | id=marker:HEX");
    c->add_option("--threshold", o.threshold, "Decision threshold")->check(CLI::Range(0.0, 1.0));
    c->add_option("--scan-timeout-ms", o.scan_timeout_ms, "Per-scan timeout for external adapters");
  };
  auto add_live = [&](CLI::App* c) {
    c->add_flag("--i-understand-live-malware", o.live, "Allow corpora not marked synthetic");
  };
  auto add_split = [&](CLI::App* c) {
    c->add_option("--split", o.split, "Entries to use: test, train or all")->capture_default_str();
  };

  auto* corpus = app.add_subcommand("corpus", "Build, sample, split or synthesize corpora");
  corpus->require_subcommand(1);
  auto* ingest = corpus->add_subcommand("ingest", "Hash labeled directories or a manifest into a manifest");
  ingest->add_option("--root", o.root, "Directory with benign/ and malicious/");
  ingest->add_option("--benign", o.benign_dir, "Benign directory");
  ingest->add_option("--malicious", o.malicious_dir, "Malicious directory");
  ingest->add_option("--manifest", o.manifest, "Existing manifest to re-check");
  ingest->add_option("--out", o.out, "Manifest to write")->required();
  ingest->add_flag("--allow-conflicts", o.allow_conflicts, "Drop label conflicts instead of failing");
  auto* samp = corpus->add_subcommand("sample", "Uniform sample without replacement");
  samp->add_option("--manifest", o.manifest)->required();
  samp->add_option("--n", o.n, "Files to keep")->required();
  samp->add_option("--label", o.label, "Only sample this label");
  samp->add_option("--out", o.out)->required();
  add_seed(samp, true);
  auto* spl = corpus->add_subcommand("split", "Stratified train/test split");
  spl->add_option("--manifest", o.manifest)->required();
  spl->add_option("--test-fraction", o.test_fraction)->capture_default_str();
  spl->add_option("--out", o.out)->required();
  add_seed(spl, true);
  auto* synth = corpus->add_subcommand("synth", "Generate a synthetic PE corpus");
  synth->add_option("--n", o.n, "Files per class")->required();
  synth->add_option("--out", o.out, "Output directory")->required();
  add_seed(synth, true);

  auto* tr = app.add_subcommand("train", "Train the n-gram model on the train split");
  tr->add_option("--manifest", o.manifest)->required();
  tr->add_option("--out", o.out, "Model file")->required();
  tr->add_option("--epochs", o.epochs)->capture_default_str();
  tr->add_option("--learning-rate", o.learning_rate)->capture_default_str();
  tr->add_option("--l2", o.l2)->capture_default_str();
  tr->add_option("--ngram", o.gram)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--buckets", o.buckets)->capture_default_str()->check(CLI::PositiveNumber);
  add_seed(tr, true);
  add_live(tr);

  auto* sc = app.add_subcommand("scan", "Score files with one detector");
  sc->add_option("--file", o.file);
  sc->add_option("--manifest", o.manifest);
  add_detectors(sc);
  add_split(sc);
  add_live(sc);

  auto* ev = app.add_subcommand("evade", "Random benign-modification chains");
  ev->add_option("--manifest", o.manifest)->required();
  ev->add_option("--out", o.out)->required();
  ev->add_option("--max-steps", o.max_steps)->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--subset", o.subset, "Sample this many malicious files (0 = all)");
  ev->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
  ev->add_flag("--write-steps", o.write_steps, "Write every mutated step file");
  add_seed(ev, true);
  add_detectors(ev);
  add_split(ev);
  add_live(ev);

  auto* oc = app.add_subcommand("occlude", "Occlusion search and attack");
  oc->add_option("--file", o.file, "Single file");
  oc->add_option("--manifest", o.manifest, "Batch over malicious files");
  oc->add_option("--mode", o.mode, "undirected, targeted_random or targeted_adversarial")->capture_default_str();
  oc->add_option("--beta", o.beta, "Window size bound")->capture_default_str()->check(CLI::PositiveNumber);
  oc->add_option("--search-detector", o.search_detector, "Detector id to search against");
  oc->add_option("--tie-break", o.tie_break)->check(CLI::IsMember({"left", "right"}))->capture_default_str();
  oc->add_option("--benign-manifest", o.benign_manifest, "Benign byte pool for targeted_adversarial");
  oc->add_option("--write-occluded", o.write_occluded, "Path for the occluded file");
  oc->add_option("--out", o.out, "Output directory");
  oc->add_option("--subset", o.subset);
  oc->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
  add_seed(oc, true);
  add_detectors(oc);
  add_split(oc);
  add_live(oc);

  auto* pk = app.add_subcommand("packeval", "Packing harness");
  pk->add_option("--manifest", o.manifest)->required();
  pk->add_option("--out", o.out)->required();
  pk->add_option("--pack-cmd", o.pack_cmd, "Command template with {in} and {out}")->required();
  pk->add_option("--pack-timeout-ms", o.pack_timeout_ms)->capture_default_str();
  pk->add_option("--workers", o.workers)->check(CLI::PositiveNumber);
  add_seed(pk, true);
  add_detectors(pk);
  add_split(pk);
  add_live(pk);

  auto* rn = app.add_subcommand("run", "Full protocol from a config file");
  rn->add_option("--config", o.config)->required();
  rn->add_option("--out", o.out, "Overrides [run] output");
  rn->add_option("--workers", o.workers, "Overrides [run] workers")->check(CLI::PositiveNumber);
  add_seed(rn, false);
  add_live(rn);

  auto* rp = app.add_subcommand("report", "Re-emit reports from a ledger");
  rp->add_option("--ledger", o.ledger)->required();
  rp->add_option("--out", o.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_corpus_ingest(o);
    if (samp->parsed()) return cmd_corpus_sample(o);
    if (spl->parsed()) return cmd_corpus_split(o);
    if (synth->parsed()) return cmd_corpus_synth(o);
    if (tr->parsed()) return cmd_train(o);
    if (sc->parsed()) return cmd_scan(o);
    if (ev->parsed()) return cmd_evade(o);
    if (oc->parsed()) return cmd_occlude(o);
    if (pk->parsed()) return cmd_packeval(o);
    if (rn->parsed()) return cmd_run(o);
    if (rp->parsed()) return cmd_report(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::InvalidConfig ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
