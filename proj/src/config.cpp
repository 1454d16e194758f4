#include "evbench/config.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <ostream>
#include <set>
#include <sstream>

#include "evbench/error.hpp"
#include "evbench/process.hpp"
#include "evbench/sha256.hpp"

namespace fs = std::filesystem;

namespace evbench {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

std::string_view kind_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::NGram: return "ngram";
    case DetectorKind::External: return "external";
    case DetectorKind::Constant: return "constant";
    case DetectorKind::Marker: return "marker";
  }
  return "ngram";
}

std::optional<DetectorKind> parse_kind(std::string_view s) {
  for (auto k : {DetectorKind::NGram, DetectorKind::External, DetectorKind::Constant, DetectorKind::Marker}) {
    if (kind_name(k) == s) return k;
  }
  return std::nullopt;
}

double parse_unit_interval(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0' || !(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("expected a number in [0,1]");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("expected a non-negative integer");
  }
  errno = 0;
  const auto v = std::strtoull(s.c_str(), nullptr, 10);
  if (errno == ERANGE) throw std::invalid_argument("integer out of range");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw std::invalid_argument("expected true or false");
}

void check_detector_arg(const DetectorSpec& d) {
  switch (d.kind) {
    case DetectorKind::NGram:
    case DetectorKind::External:
      if (d.arg.empty()) throw std::invalid_argument("missing model path or command");
      break;
    case DetectorKind::Constant: parse_unit_interval(d.arg); break;
    case DetectorKind::Marker:
      if (d.arg.empty() || from_hex(d.arg).empty()) throw std::invalid_argument("marker must be non-empty hex");
      break;
  }
}

}  // namespace

DetectorSpec parse_detector_spec(std::string_view text) {
  const auto eq = text.find('=');
  const auto colon = text.find(':', eq == std::string_view::npos ? 0 : eq);
  if (eq == std::string_view::npos || colon == std::string_view::npos) {
    throw Error(Errc::InvalidArgument, "detector spec must look like id=type:arg, got '" + std::string(text) + "'");
  }
  DetectorSpec d;
  d.id = std::string(text.substr(0, eq));
  if (!valid_id(d.id)) throw Error(Errc::InvalidArgument, "bad detector id '" + d.id + "'");
  const auto kind = parse_kind(text.substr(eq + 1, colon - eq - 1));
  if (!kind) {
    throw Error(Errc::InvalidArgument, "unknown detector type '" + std::string(text.substr(eq + 1, colon - eq - 1)) +
                                           "' (ngram, external, constant, marker)");
  }
  d.kind = *kind;
  d.arg = std::string(text.substr(colon + 1));
  try {
    check_detector_arg(d);
  } catch (const std::exception& e) {
    throw Error(Errc::InvalidArgument, "detector '" + d.id + "': " + e.what());
  }
  return d;
}

DetectorHandle make_detector(const DetectorSpec& spec) {
  std::shared_ptr<Scorer> scorer;
  switch (spec.kind) {
    case DetectorKind::NGram:
      scorer = std::make_shared<NGramScorer>(std::make_shared<const NGramModel>(load_model(spec.arg)));
      break;
    case DetectorKind::External: {
      AdapterConfig cfg;
      cfg.command = split_command(spec.arg);
      cfg.startup_timeout = spec.startup_timeout;
      cfg.scan_timeout = spec.scan_timeout;
      cfg.restart_on_error = spec.restart_on_error;
      scorer = std::make_shared<ExternalScorer>(cfg, spec.pool);
      break;
    }
    case DetectorKind::Constant: scorer = std::make_shared<ConstantScorer>(std::stod(spec.arg)); break;
    case DetectorKind::Marker: scorer = std::make_shared<MarkerScorer>(from_hex(spec.arg)); break;
  }
  return DetectorHandle(spec.id, std::move(scorer), spec.threshold);
}

// ---------------------------------------------------------------------------
// Config file

RunConfig parse_run_config(std::string_view text, const std::string& base_dir) {
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen_sections;
  DetectorSpec* det = nullptr;
  std::set<std::string> det_has_type;

  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return (path.is_absolute() ? path : fs::path(base_dir) / path).lexically_normal().string();
  };

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    auto fail = [&](const std::string& key, const std::string& msg) -> Error {
      std::string where = "config line " + std::to_string(lineno) + ": ";
      if (!section.empty()) where += "[" + section + "] ";
      if (!key.empty()) where += key + ": ";
      return Error(Errc::InvalidConfig, where + msg);
    };
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("", "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!seen_sections.insert(section).second) throw fail("", "duplicate section");
      det = nullptr;
      if (section.rfind("detector.", 0) == 0) {
        const std::string id = section.substr(9);
        if (!valid_id(id)) throw fail("", "bad detector id '" + id + "'");
        cfg.detectors.emplace_back();
        cfg.detectors.back().id = id;
        det = &cfg.detectors.back();
      } else if (section == "benign_mod") {
        cfg.benign_mod.emplace();
      } else if (section == "occlusion") {
        cfg.occlusion.emplace();
      } else if (section == "packing") {
        cfg.packing.emplace();
      } else if (section == "mutator") {
        cfg.mutator.emplace();
      } else if (section != "run") {
        throw fail("", "unknown section");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw fail("", "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (section.empty()) throw fail(key, "key outside any section");

    try {
      if (section == "run") {
        if (key == "manifest") {
          cfg.manifest = resolve(value);
        } else if (key == "split") {
          if (value == "test") cfg.split = SplitSelection::Test;
          else if (value == "train") cfg.split = SplitSelection::Train;
          else if (value == "all") cfg.split = SplitSelection::All;
          else throw std::invalid_argument("expected test, train or all");
        } else if (key == "seed") {
          cfg.seed = parse_u64(value);
        } else if (key == "workers") {
          cfg.workers = parse_u64(value);
          if (cfg.workers < 1) throw std::invalid_argument("must be at least 1");
        } else if (key == "output") {
          cfg.output = resolve(value);
        } else {
          throw std::invalid_argument("unknown key");
        }
      } else if (det) {
        if (key == "type") {
          auto k = parse_kind(value);
          if (!k) throw std::invalid_argument("expected ngram, external, constant or marker");
          det->kind = *k;
          det_has_type.insert(det->id);
        } else if (key == "model") {
          det->arg = resolve(value);
        } else if (key == "command" || key == "value" || key == "marker") {
          det->arg = value;
        } else if (key == "threshold") {
          det->threshold = parse_unit_interval(value);
        } else if (key == "startup_timeout_ms") {
          det->startup_timeout = std::chrono::milliseconds(parse_u64(value));
        } else if (key == "scan_timeout_ms") {
          det->scan_timeout = std::chrono::milliseconds(parse_u64(value));
        } else if (key == "restart_on_error") {
          det->restart_on_error = parse_bool(value);
        } else if (key == "pool") {
          det->pool = parse_u64(value);
          if (det->pool < 1) throw std::invalid_argument("must be at least 1");
        } else {
          throw std::invalid_argument("unknown key");
        }
      } else if (section == "benign_mod") {
        auto& b = *cfg.benign_mod;
        if (key == "max_steps") {
          b.max_steps = parse_u64(value);
          if (b.max_steps < 1) throw std::invalid_argument("must be at least 1");
        } else if (key == "subset") {
          b.subset = parse_u64(value);
        } else if (key == "filler") {
          if (value == "uniform") b.filler = FillerMode::Uniform;
          else if (value == "benign") b.filler = FillerMode::BenignSample;
          else throw std::invalid_argument("expected uniform or benign");
        } else {
          throw std::invalid_argument("unknown key");
        }
      } else if (section == "occlusion") {
        auto& o = *cfg.occlusion;
        if (key == "search_detector") {
          o.search_detector = value;
        } else if (key == "beta") {
          o.experiment.beta = parse_u64(value);
          if (o.experiment.beta < 1) throw std::invalid_argument("must be at least 1");
        } else if (key == "modes") {
          o.experiment.modes.clear();
          std::istringstream list(value);
          std::string item;
          while (std::getline(list, item, ',')) {
            const std::string m(trim(item));
            try {
              o.experiment.modes.push_back(parse_occlusion_mode(m));
            } catch (const Error&) {
              throw std::invalid_argument("unknown mode '" + m +
                                          "' (none, undirected, targeted_random, targeted_adversarial)");
            }
          }
          if (o.experiment.modes.empty()) throw std::invalid_argument("empty mode list");
        } else if (key == "tie_break") {
          if (value == "left") o.experiment.tie_break = TieBreak::Left;
          else if (value == "right") o.experiment.tie_break = TieBreak::Right;
          else throw std::invalid_argument("expected left or right");
        } else if (key == "per_detector_search") {
          o.experiment.per_detector_search = parse_bool(value);
        } else if (key == "subset") {
          o.subset = parse_u64(value);
        } else {
          throw std::invalid_argument("unknown key");
        }
      } else {
        auto& t = section == "packing" ? *cfg.packing : *cfg.mutator;
        if (key == "command") {
          t.command = value;
        } else if (key == "timeout_ms") {
          t.timeout = std::chrono::milliseconds(parse_u64(value));
          if (t.timeout.count() < 1) throw std::invalid_argument("must be positive");
        } else {
          throw std::invalid_argument("unknown key");
        }
      }
    } catch (const std::invalid_argument& e) {
      throw fail(key, e.what());
    }
  }
  for (const auto& d : cfg.detectors) {
    if (!det_has_type.count(d.id)) {
      throw Error(Errc::InvalidConfig, "[detector." + d.id + "] type: required");
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::InvalidConfig, "config file not found: " + path);
  const Bytes b = read_file(path);
  return parse_run_config(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()),
                          fs::absolute(fs::path(path)).parent_path().string());
}

void validate(const RunConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& msg) {
    return Error(Errc::InvalidConfig, field + ": " + msg);
  };
  if (!cfg.seed) throw fail("[run] seed", "required (no default seed)");
  if (cfg.manifest.empty()) throw fail("[run] manifest", "required");
  std::error_code ec;
  if (!fs::is_regular_file(cfg.manifest, ec)) throw fail("[run] manifest", "file not found: " + cfg.manifest);
  if (cfg.workers < 1) throw fail("[run] workers", "must be at least 1");
  if (cfg.detectors.empty()) throw fail("[detector.*]", "at least one detector is required");
  std::set<std::string> ids;
  for (const auto& d : cfg.detectors) {
    const std::string field = "[detector." + d.id + "]";
    if (!ids.insert(d.id).second) throw fail(field, "duplicate detector id");
    try {
      check_detector_arg(d);
    } catch (const std::exception& e) {
      throw fail(field, e.what());
    }
    if (d.kind == DetectorKind::NGram && !fs::is_regular_file(d.arg, ec)) {
      throw fail(field + " model", "file not found: " + d.arg);
    }
    if (d.kind == DetectorKind::External) {
      const auto argv = split_command(d.arg);
      if (argv.empty() || !find_executable(argv.front())) throw fail(field + " command", "executable not found");
    }
  }
  if (cfg.occlusion && !cfg.occlusion->experiment.per_detector_search) {
    if (cfg.occlusion->search_detector.empty()) throw fail("[occlusion] search_detector", "required");
    if (!ids.count(cfg.occlusion->search_detector)) {
      throw fail("[occlusion] search_detector", "no detector named '" + cfg.occlusion->search_detector + "'");
    }
  }
  for (const auto* t : {&cfg.packing, &cfg.mutator}) {
    if (!*t) continue;
    const std::string field = t == &cfg.packing ? "[packing] command" : "[mutator] command";
    try {
      parse_transform_command((*t)->command, (*t)->timeout);
    } catch (const Error& e) {
      throw fail(field, e.what());
    }
  }
}

Json canonical_config(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed.value_or(0);
  j["split"] = cfg.split == SplitSelection::Test ? "test" : cfg.split == SplitSelection::Train ? "train" : "all";
  Json dets = Json::array();
  for (const auto& d : cfg.detectors) {
    Json dj = {{"id", d.id}, {"type", kind_name(d.kind)}, {"threshold", d.threshold}};
    if (d.kind == DetectorKind::NGram) {
      dj["model_sha256"] = sha256_hex(read_file(d.arg));
    } else {
      dj["arg"] = d.arg;
    }
    dets.push_back(std::move(dj));
  }
  j["detectors"] = dets;
  if (cfg.benign_mod) {
    j["benign_mod"] = {{"max_steps", cfg.benign_mod->max_steps},
                       {"subset", cfg.benign_mod->subset},
                       {"filler", cfg.benign_mod->filler == FillerMode::Uniform ? "uniform" : "benign"},
                       {"pool_version", kMutationPoolVersion}};
  }
  if (cfg.occlusion) {
    Json modes = Json::array();
    for (auto m : cfg.occlusion->experiment.modes) modes.push_back(to_string(m));
    j["occlusion"] = {{"search_detector", cfg.occlusion->search_detector},
                      {"beta", cfg.occlusion->experiment.beta},
                      {"modes", modes},
                      {"tie_break", cfg.occlusion->experiment.tie_break == TieBreak::Left ? "left" : "right"},
                      {"per_detector_search", cfg.occlusion->experiment.per_detector_search},
                      {"subset", cfg.occlusion->subset}};
  }
  if (cfg.packing) j["packing"] = {{"command", cfg.packing->command}};
  if (cfg.mutator) j["mutator"] = {{"command", cfg.mutator->command}};
  return j;
}

// ---------------------------------------------------------------------------

Ledger run_protocol(const RunConfig& cfg, const Corpus& corpus, std::ostream* log) {
  validate(cfg);
  const std::uint64_t seed = *cfg.seed;
  Corpus selected = cfg.split == SplitSelection::All
                        ? corpus
                        : corpus.filter(std::nullopt, cfg.split == SplitSelection::Test ? Split::Test : Split::Train);
  if (selected.entries.empty()) throw Error(Errc::EmptyCorpus, "no corpus entries in the selected split");
  auto say = [&](const std::string& s) {
    if (log) *log << s << "\n" << std::flush;
  };

  std::vector<DetectorHandle> detectors;
  for (const auto& d : cfg.detectors) detectors.push_back(make_detector(d));

  const Json config = canonical_config(cfg);
  const std::string digest = selected.digest();
  Ledger ledger;
  const std::string id_source = digest + "\n" + config.dump();
  ledger.header["run_id"] = sha256_hex(ByteView(reinterpret_cast<const std::uint8_t*>(id_source.data()),
                                                id_source.size()))
                                .substr(0, 16);
  ledger.header["seed"] = seed;
  ledger.header["corpus_digest"] = digest;
  ledger.header["files"] = selected.entries.size();
  ledger.header["malicious"] = selected.count(Label::Malicious);
  ledger.header["benign"] = selected.count(Label::Benign);
  ledger.header["artifact_version"] = kArtifactVersion;
  ledger.header["model_format_version"] = kModelFormatVersion;
  ledger.header["config"] = config;
  Json dets = Json::array();
  for (const auto& d : detectors) {
    dets.push_back({{"id", d.id()}, {"description", d.describe()}, {"threshold", d.threshold()}});
  }
  ledger.header["detectors"] = dets;

  const auto files = selected.load_all();
  for (const auto& det : detectors) {
    say("baseline: " + det.id());
    ledger.add_baseline(det.id(), baseline_eval(files, det, cfg.workers));
  }

  auto malicious_subset = [&](std::size_t n, std::uint64_t stream) {
    const std::size_t available = selected.count(Label::Malicious);
    Corpus pick = sample(selected, n == 0 ? available : n, derive_seed(seed, stream), Label::Malicious);
    return pick.load_all();
  };

  if (cfg.benign_mod) {
    say("benign modifications");
    const auto mal = malicious_subset(cfg.benign_mod->subset, 101);
    std::vector<RawBinary> benign_files;
    MutationOptions opts;
    opts.filler = cfg.benign_mod->filler;
    if (opts.filler == FillerMode::BenignSample) {
      benign_files = corpus.filter(Label::Benign).load_all();
      if (benign_files.empty()) throw Error(Errc::InvalidConfig, "[benign_mod] filler: benign needs benign files");
      for (const auto& b : benign_files) opts.benign_pool.push_back(b.bytes());
    }
    const auto res = run_benign_mod_experiment(mal, detectors, cfg.benign_mod->max_steps, seed, opts, cfg.workers);
    ledger.add_benign_mod(res, cfg.benign_mod->max_steps);
  }

  if (cfg.occlusion) {
    say("occlusion");
    const auto mal = malicious_subset(cfg.occlusion->subset, 102);
    std::vector<RawBinary> benign_pool;
    const auto& modes = cfg.occlusion->experiment.modes;
    if (std::find(modes.begin(), modes.end(), OcclusionMode::TargetedAdversarial) != modes.end()) {
      benign_pool = corpus.filter(Label::Benign).load_all();
    }
    const auto res = run_occlusion_experiment(mal, benign_pool, cfg.occlusion->search_detector, detectors,
                                              cfg.occlusion->experiment, seed, cfg.workers);
    ledger.add_occlusion(res, cfg.occlusion->experiment);
  }

  const std::string work = (cfg.output.empty() ? fs::temp_directory_path() / "evbench-work"
                                               : fs::path(cfg.output) / "work")
                               .string();
  if (cfg.packing) {
    say("packing");
    const auto cmd = parse_transform_command(cfg.packing->command, cfg.packing->timeout);
    ledger.add_packing(run_packing_experiment(files, detectors, cmd, work + "/packing", cfg.workers));
  }
  if (cfg.mutator) {
    say("external mutator");
    const auto cmd = parse_transform_command(cfg.mutator->command, cfg.mutator->timeout);
    std::vector<RawBinary> benign;
    for (const auto& f : files) {
      if (f.label() == Label::Benign) benign.push_back(f);
    }
    ledger.add_mutator(run_external_mutator_experiment(benign, detectors, cmd, work + "/mutator", cfg.workers));
  }
  return ledger;
}

}  // namespace evbench
