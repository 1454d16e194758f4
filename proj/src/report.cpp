#include "evbench/report.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "evbench/error.hpp"

namespace fs = std::filesystem;

namespace evbench {

namespace {

Json scan_json(const std::string& technique, const std::string& detector, const ScanRecord& r,
               const std::string& variant_sha256 = {}) {
  Json j = {{"kind", "scan"}, {"technique", technique}, {"detector", detector}, {"sha256", r.sha256},
            {"label", to_string(r.label)}};
  if (!variant_sha256.empty()) j["variant_sha256"] = variant_sha256;
  if (r.result) {
    j["score"] = r.result->score;
    j["decision"] = to_string(r.result->decision);
  } else {
    j["error"] = r.error;
  }
  return j;
}

Json params_json(const MutationAction& a) {
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, RenameSectionParams>) {
          return {{"index", p.index}};
        } else if constexpr (std::is_same_v<T, AppendToSectionParams>) {
          return {{"index", p.index}, {"count", p.count}};
        } else if constexpr (std::is_same_v<T, AppendOverlayParams>) {
          return {{"count", p.count}};
        } else {
          return Json::object();
        }
      },
      a.params);
}

}  // namespace

void Ledger::add_baseline(const std::string& detector, const BaselineResult& result) {
  for (const auto& r : result.records) records.push_back(scan_json("baseline", detector, r));
}

void Ledger::add_benign_mod(const BenignModResult& result, std::size_t max_steps) {
  for (const auto& r : result.records) {
    Json j = {{"kind", "chain"},  {"technique", "benign_mod"}, {"detector", r.detector}, {"sha256", r.sha256},
              {"label", "malicious"}, {"seed", r.seed},          {"max_steps", max_steps}};
    if (!r.result) {
      j["error"] = r.error;
      records.push_back(std::move(j));
      continue;
    }
    const ChainResult& c = *r.result;
    j["status"] = to_string(c.status);
    j["evaded_at"] = c.evaded_at;
    j["initial_score"] = c.initial_score;
    Json steps = Json::array();
    for (std::size_t k = 0; k < c.records.size(); ++k) {
      const MutationRecord& m = c.records[k];
      steps.push_back({{"step", k + 1},
                       {"action", to_string(m.action.kind())},
                       {"params", params_json(m.action)},
                       {"action_seed", m.action.seed},
                       {"rng_seed", m.rng_seed},
                       {"pre_sha256", m.pre_sha256},
                       {"post_sha256", m.post_sha256},
                       {"no_op", m.no_op},
                       {"score", k < c.scores.size() ? Json(c.scores[k]) : Json()}});
    }
    j["steps"] = std::move(steps);
    records.push_back(std::move(j));
  }
}

void Ledger::add_occlusion(const OcclusionResult& result, const OcclusionExperimentConfig& cfg) {
  for (const auto& r : result.records) {
    const std::string technique = "occlusion/" + std::string(to_string(r.mode));
    if (r.mode != OcclusionMode::None) {
      Json j = {{"kind", "occlusion"}, {"mode", to_string(r.mode)}, {"sha256", r.sha256},
                {"label", "malicious"},  {"seed", r.seed},          {"beta", cfg.beta}};
      if (!r.search_detector.empty()) j["search_detector"] = r.search_detector;
      if (r.outcome) {
        j["calls"] = r.outcome->calls;
        j["levels"] = r.outcome->trace.size();
        j["final_left_score"] = r.outcome->final_left_score;
        j["final_right_score"] = r.outcome->final_right_score;
        j["stitched"] = r.outcome->stitched_source;
      }
      if (r.error.empty()) {
        j["start"] = r.start;
        j["end"] = r.end;
        j["occluded_sha256"] = r.occluded_sha256;
      } else {
        j["error"] = r.error;
      }
      records.push_back(std::move(j));
    }
    for (const auto& [det, scan] : r.scans) records.push_back(scan_json(technique, det, scan, r.occluded_sha256));
  }
}

namespace {

void add_transform(Ledger& ledger, const TransformResult& result, const std::string& technique,
                   const std::string& original_tag, const std::string& variant_tag) {
  for (const auto& r : result.records) {
    Json j = {{"kind", "transform"}, {"technique", technique}, {"sha256", r.sha256},
              {"label", to_string(r.label)}, {"ok", r.ok}};
    if (r.ok) {
      j["output_sha256"] = r.output_sha256;
    } else {
      j["error"] = r.error;
    }
    ledger.records.push_back(std::move(j));
    for (const auto& [det, scan] : r.original_scans) {
      ledger.records.push_back(scan_json(technique + "/" + original_tag, det, scan));
    }
    for (const auto& [det, scan] : r.transformed_scans) {
      ledger.records.push_back(scan_json(technique + "/" + variant_tag, det, scan, r.output_sha256));
    }
  }
}

}  // namespace

void Ledger::add_packing(const TransformResult& result) { add_transform(*this, result, "packing", "original", "packed"); }

void Ledger::add_mutator(const TransformResult& result) {
  add_transform(*this, result, "mutator", "original", "mutated");
}

std::string Ledger::to_jsonl() const {
  Json h = header;
  h["kind"] = "run";
  std::string out = h.dump() + "\n";
  for (const auto& r : records) out += r.dump() + "\n";
  return out;
}

Ledger Ledger::from_jsonl(std::string_view text) {
  Ledger l;
  std::istringstream in{std::string(text)};
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(Errc::Corrupt, "ledger line " + std::to_string(lineno) + ": " + e.what());
    }
    if (first) {
      if (!j.is_object() || j.value("kind", "") != "run") throw Error(Errc::Corrupt, "ledger has no run header");
      j.erase("kind");
      l.header = std::move(j);
      first = false;
    } else {
      l.records.push_back(std::move(j));
    }
  }
  if (first) throw Error(Errc::Corrupt, "ledger is empty");
  return l;
}

void Ledger::write(const std::string& path) const {
  const std::string text = to_jsonl();
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Ledger Ledger::read(const std::string& path) {
  const Bytes b = read_file(path);
  return from_jsonl(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
}

// ---------------------------------------------------------------------------
// Aggregation

namespace {

Json pct_json(std::size_t num, std::size_t den) {
  auto p = percent(num, den);
  return p ? Json(*p) : Json();
}

struct ScanView {
  Label label;
  bool ok;
  bool malicious;
};

/// sha256 -> outcome for one (technique, detector) pair.
using ScanIndex = std::map<std::string, ScanView>;

std::map<std::pair<std::string, std::string>, ScanIndex> index_scans(const Ledger& l) {
  std::map<std::pair<std::string, std::string>, ScanIndex> out;
  for (const auto& r : l.records) {
    if (r.value("kind", "") != "scan") continue;
    ScanView v;
    v.label = parse_label(r.at("label").get<std::string>());
    v.ok = !r.contains("error");
    v.malicious = v.ok && r.at("decision").get<std::string>() == "malicious";
    out[{r.at("technique").get<std::string>(), r.at("detector").get<std::string>()}][r.at("sha256")] = v;
  }
  return out;
}

std::vector<std::string> detector_ids(const Ledger& l) {
  std::vector<std::string> ids;
  if (l.header.contains("detectors")) {
    for (const auto& d : l.header.at("detectors")) ids.push_back(d.at("id").get<std::string>());
    return ids;
  }
  std::set<std::string> seen;
  for (const auto& r : l.records) {
    if (r.contains("detector")) seen.insert(r.at("detector").get<std::string>());
  }
  return {seen.begin(), seen.end()};
}

Json baseline_section(const ScanIndex& scans) {
  ConfusionCounts c;
  std::size_t errors = 0;
  for (const auto& [sha, v] : scans) {
    if (!v.ok) {
      ++errors;
      continue;
    }
    c.add(v.label, v.malicious ? Decision::Malicious : Decision::Benign);
  }
  const std::size_t n_mal = c.tp + c.fn;
  const std::size_t n_ben = c.tn + c.fp;
  return {{"counts", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
          {"n_malicious", n_mal},
          {"n_benign", n_ben},
          {"errors", errors},
          {"tp_pct", pct_json(c.tp, n_mal)},
          {"fn_pct", pct_json(c.fn, n_mal)},
          {"tn_pct", pct_json(c.tn, n_ben)},
          {"fp_pct", pct_json(c.fp, n_ben)},
          {"accuracy_pct", pct_json(c.tp + c.tn, c.total())}};
}

Json benign_mod_section(const Ledger& l, const std::vector<std::string>& dets) {
  Json out = Json::object();
  for (const auto& det : dets) {
    std::size_t max_steps = 0;
    bool any = false;
    for (const auto& r : l.records) {
      if (r.value("kind", "") == "chain" && r.at("detector") == det) {
        max_steps = std::max<std::size_t>(max_steps, r.at("max_steps").get<std::size_t>());
        any = true;
      }
    }
    if (!any) continue;
    EvasionCurve c;
    c.evaded_by.assign(max_steps + 1, 0);
    for (const auto& r : l.records) {
      if (r.value("kind", "") != "chain" || r.at("detector") != det) continue;
      if (r.contains("error")) {
        ++c.survived;
        ++c.errors;
        continue;
      }
      const std::string status = r.at("status");
      if (status == to_string(ChainStatus::AlreadyEvading)) {
        ++c.already_fn;
      } else if (status == to_string(ChainStatus::Survived)) {
        ++c.survived;
      } else {
        for (std::size_t k = r.at("evaded_at").get<std::size_t>(); k <= max_steps; ++k) ++c.evaded_by[k];
      }
    }
    const std::size_t evaded = c.evaded_by.back();
    out[det] = {{"max_steps", max_steps},
                {"evaded_by", c.evaded_by},
                {"already_fn", c.already_fn},
                {"evaded", evaded},
                {"survived", c.survived},
                {"errors", c.errors},
                {"tested", c.tested()},
                {"evasion_rate_pct", pct_json(evaded, c.tested() - c.already_fn)}};
  }
  return out;
}

Json occlusion_section(const Ledger& l, const std::vector<std::string>& dets,
                       const std::map<std::pair<std::string, std::string>, ScanIndex>& scans) {
  Json out = Json::object();
  std::vector<std::string> modes;
  std::set<std::string> seen_modes;
  for (const auto& m : kAllOcclusionModes) {
    const std::string tech = "occlusion/" + std::string(to_string(m));
    for (const auto& det : dets) {
      if (scans.count({tech, det}) && seen_modes.insert(std::string(to_string(m))).second) {
        modes.emplace_back(to_string(m));
      }
    }
  }
  for (const auto& r : l.records) {
    if (r.value("kind", "") == "occlusion" && seen_modes.insert(r.at("mode").get<std::string>()).second) {
      modes.push_back(r.at("mode"));
    }
  }
  if (modes.empty()) return out;
  out["modes"] = modes;

  Json search = Json::object();
  for (const auto& r : l.records) {
    if (r.value("kind", "") != "occlusion") continue;
    Json& s = search[r.at("mode").get<std::string>()];
    if (s.is_null()) s = {{"ok", 0}, {"failed", 0}, {"total_window", 0}, {"total_calls", 0}, {"beta", r.at("beta")}};
    if (r.contains("search_detector")) s["search_detector"] = r.at("search_detector");
    if (r.contains("error")) {
      s["failed"] = s["failed"].get<std::size_t>() + 1;
    } else {
      s["ok"] = s["ok"].get<std::size_t>() + 1;
      s["total_window"] = s["total_window"].get<std::size_t>() + r.at("end").get<std::size_t>() -
                          r.at("start").get<std::size_t>();
      s["total_calls"] = s["total_calls"].get<std::size_t>() + r.value("calls", std::size_t{0});
    }
  }
  for (auto& [mode, s] : search.items()) {
    const auto ok = s["ok"].get<std::size_t>();
    s["mean_window"] = ok ? Json(s["total_window"].get<double>() / static_cast<double>(ok)) : Json();
    s["mean_calls"] = ok ? Json(s["total_calls"].get<double>() / static_cast<double>(ok)) : Json();
    s.erase("total_window");
    s.erase("total_calls");
  }
  out["search"] = search;

  Json per_det = Json::object();
  for (const auto& det : dets) {
    const ScanIndex* reference = nullptr;
    if (auto it = scans.find({"occlusion/none", det}); it != scans.end()) {
      reference = &it->second;
    } else if (auto it2 = scans.find({"baseline", det}); it2 != scans.end()) {
      reference = &it2->second;
    }
    for (const auto& mode : modes) {
      auto it = scans.find({"occlusion/" + mode, det});
      if (it == scans.end()) continue;
      std::size_t files = 0, detected = 0, base_detected = 0, retained = 0, errors = 0;
      for (const auto& [sha, v] : it->second) {
        if (!v.ok) {
          ++errors;
          continue;
        }
        ++files;
        detected += v.malicious ? 1 : 0;
        if (reference) {
          auto ref = reference->find(sha);
          if (ref != reference->end() && ref->second.ok && ref->second.malicious) {
            ++base_detected;
            retained += v.malicious ? 1 : 0;
          }
        }
      }
      Json retained_pct = pct_json(retained, base_detected);
      per_det[det][mode] = {{"files", files},
                            {"detected", detected},
                            {"errors", errors},
                            {"detection_pct", pct_json(detected, files)},
                            {"baseline_detected", base_detected},
                            {"retained", retained},
                            {"retained_pct", retained_pct},
                            {"evasion_rate_pct", retained_pct.is_null() ? Json() : Json(100.0 - retained_pct.get<double>())}};
    }
  }
  out["detectors"] = per_det;
  return out;
}

Json transform_section(const Ledger& l, const std::vector<std::string>& dets,
                       const std::map<std::pair<std::string, std::string>, ScanIndex>& scans,
                       const std::string& technique, const std::string& variant_tag, bool lift) {
  std::size_t ok = 0, failures = 0;
  bool any = false;
  for (const auto& r : l.records) {
    if (r.value("kind", "") != "transform" || r.at("technique") != technique) continue;
    any = true;
    (r.at("ok").get<bool>() ? ok : failures) += 1;
  }
  if (!any) return Json();
  Json out = {{"transformed", ok}, {"failures", failures}};
  Json per_det = Json::object();
  static const ScanIndex kEmpty;
  for (const auto& det : dets) {
    auto find = [&](const std::string& tag) -> const ScanIndex& {
      auto it = scans.find({technique + "/" + tag, det});
      return it == scans.end() ? kEmpty : it->second;
    };
    const ScanIndex& before = find("original");
    const ScanIndex& after = find(variant_tag);
    if (before.empty() && after.empty()) continue;
    std::size_t n_ben = 0, tn = 0, ptn = 0, n_mal = 0, tp = 0, ptp = 0, kept = 0, errors = 0;
    for (const auto& [sha, b] : before) {
      auto a = after.find(sha);
      if (!b.ok || a == after.end() || !a->second.ok) {
        ++errors;
        continue;
      }
      if (b.label == Label::Benign) {
        ++n_ben;
        tn += b.malicious ? 0 : 1;
        ptn += a->second.malicious ? 0 : 1;
        ptp += a->second.malicious ? 1 : 0;  // mutated benign outputs count as positives
      } else {
        ++n_mal;
        tp += b.malicious ? 1 : 0;
        kept += (b.malicious && a->second.malicious) ? 1 : 0;
      }
    }
    if (!lift) {
      std::size_t packed_tp = 0;
      for (const auto& [sha, b] : before) {
        auto a = after.find(sha);
        if (b.ok && a != after.end() && a->second.ok && b.label == Label::Malicious && a->second.malicious) {
          ++packed_tp;
        }
      }
      per_det[det] = {{"benign_files", n_ben},
                      {"malware_files", n_mal},
                      {"errors", errors},
                      {"benign_tn_pct", pct_json(tn, n_ben)},
                      {"packed_benign_tn_pct", pct_json(ptn, n_ben)},
                      {"malware_tp_pct", pct_json(tp, n_mal)},
                      {"packed_malware_tp_pct", pct_json(packed_tp, n_mal)},
                      {"accuracy_pct", pct_json(tn + tp, n_ben + n_mal)},
                      {"packed_accuracy_pct", pct_json(ptn + packed_tp, n_ben + n_mal)},
                      {"malware_retained_pct", pct_json(kept, tp)}};
    } else {
      Json pre = pct_json(tn, n_ben);
      Json post = pct_json(ptp, n_ben);
      per_det[det] = {{"files", n_ben},
                      {"errors", errors},
                      {"pre_benign_acc_pct", pre},
                      {"post_detect_pct", post},
                      {"lift", (pre.is_null() || post.is_null())
                                   ? Json()
                                   : Json(compute_lift(pre.get<double>(), post.get<double>()))}};
    }
  }
  out["detectors"] = per_det;
  return out;
}

}  // namespace

Json build_report(const Ledger& ledger) {
  const auto dets = detector_ids(ledger);
  const auto scans = index_scans(ledger);
  Json report = {{"run", ledger.header}, {"detectors", dets}};

  Json baseline = Json::object();
  for (const auto& det : dets) {
    auto it = scans.find({"baseline", det});
    if (it != scans.end()) baseline[det] = baseline_section(it->second);
  }
  report["baseline"] = baseline;

  Json chains = benign_mod_section(ledger, dets);
  if (!chains.empty()) report["benign_mod"] = chains;
  Json occl = occlusion_section(ledger, dets, scans);
  if (!occl.empty()) report["occlusion"] = occl;
  Json pack = transform_section(ledger, dets, scans, "packing", "packed", false);
  if (!pack.is_null()) report["packing"] = pack;
  Json mut = transform_section(ledger, dets, scans, "mutator", "mutated", true);
  if (!mut.is_null()) report["mutator"] = mut;
  return report;
}

std::string render_report_json(const Json& report) { return report.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string fmt1(const Json& v) {
  if (v.is_null()) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v.get<double>());
  return buf;
}

std::string fmt_num(const Json& v) {
  if (v.is_null()) return "";
  if (v.is_number_integer() || v.is_number_unsigned()) return std::to_string(v.get<long long>());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v.get<double>());
  return buf;
}

std::string mode_title(const std::string& mode) {
  if (mode == "none") return "No occlusion";
  if (mode == "undirected") return "Undirected";
  if (mode == "targeted_random") return "Targeted (random bytes)";
  if (mode == "targeted_adversarial") return "Targeted (benign bytes)";
  return mode;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string render_markdown(const Json& report) {
  std::ostringstream md;
  const Json& run = report.at("run");
  md << "# Evaluation report\n\n";
  if (run.contains("run_id")) md << "- Run: `" << run.at("run_id").get<std::string>() << "`\n";
  if (run.contains("seed")) md << "- Seed: " << run.at("seed").dump() << "\n";
  if (run.contains("corpus_digest")) md << "- Corpus digest: `" << run.at("corpus_digest").get<std::string>() << "`\n";
  if (run.contains("files")) md << "- Files evaluated: " << run.at("files").dump() << "\n";
  md << "\n";

  if (run.contains("detectors")) {
    md << "## Detectors\n\n| Detector | Description | Threshold |\n|---|---|---|\n";
    for (const auto& d : run.at("detectors")) {
      md << "| " << d.at("id").get<std::string>() << " | " << d.value("description", "") << " | "
         << fmt_num(d.value("threshold", Json())) << " |\n";
    }
    md << "\n";
  }

  md << "## Baseline accuracy\n\n| Classifier | TN% | TP% | FN% | FP% | Accuracy% | Errors |\n"
        "|---|---|---|---|---|---|---|\n";
  for (const auto& [det, b] : report.at("baseline").items()) {
    md << "| " << det << " | " << fmt1(b.at("tn_pct")) << " | " << fmt1(b.at("tp_pct")) << " | "
       << fmt1(b.at("fn_pct")) << " | " << fmt1(b.at("fp_pct")) << " | " << fmt1(b.at("accuracy_pct")) << " | "
       << b.at("errors").dump() << " |\n";
  }
  md << "\n";

  if (report.contains("benign_mod")) {
    const Json& bm = report.at("benign_mod");
    md << "## Benign modifications\n\n"
          "| Classifier | Missed before modification | Evaded | Still detected | Errors | Evasion rate% |\n"
          "|---|---|---|---|---|---|\n";
    for (const auto& [det, c] : bm.items()) {
      md << "| " << det << " | " << c.at("already_fn").dump() << " | " << c.at("evaded").dump() << " | "
         << c.at("survived").dump() << " | " << c.at("errors").dump() << " | " << fmt1(c.at("evasion_rate_pct"))
         << " |\n";
    }
    md << "\nFiles evaded after k modifications:\n\n| Classifier |";
    std::size_t max_steps = 0;
    for (const auto& [det, c] : bm.items()) max_steps = std::max(max_steps, c.at("max_steps").get<std::size_t>());
    for (std::size_t k = 0; k <= max_steps; ++k) md << " k=" << k << " |";
    md << "\n|---|";
    for (std::size_t k = 0; k <= max_steps; ++k) md << "---|";
    md << "\n";
    for (const auto& [det, c] : bm.items()) {
      md << "| " << det << " |";
      for (const auto& v : c.at("evaded_by")) md << " " << v.dump() << " |";
      md << "\n";
    }
    md << "\n";
  }

  if (report.contains("occlusion")) {
    const Json& oc = report.at("occlusion");
    const auto modes = oc.at("modes").get<std::vector<std::string>>();
    md << "## Byte occlusion\n\nDetected files out of files occluded:\n\n| Classifier |";
    for (const auto& m : modes) md << " " << mode_title(m) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < modes.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& [det, per_mode] : oc.at("detectors").items()) {
      md << "| " << det << " |";
      for (const auto& m : modes) {
        if (!per_mode.contains(m)) {
          md << " n/a |";
          continue;
        }
        const Json& c = per_mode.at(m);
        md << " " << c.at("detected").dump() << "/" << c.at("files").dump() << " (" << fmt1(c.at("detection_pct"))
           << "%) |";
      }
      md << "\n";
    }
    md << "\nEvasion rate% among files detected without occlusion:\n\n| Classifier |";
    for (const auto& m : modes) md << " " << mode_title(m) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < modes.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& [det, per_mode] : oc.at("detectors").items()) {
      md << "| " << det << " |";
      for (const auto& m : modes) md << " " << (per_mode.contains(m) ? fmt1(per_mode.at(m).at("evasion_rate_pct")) : "n/a") << " |";
      md << "\n";
    }
    if (!oc.at("search").empty()) {
      md << "\n| Mode | Searched with | Beta | Located | Failed | Mean window | Mean queries |\n"
            "|---|---|---|---|---|---|---|\n";
      for (const auto& [mode, s] : oc.at("search").items()) {
        md << "| " << mode_title(mode) << " | " << s.value("search_detector", "-") << " | " << s.at("beta").dump()
           << " | " << s.at("ok").dump() << " | " << s.at("failed").dump() << " | " << fmt1(s.at("mean_window"))
           << " | " << fmt1(s.at("mean_calls")) << " |\n";
      }
    }
    md << "\n";
  }

  if (report.contains("packing")) {
    const Json& p = report.at("packing");
    md << "## Packing\n\nFiles packed: " << p.at("transformed").dump() << ", failures: " << p.at("failures").dump()
       << "\n\n| Classifier | Benign | Packed Benign | Malware | Packed Malware |\n|---|---|---|---|---|\n";
    for (const auto& [det, c] : p.at("detectors").items()) {
      md << "| " << det << " | " << fmt1(c.at("benign_tn_pct")) << " | " << fmt1(c.at("packed_benign_tn_pct"))
         << " | " << fmt1(c.at("malware_tp_pct")) << " | " << fmt1(c.at("packed_malware_tp_pct")) << " |\n";
    }
    md << "\n";
  }

  if (report.contains("mutator")) {
    const Json& p = report.at("mutator");
    md << "## External mutator on benign files\n\nFiles transformed: " << p.at("transformed").dump()
       << ", failures: " << p.at("failures").dump()
       << "\n\n| Classifier | Pre Accuracy | Post Accuracy | Lift |\n|---|---|---|---|\n";
    for (const auto& [det, c] : p.at("detectors").items()) {
      md << "| " << det << " | " << fmt1(c.at("pre_benign_acc_pct")) << " | " << fmt1(c.at("post_detect_pct"))
         << " | " << fmt1(c.at("lift")) << " |\n";
    }
    md << "\n";
  }
  return md.str();
}

std::string render_curves_csv(const Json& report) {
  std::string out = "series,detector,x,value\n";
  auto row = [&](const std::string& series, const std::string& det, const std::string& x, const Json& v) {
    out += series + "," + csv_field(det) + "," + x + "," + fmt_num(v) + "\n";
  };
  if (report.contains("benign_mod")) {
    for (const auto& [det, c] : report.at("benign_mod").items()) {
      const auto& ev = c.at("evaded_by");
      for (std::size_t k = 0; k < ev.size(); ++k) row("evaded_by", det, std::to_string(k), ev[k]);
      row("already_fn", det, "", c.at("already_fn"));
      row("evaded", det, "", c.at("evaded"));
      row("survived", det, "", c.at("survived"));
    }
  }
  if (report.contains("occlusion")) {
    for (const auto& [det, per_mode] : report.at("occlusion").at("detectors").items()) {
      for (const auto& [mode, c] : per_mode.items()) {
        row("occlusion_detected", det, mode, c.at("detected"));
        row("occlusion_detection_pct", det, mode, c.at("detection_pct"));
      }
    }
  }
  return out;
}

std::string render_records_csv(const Ledger& ledger) {
  std::string out = "kind,technique,detector,sha256,label,variant_sha256,score,decision,status,step,error\n";
  for (const auto& r : ledger.records) {
    const std::string kind = r.value("kind", "");
    std::string technique = r.value("technique", "");
    if (kind == "occlusion") technique = "occlusion/" + r.value("mode", "");
    std::string score, decision, status, step, variant = r.value("variant_sha256", "");
    if (kind == "scan") {
      if (r.contains("score")) score = fmt_num(r.at("score"));
      decision = r.value("decision", "");
    } else if (kind == "chain") {
      status = r.value("status", "");
      if (r.contains("evaded_at") && status == "evaded") step = std::to_string(r.at("evaded_at").get<std::size_t>());
      if (r.contains("steps") && !r.at("steps").empty()) {
        const Json& last = r.at("steps").back();
        variant = last.value("post_sha256", "");
        if (!last.at("score").is_null()) score = fmt_num(last.at("score"));
      } else if (r.contains("initial_score")) {
        score = fmt_num(r.at("initial_score"));
      }
    } else if (kind == "occlusion") {
      variant = r.value("occluded_sha256", "");
      status = r.contains("error") ? "failed" : "ok";
      if (r.contains("calls")) step = std::to_string(r.at("calls").get<std::size_t>());
    } else if (kind == "transform") {
      variant = r.value("output_sha256", "");
      status = r.value("ok", false) ? "ok" : "failed";
    }
    out += kind + "," + csv_field(technique) + "," + csv_field(r.value("detector", "")) + "," +
           r.value("sha256", "") + "," + r.value("label", "") + "," + variant + "," + score + "," + decision + "," +
           status + "," + step + "," + csv_field(r.value("error", "")) + "\n";
  }
  return out;
}

void emit_report(const Ledger& ledger, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + out_dir + ": " + ec.message());
  const Json report = build_report(ledger);
  auto put = [&](const char* name, const std::string& text) {
    write_file((fs::path(out_dir) / name).string(),
               ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  put("report.json", render_report_json(report));
  put("report.md", render_markdown(report));
  put("curves.csv", render_curves_csv(report));
  put("records.csv", render_records_csv(ledger));
}

}  // namespace evbench
