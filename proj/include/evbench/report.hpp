#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "evbench/protocol.hpp"

namespace evbench {

using Json = nlohmann::json;

/// Per-file JSON-lines ledger. The first line is the run header; every other
/// line is one record. Reports are pure functions of the ledger.
struct Ledger {
  Json header = Json::object();
  std::vector<Json> records;

  void add_baseline(const std::string& detector, const BaselineResult& result);
  void add_benign_mod(const BenignModResult& result, std::size_t max_steps);
  void add_occlusion(const OcclusionResult& result, const OcclusionExperimentConfig& cfg);
  void add_packing(const TransformResult& result);
  void add_mutator(const TransformResult& result);

  std::string to_jsonl() const;
  static Ledger from_jsonl(std::string_view text);
  void write(const std::string& path) const;
  static Ledger read(const std::string& path);
};

/// Aggregates the ledger into the machine-readable report.
Json build_report(const Ledger& ledger);

std::string render_report_json(const Json& report);
std::string render_markdown(const Json& report);
/// Long format `series,detector,x,value` for plotting.
std::string render_curves_csv(const Json& report);
/// One row per scan or chain record.
std::string render_records_csv(const Ledger& ledger);

/// Writes report.json, report.md, curves.csv and records.csv into `out_dir`.
void emit_report(const Ledger& ledger, const std::string& out_dir);

}  // namespace evbench
