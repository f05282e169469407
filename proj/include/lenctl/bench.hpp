// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Evaluation harness: JSONL corpus loading, target derivation, batch runs of
/// the marker pipeline or the implicit baseline, and JSON/CSV/markdown reports.
///
/// Corpus line schema:
///   {"id": str, "prompt": str, "reference"?: str, "target_words"?: int,
///    "min_words"?: int, "max_words"?: int, "language"?: "en" | "zh"}

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lenctl/backend.hpp"
#include "lenctl/decode.hpp"
#include "lenctl/error.hpp"
#include "lenctl/metrics.hpp"
#include "lenctl/pipeline.hpp"
#include "lenctl/segmenter.hpp"

namespace lenctl {

inline constexpr std::string_view kReportSchema = "lenctl.eval/1";

enum class Language : std::uint8_t { English, Chinese };

inline std::string_view language_code(Language l) { return l == Language::Chinese ? "zh" : "en"; }

inline Language language_from_code(std::string_view s) {
  if (s == "en" || s == "English" || s == "english") return Language::English;
  if (s == "zh" || s == "Chinese" || s == "chinese") return Language::Chinese;
  throw DomainError("unknown language '" + std::string(s) + "'");
}

/// Segmentation rule for a language: characters for Chinese, the default otherwise.
inline SegmentationRule rule_for(Language l, SegmentationRule english = SegmentationRule::words()) {
  return l == Language::Chinese ? SegmentationRule::cjk() : english;
}

struct BenchmarkRecord {
  std::string id;
  std::string prompt;
  std::optional<std::string> reference;
  std::optional<LengthConstraint> constraint;
  Language language = Language::English;

  friend bool operator==(const BenchmarkRecord& a, const BenchmarkRecord& b) {
    auto same = [](const std::optional<LengthConstraint>& x, const std::optional<LengthConstraint>& y) {
      if (x.has_value() != y.has_value()) return false;
      return !x || (x->kind == y->kind && x->min == y->min && x->max == y->max);
    };
    return a.id == b.id && a.prompt == b.prompt && a.reference == b.reference && same(a.constraint, b.constraint) &&
           a.language == b.language;
  }
};

/// Parses one corpus line. Throws ParseError naming the problem.
inline BenchmarkRecord parse_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record is not a JSON object");
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw ParseError(std::string("'") + key + "' must be a string");
    return j[key].get<std::string>();
  };
  auto num = [&](const char* key) -> std::optional<std::int64_t> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_number_integer()) throw ParseError(std::string("'") + key + "' must be an integer");
    return j[key].get<std::int64_t>();
  };
  BenchmarkRecord r;
  auto id = str("id");
  auto prompt = str("prompt");
  if (!id || id->empty()) throw ParseError("missing 'id'");
  if (!prompt || prompt->empty()) throw ParseError("missing 'prompt'");
  r.id = *id;
  r.prompt = *prompt;
  r.reference = str("reference");
  if (auto lang = str("language")) {
    try {
      r.language = language_from_code(*lang);
    } catch (const DomainError& e) {
      throw ParseError(e.what());
    }
  }
  const auto target = num("target_words");
  const auto lo = num("min_words");
  const auto hi = num("max_words");
  try {
    if (target) {
      if (lo || hi) throw ParseError("'target_words' cannot be combined with 'min_words'/'max_words'");
      r.constraint = LengthConstraint::exact(*target);
    } else if (lo || hi) {
      if (!lo || !hi) throw ParseError("'min_words' and 'max_words' must be given together");
      r.constraint = LengthConstraint::range(*lo, *hi);
    }
  } catch (const DomainError& e) {
    throw ParseError(e.what());
  }
  if (!r.reference && !r.constraint) throw ParseError("record needs a 'reference' or a length constraint");
  return r;
}

inline nlohmann::ordered_json to_json(const BenchmarkRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  if (r.reference) j["reference"] = *r.reference;
  if (r.constraint) {
    if (r.constraint->is_exact()) {
      j["target_words"] = r.constraint->target();
    } else {
      j["min_words"] = r.constraint->min;
      j["max_words"] = r.constraint->max;
    }
  }
  j["language"] = language_code(r.language);
  return j;
}

struct CorpusLineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct Corpus {
  std::vector<BenchmarkRecord> records;
  std::vector<CorpusLineError> errors;
};

/// Loads a JSONL corpus; blank lines are skipped, bad lines are collected.
inline Corpus parse_corpus(std::istream& in) {
  Corpus c;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      c.records.push_back(parse_record(line));
    } catch (const ParseError& e) {
      c.errors.push_back({n, e.what()});
    }
  }
  return c;
}

inline Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus '" + path.string() + "'");
  return parse_corpus(in);
}

inline std::string emit_corpus(const std::vector<BenchmarkRecord>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

struct DerivedConstraint {
  LengthConstraint constraint;
  std::string provenance;  // "explicit" or "derived-from-reference"
};

/// The record's own constraint if present, otherwise Exact(units of the reference).
inline DerivedConstraint derive_constraint(const BenchmarkRecord& r, SegmentationRule rule) {
  if (r.constraint) return {*r.constraint, "explicit"};
  if (!r.reference) throw DomainError("record '" + r.id + "' has neither constraint nor reference");
  const auto n = static_cast<std::int64_t>(count_units(*r.reference, rule));
  if (n < 1) throw DomainError("reference of record '" + r.id + "' has no units");
  return {LengthConstraint::exact(n), "derived-from-reference"};
}

enum class EvalMethod : std::uint8_t { MarkerGen, Implicit };

struct EvalRunConfig {
  EvalMethod method = EvalMethod::MarkerGen;
  int k = 1;  // Implicit only
  PipelineConfig pipeline;
  std::string backend_profile;
  std::uint64_t seed = 0;
  int repetitions = 1;
  int parallelism = 1;
  /// Units of a named reference run, for the relative cost; 0 leaves it at 1.
  std::int64_t reference_units = 0;
  std::string reference_name;

  [[nodiscard]] std::string method_name() const {
    return method == EvalMethod::MarkerGen ? "markergen" : "implicit:" + std::to_string(k);
  }

  /// Parses "markergen" or "implicit:<k>" into method and k.
  void set_method(std::string_view text) {
    const std::string s(text);
    if (s == "markergen") {
      method = EvalMethod::MarkerGen;
      k = 1;
      return;
    }
    if (s.rfind("implicit:", 0) == 0) {
      int v = 0;
      try {
        std::size_t used = 0;
        v = std::stoi(s.substr(9), &used);
        if (used != s.size() - 9) v = 0;
      } catch (const std::exception&) {
        v = 0;
      }
      if (v >= 1) {
        method = EvalMethod::Implicit;
        k = v;
        return;
      }
    }
    throw DomainError("unknown method '" + s + "' (expected markergen or implicit:<k>)");
  }

  void validate() const {
    pipeline.validate();
    if (k < 1) throw DomainError("k must be >= 1");
    if (repetitions < 1) throw DomainError("repetitions must be >= 1");
    if (parallelism < 1) throw DomainError("parallelism must be >= 1");
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["method"] = method_name();
    j["schedule"] = pipeline.schedule.describe();
    j["marker_format"] = marker_kind_name(pipeline.format.kind);
    j["segmentation"] = pipeline.rule.name();
    j["T"] = pipeline.max_attempts;
    j["tolerance"] = pipeline.tolerance;
    j["temperature"] = pipeline.sampling.temperature;
    j["stop_sequences"] = pipeline.sampling.stop_sequences;
    j["draft_budget_factor"] = pipeline.draft_budget_factor;
    j["backend"] = backend_profile;
    j["seed"] = seed;
    j["repetitions"] = repetitions;
    j["parallelism"] = parallelism;
    if (reference_units > 0) {
      j["cost_reference"] = {{"name", reference_name}, {"units", reference_units}};
    }
    return j;
  }
};

struct EvalRow {
  std::string id;
  int repetition = 0;
  Language language = Language::English;
  LengthConstraint constraint;
  std::string provenance;
  bool failed = false;
  std::string error;
  std::int64_t n_true = 0;
  std::string status;
  std::size_t attempts = 0;
  std::int64_t units_generated = 0;
  std::int64_t backend_calls = 0;
  std::string text;

  /// E for Exact constraints.
  [[nodiscard]] std::optional<double> e() const {
    if (failed || !constraint.is_exact()) return std::nullopt;
    return lctg_error(n_true, constraint.target());
  }
  /// In-range flag for Range constraints.
  [[nodiscard]] std::optional<bool> in_range() const {
    if (failed || constraint.is_exact()) return std::nullopt;
    return n_true >= constraint.min && n_true <= constraint.max;
  }
};

struct EvalAggregates {
  std::size_t rows = 0;
  std::size_t failed = 0;
  std::size_t exact_rows = 0;
  std::optional<double> mean_e;
  std::size_t range_rows = 0;
  std::optional<double> e_r;
};

struct EvalReport {
  EvalRunConfig config;
  std::string model;
  std::vector<EvalRow> rows;  // sorted by id, then repetition
  EvalAggregates aggregates;
  CostLedger cost;
};

/// Aggregates recomputed from rows; the report uses exactly this.
inline EvalAggregates aggregate_rows(const std::vector<EvalRow>& rows) {
  EvalAggregates a;
  a.rows = rows.size();
  double e_sum = 0.0;
  std::size_t outside = 0;
  for (const auto& r : rows) {
    if (r.failed) {
      ++a.failed;
      continue;
    }
    if (auto e = r.e()) {
      ++a.exact_rows;
      e_sum += *e;
    } else if (auto in = r.in_range()) {
      ++a.range_rows;
      outside += *in ? 0 : 1;
    }
  }
  if (a.exact_rows) a.mean_e = e_sum / static_cast<double>(a.exact_rows);
  if (a.range_rows) a.e_r = static_cast<double>(outside) / static_cast<double>(a.range_rows);
  return a;
}

namespace bench_detail {

inline EvalRow run_item(const BenchmarkRecord& rec, int rep, const EvalRunConfig& cfg, Backend& backend) {
  EvalRow row;
  row.id = rec.id;
  row.repetition = rep;
  row.language = rec.language;
  PipelineConfig pc = cfg.pipeline;
  pc.rule = rule_for(rec.language, cfg.pipeline.rule);
  try {
    const auto derived = derive_constraint(rec, pc.rule);
    row.constraint = derived.constraint;
    row.provenance = derived.provenance;
    if (cfg.method == EvalMethod::MarkerGen) {
      auto r = run_markergen(rec.prompt, row.constraint, backend, pc);
      row.n_true = r.final.final_count;
      row.status = std::string(status_name(r.final.status));
      row.attempts = r.stages.rewrite_attempts.size();
      row.units_generated = r.cost.units_generated;
      row.backend_calls = r.cost.backend_calls;
      row.text = r.final.clean;
    } else {
      auto r = run_implicit_baseline(rec.prompt, row.constraint, cfg.k, backend, pc);
      const auto& best = r.best();
      row.n_true = best.answer.final_count;
      row.status = std::string(status_name(best.answer.status));
      row.attempts = r.candidates.size();
      row.units_generated = r.cost.units_generated;
      row.backend_calls = r.cost.backend_calls;
      row.text = best.answer.clean;
    }
  } catch (const Error& e) {
    row.failed = true;
    row.error = e.what();
  }
  return row;
}

}  // namespace bench_detail

/// Runs every record `repetitions` times on a bounded worker pool. Failures are
/// isolated per row. Rows are ordered by id and repetition.
inline EvalReport run_eval(const std::vector<BenchmarkRecord>& corpus, const EvalRunConfig& cfg, Backend& backend) {
  if (corpus.empty()) throw DomainError("corpus is empty");
  cfg.validate();
  std::vector<std::pair<std::size_t, int>> jobs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (int rep = 0; rep < cfg.repetitions; ++rep) jobs.emplace_back(i, rep);
  }
  std::vector<EvalRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      rows[j] = bench_detail::run_item(corpus[jobs[j].first], jobs[j].second, cfg, backend);
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), jobs.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  std::stable_sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
    return a.id != b.id ? a.id < b.id : a.repetition < b.repetition;
  });

  EvalReport report;
  report.config = cfg;
  report.model = backend.describe();
  report.rows = std::move(rows);
  report.aggregates = aggregate_rows(report.rows);
  for (const auto& r : report.rows) {
    report.cost.units_generated += r.units_generated;
    report.cost.backend_calls += r.backend_calls;
  }
  report.cost.relative_cost =
      cfg.reference_units > 0
          ? static_cast<double>(report.cost.units_generated) / static_cast<double>(cfg.reference_units)
          : 1.0;
  return report;
}

inline nlohmann::ordered_json report_json(const EvalReport& r, bool include_text = false) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchema;
  j["config"] = r.config.to_json();
  j["model"] = r.model;
  auto items = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json it;
    it["id"] = row.id;
    it["repetition"] = row.repetition;
    it["language"] = language_code(row.language);
    it["constraint"] = row.failed && row.provenance.empty() ? "" : row.constraint.describe();
    it["provenance"] = row.provenance;
    it["failed"] = row.failed;
    if (row.failed) {
      it["error"] = row.error;
    } else {
      it["N_true"] = row.n_true;
      if (auto e = row.e()) it["E"] = *e;
      if (auto in = row.in_range()) it["in_range"] = *in;
      it["status"] = row.status;
      it["attempts"] = row.attempts;
    }
    it["units_generated"] = row.units_generated;
    it["backend_calls"] = row.backend_calls;
    if (include_text && !row.failed) it["text"] = row.text;
    items.push_back(std::move(it));
  }
  j["items"] = std::move(items);
  nlohmann::ordered_json agg;
  agg["rows"] = r.aggregates.rows;
  agg["failed"] = r.aggregates.failed;
  agg["exact_rows"] = r.aggregates.exact_rows;
  agg["mean_E"] = r.aggregates.mean_e ? nlohmann::ordered_json(*r.aggregates.mean_e) : nlohmann::ordered_json();
  agg["range_rows"] = r.aggregates.range_rows;
  agg["E_r"] = r.aggregates.e_r ? nlohmann::ordered_json(*r.aggregates.e_r) : nlohmann::ordered_json();
  agg["S"] = nullptr;  // needs a judge model
  j["aggregates"] = std::move(agg);
  j["cost"] = {{"units_generated", r.cost.units_generated},
               {"backend_calls", r.cost.backend_calls},
               {"relative_cost", r.cost.relative_cost}};
  return j;
}

namespace bench_detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::setprecision(digits) << std::fixed << v;
  return ss.str();
}

}  // namespace bench_detail

/// One header line plus one line per row.
inline std::string report_csv(const EvalReport& r) {
  using bench_detail::csv_field;
  std::ostringstream out;
  out << "# schema=" << kReportSchema << "\n";
  out << "id,repetition,method,model,language,constraint,N_target,min,max,N_true,E,in_range,status,attempts,"
         "units_generated,backend_calls,failed,error\n";
  for (const auto& row : r.rows) {
    const bool exact = row.constraint.is_exact();
    out << csv_field(row.id) << ',' << row.repetition << ',' << r.config.method_name() << ',' << csv_field(r.model)
        << ',' << language_code(row.language) << ',' << (row.provenance.empty() ? "" : row.constraint.describe())
        << ',' << (exact && !row.provenance.empty() ? std::to_string(row.constraint.target()) : "") << ','
        << (!exact ? std::to_string(row.constraint.min) : "") << ',' << (!exact ? std::to_string(row.constraint.max) : "")
        << ',' << (row.failed ? "" : std::to_string(row.n_true)) << ','
        << (row.e() ? bench_detail::fixed(*row.e(), 17) : "") << ','
        << (row.in_range() ? (*row.in_range() ? "1" : "0") : "") << ',' << row.status << ','
        << (row.failed ? "" : std::to_string(row.attempts)) << ',' << row.units_generated << ',' << row.backend_calls
        << ',' << (row.failed ? 1 : 0) << ',' << csv_field(row.error) << '\n';
  }
  return out.str();
}

/// A summary row: E in percent, E_r in percent, S (blank without a judge), cost.
inline std::string report_markdown(const EvalReport& r) {
  auto pct = [](const std::optional<double>& v) { return v ? bench_detail::fixed(*v * 100.0, 2) : std::string(); };
  std::ostringstream out;
  out << "| Method | Model | E (%) | E_r (%) | S | Units | Calls | Relative cost |\n";
  out << "|---|---|---:|---:|---:|---:|---:|---:|\n";
  out << "| " << r.config.method_name() << " | " << r.model << " | " << pct(r.aggregates.mean_e) << " | "
      << pct(r.aggregates.e_r) << " |  | " << r.cost.units_generated << " | " << r.cost.backend_calls << " | "
      << bench_detail::fixed(r.cost.relative_cost, 2) << " |\n";
  return out.str();
}

}  // namespace lenctl
