// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

// lenctl: length-controlled generation, evaluation and probing.
//
// Exit codes:
//   0   success (generate: the constraint was met)
//   1   generate: constraint missed after T attempts
//   2   backend failure or runtime error
//   64  usage error

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lenctl/lenctl.hpp"

namespace {

constexpr int kExitMiss = 1;
constexpr int kExitBackend = 2;
constexpr int kExitUsage = 64;

struct UsageError : lenctl::Error {
  using Error::Error;
};

struct Common {
  std::string backend = "mock:compliant";
  std::string model = "default";
  std::string api_key_env;
  int idle_timeout_ms = 60000;
  std::string schedule = "decaying";
  std::string format = "words";
  std::string segmentation = "words";
  int attempts = 3;
  double temperature = lenctl::kDefaultTemperature;
  double tolerance = 0.0;
  std::string templates_dir;
  int parallelism = 1;
};

lenctl::HttpBackendConfig http_config(const Common& c) {
  lenctl::HttpBackendConfig h;
  h.model = c.model;
  h.api_key_env = c.api_key_env;
  h.idle_timeout = std::chrono::milliseconds(c.idle_timeout_ms);
  return h;
}

lenctl::PipelineConfig pipeline_config(const Common& c) {
  lenctl::PipelineConfig p;
  p.schedule = lenctl::ScheduleSpec::parse(c.schedule);
  p.format = lenctl::MarkerFormat::with_kind(lenctl::marker_kind_from_name(c.format));
  p.rule = lenctl::SegmentationRule::from_name(c.segmentation);
  p.max_attempts = c.attempts;
  p.tolerance = c.tolerance;
  p.sampling.temperature = c.temperature;
  if (!c.templates_dir.empty()) p.templates = lenctl::PromptTemplateSet::load(c.templates_dir);
  p.validate();
  return p;
}

nlohmann::ordered_json common_json(const Common& c) {
  nlohmann::ordered_json j;
  j["backend"] = c.backend;
  j["model"] = c.model;
  j["api_key_env"] = c.api_key_env;
  j["idle_timeout_ms"] = c.idle_timeout_ms;
  j["schedule"] = c.schedule;
  j["marker_format"] = c.format;
  j["segmentation"] = c.segmentation;
  j["T"] = c.attempts;
  j["temperature"] = c.temperature;
  j["tolerance"] = c.tolerance;
  j["templates"] = c.templates_dir;
  j["parallelism"] = c.parallelism;
  return j;
}

std::uint64_t backend_seed(const std::string& uri) {
  if (!lenctl::is_mock_uri(uri)) return 0;
  return lenctl::parse_mock_uri(uri).front().seed;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw lenctl::Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw lenctl::Error("write to '" + path + "' failed");
}

std::string fixed4(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << v;
  return ss.str();
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string prompt;
  std::optional<std::int64_t> target;
  std::string range;
  std::string json_out;
  std::string transcript_out;
};

int cmd_generate(const Common& c, const GenerateArgs& a) {
  if (a.target.has_value() == !a.range.empty()) throw UsageError("generate needs exactly one of --target or --range");
  if (!a.range.empty() && a.range.find(':') == std::string::npos) throw UsageError("--range needs MIN:MAX");
  const lenctl::LengthConstraint constraint = a.target ? lenctl::LengthConstraint::exact(*a.target)
                                                       : lenctl::LengthConstraint::parse(a.range);
  const auto cfg = pipeline_config(c);
  auto backend = lenctl::open_backend(c.backend, http_config(c));

  lenctl::MarkerGenResult r;
  try {
    r = lenctl::run_markergen(a.prompt, constraint, *backend, cfg);
  } catch (const lenctl::PipelineError& e) {
    std::cerr << "lenctl: " << e.what() << "\n";
    return kExitBackend;
  }
  const std::int64_t count = r.final.final_count;
  const bool met = constraint.satisfied(count, cfg.tolerance);
  const double e = constraint.is_exact() ? lenctl::lctg_error(count, constraint.target()) : constraint.violation(count);

  if (!a.transcript_out.empty()) write_file(a.transcript_out, r.transcript.to_jsonl());
  if (!a.json_out.empty()) {
    nlohmann::ordered_json j;
    j["config"] = common_json(c);
    j["constraint"] = constraint.describe();
    j["count"] = count;
    j["E"] = e;
    j["met"] = met;
    j["status"] = lenctl::status_name(r.final.status);
    j["attempts"] = r.stages.rewrite_attempts.size();
    j["chosen"] = r.stages.chosen;
    j["plan"] = r.stages.plan;
    j["text"] = r.final.clean;
    j["raw"] = r.final.raw;
    j["cost"] = {{"units_generated", r.cost.units_generated}, {"backend_calls", r.cost.backend_calls}};
    write_file(a.json_out, j.dump(2) + "\n");
  }
  std::cout << r.final.clean << "\n";
  std::cout << "count=" << count << " target=" << constraint.describe() << " E=" << fixed4(e) << "\n";
  return met ? 0 : kExitMiss;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string corpus;
  std::string method = "markergen";
  int repetitions = 1;
  std::string json_out;
  std::string csv_out;
  std::string md_out;
  bool include_text = false;
  std::int64_t reference_units = 0;
  std::string reference_name;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  lenctl::EvalRunConfig cfg;
  try {
    cfg.set_method(a.method);
  } catch (const lenctl::DomainError& e) {
    throw UsageError(e.what());
  }
  cfg.pipeline = pipeline_config(c);
  cfg.backend_profile = c.backend;
  cfg.seed = backend_seed(c.backend);
  cfg.repetitions = a.repetitions;
  cfg.parallelism = c.parallelism;
  cfg.reference_units = a.reference_units;
  cfg.reference_name = a.reference_name;

  const auto corpus = lenctl::load_corpus(a.corpus);
  for (const auto& err : corpus.errors) {
    std::cerr << "lenctl: " << a.corpus << ":" << err.line << ": " << err.message << "\n";
  }
  if (corpus.records.empty()) throw lenctl::Error("corpus '" + a.corpus + "' has no valid records");
  auto backend = lenctl::open_backend(c.backend, http_config(c));
  const auto report = lenctl::run_eval(corpus.records, cfg, *backend);

  auto json = lenctl::report_json(report, a.include_text);
  json["cli"] = common_json(c);
  json["corpus"] = {{"path", a.corpus}, {"records", corpus.records.size()}, {"rejected_lines", corpus.errors.size()}};
  const std::string json_text = json.dump(2) + "\n";
  if (!a.json_out.empty()) write_file(a.json_out, json_text);
  if (!a.csv_out.empty()) write_file(a.csv_out, lenctl::report_csv(report));
  if (!a.md_out.empty()) write_file(a.md_out, lenctl::report_markdown(report));
  if (a.json_out.empty() && a.csv_out.empty() && a.md_out.empty()) std::cout << json_text;
  std::cerr << lenctl::report_markdown(report);
  return 0;
}

// ---- probe ------------------------------------------------------------------

struct ProbeArgs {
  std::string corpus;
  std::vector<std::int64_t> intervals{1, 4, 16, 64};
  std::vector<std::string> extra_specs;
  bool no_plan = false;
  bool no_align = false;
  std::string csv_out;
  std::string json_out;
};

int cmd_probe(const Common& c, const ProbeArgs& a) {
  std::vector<lenctl::ProbeSpec> specs;
  try {
    specs.push_back(lenctl::ProbeSpec::identify());
    specs.push_back(lenctl::ProbeSpec::control(1));
    specs.push_back(lenctl::ProbeSpec::implicit());
    for (auto n : a.intervals) {
      if (n < 1) throw lenctl::DomainError("intervals must be >= 1");
      if (n != 1) specs.push_back(lenctl::ProbeSpec::count(n));
    }
    if (!a.no_plan) specs.push_back(lenctl::ProbeSpec::plan());
    if (!a.no_align) {
      for (auto n : a.intervals) specs.push_back(lenctl::ProbeSpec::align(n));
    }
    for (const auto& s : a.extra_specs) specs.push_back(lenctl::ProbeSpec::parse(s));
  } catch (const lenctl::DomainError& e) {
    throw UsageError(e.what());
  }
  const auto rule = lenctl::SegmentationRule::from_name(c.segmentation);
  for (auto& s : specs) s.rule = rule;

  const auto corpus = lenctl::load_corpus(a.corpus);
  for (const auto& err : corpus.errors) {
    std::cerr << "lenctl: " << a.corpus << ":" << err.line << ": " << err.message << "\n";
  }
  std::vector<lenctl::ProbeItem> items;
  for (const auto& r : corpus.records) {
    lenctl::ProbeItem it;
    it.id = r.id;
    it.text = r.reference.value_or(r.prompt);
    it.query = r.prompt;
    if (r.constraint) it.target = r.constraint->target();
    items.push_back(std::move(it));
  }
  lenctl::ProbeSuiteOptions opt;
  opt.parallelism = c.parallelism;
  opt.sampling.temperature = c.temperature;
  opt.format = lenctl::MarkerFormat::with_kind(lenctl::marker_kind_from_name(c.format));
  if (!c.templates_dir.empty()) opt.templates = lenctl::PromptTemplateSet::load(c.templates_dir);

  auto backend = lenctl::open_backend(c.backend, http_config(c));
  const auto result = lenctl::run_probe_suite(items, specs, *backend, opt);

  nlohmann::ordered_json j;
  j["schema_version"] = "lenctl.probe/1";
  nlohmann::ordered_json config = common_json(c);
  config["intervals"] = a.intervals;
  nlohmann::ordered_json spec_names = nlohmann::ordered_json::array();
  for (const auto& s : specs) spec_names.push_back(s.describe());
  config["specs"] = std::move(spec_names);
  j["config"] = std::move(config);
  j["conventions"] = {"negative decomposed rates are floored at 0 and flagged",
                      "e_I subtracts the one-by-one letter-control rate",
                      "interval key 'implicit' is the implicit-count probe"};
  nlohmann::ordered_json per_item = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < result.inputs.size(); ++i) {
    per_item.push_back({{"id", result.inputs[i].first},
                        {"inputs", lenctl::error_inputs_json(result.inputs[i].second)},
                        {"report", lenctl::error_report_json(result.reports[i])}});
  }
  j["items"] = std::move(per_item);
  j["failures"] = result.failures;
  j["aggregate"] = lenctl::error_report_json(result.aggregate);
  const std::string text = j.dump(2) + "\n";
  if (!a.csv_out.empty()) write_file(a.csv_out, lenctl::probe_rows_csv(result.rows));
  if (!a.json_out.empty()) {
    write_file(a.json_out, text);
  } else {
    std::cout << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Length-controlled generation with injected length markers"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a TOML/INI file; flags override it");
  app.set_version_flag("--version", "lenctl 0.1.0");

  Common c;
  app.add_option("--backend", c.backend, "mock:<behavior>[=<n>][:<seed>] or an http(s) base URL")
      ->capture_default_str();
  app.add_option("--model", c.model, "Model name sent to an HTTP endpoint")->capture_default_str();
  app.add_option("--api-key-env", c.api_key_env, "Environment variable holding the bearer token");
  app.add_option("--idle-timeout-ms", c.idle_timeout_ms, "Stream idle timeout")->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--schedule", c.schedule, "decaying | uniform:<n> | none")->capture_default_str();
  app.add_option("--format", c.format, "Marker format: words | bare | remaining")->capture_default_str();
  app.add_option("--segmentation", c.segmentation, "Unit rule: words | whitespace | cjk")->capture_default_str();
  app.add_option("-T,--attempts", c.attempts, "Rewrite attempts")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--temperature", c.temperature, "Sampling temperature")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--tolerance", c.tolerance, "Relative tolerance for exact targets")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app.add_option("--templates", c.templates_dir, "Directory of prompt template overrides");
  app.add_option("-j,--parallelism", c.parallelism, "Concurrent items")->capture_default_str()
      ->check(CLI::PositiveNumber);

  GenerateArgs g;
  auto* gen = app.add_subcommand("generate", "Generate one response under a length constraint")->fallthrough();
  gen->add_option("prompt", g.prompt, "The query")->required();
  gen->add_option("--target", g.target, "Exact length in units");
  gen->add_option("--range", g.range, "Length range MIN:MAX");
  gen->add_option("--json-out", g.json_out, "Write the full result as JSON");
  gen->add_option("--transcript", g.transcript_out, "Write the decoding transcript as JSONL");

  EvalArgs e;
  auto* ev = app.add_subcommand("eval", "Evaluate a JSONL corpus")->fallthrough();
  ev->add_option("--corpus", e.corpus, "Corpus path (JSONL)")->required();
  ev->add_option("--method", e.method, "markergen | implicit:<k>")->capture_default_str();
  ev->add_option("--repetitions", e.repetitions, "Runs per item")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--json-out", e.json_out, "Report JSON path");
  ev->add_option("--csv-out", e.csv_out, "Per-item CSV path");
  ev->add_option("--md-out", e.md_out, "Markdown summary path");
  ev->add_flag("--include-text", e.include_text, "Include generated text in the JSON report");
  ev->add_option("--reference-units", e.reference_units, "Units of a reference run for the relative cost");
  ev->add_option("--reference-name", e.reference_name, "Name of that reference run");

  ProbeArgs p;
  auto* pr = app.add_subcommand("probe", "Run the sub-ability probes and decompose the error")->fallthrough();
  pr->add_option("--corpus", p.corpus, "Corpus path (JSONL)")->required();
  pr->add_option("--intervals", p.intervals, "Counting intervals")->delimiter(',')->capture_default_str();
  pr->add_option("--spec", p.extra_specs, "Extra probe spec, e.g. control:16");
  pr->add_flag("--no-plan", p.no_plan, "Skip the planning probe");
  pr->add_flag("--no-align", p.no_align, "Skip the aligning probes");
  pr->add_option("--csv-out", p.csv_out, "Probe rows CSV path");
  pr->add_option("--json-out", p.json_out, "Error report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& s) {
    return app.exit(s);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_generate(c, g);
    if (*ev) return cmd_eval(c, e);
    if (*pr) return cmd_probe(c, p);
  } catch (const UsageError& err) {
    std::cerr << "lenctl: " << err.what() << "\n";
    return kExitUsage;
  } catch (const lenctl::DomainError& err) {
    std::cerr << "lenctl: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "lenctl: " << err.what() << "\n";
    return kExitBackend;
  }
  return kExitUsage;
}
