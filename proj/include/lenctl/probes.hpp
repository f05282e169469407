// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Sub-ability probes: count a given text one by one or every n units, count it
/// implicitly, count a letter-"A" control copy, plan a response, and generate
/// to a target while declaring the running length. Results feed metrics.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lenctl/backend.hpp"
#include "lenctl/error.hpp"
#include "lenctl/marker.hpp"
#include "lenctl/metrics.hpp"
#include "lenctl/segmenter.hpp"
#include "lenctl/templates.hpp"
#include "lenctl/unicode.hpp"

namespace lenctl {

enum class ProbeKind : std::uint8_t {
  IdentifyOneByOne,
  CountInterval,
  ImplicitCount,
  LetterControl,
  PlanProbe,
  AlignInterval,
};

struct ProbeSpec {
  ProbeKind kind = ProbeKind::IdentifyOneByOne;
  std::int64_t n = 1;  // interval; ignored by ImplicitCount and PlanProbe
  SegmentationRule rule = SegmentationRule::words();

  static ProbeSpec identify() { return {ProbeKind::IdentifyOneByOne, 1, {}}; }
  static ProbeSpec count(std::int64_t n) { return checked({ProbeKind::CountInterval, n, {}}); }
  static ProbeSpec implicit() { return {ProbeKind::ImplicitCount, 0, {}}; }
  static ProbeSpec control(std::int64_t n) { return checked({ProbeKind::LetterControl, n, {}}); }
  static ProbeSpec plan() { return {ProbeKind::PlanProbe, 0, {}}; }
  static ProbeSpec align(std::int64_t n) { return checked({ProbeKind::AlignInterval, n, {}}); }

  /// Interval key used in ErrorInputs; implicit counting is 0.
  [[nodiscard]] std::int64_t interval() const {
    switch (kind) {
      case ProbeKind::IdentifyOneByOne: return 1;
      case ProbeKind::ImplicitCount:
      case ProbeKind::PlanProbe: return 0;
      default: return n;
    }
  }

  [[nodiscard]] bool generates() const { return kind == ProbeKind::PlanProbe || kind == ProbeKind::AlignInterval; }

  [[nodiscard]] std::string describe() const {
    switch (kind) {
      case ProbeKind::IdentifyOneByOne: return "identify";
      case ProbeKind::CountInterval: return "count:" + std::to_string(n);
      case ProbeKind::ImplicitCount: return "implicit";
      case ProbeKind::LetterControl: return "control:" + std::to_string(n);
      case ProbeKind::PlanProbe: return "plan";
      case ProbeKind::AlignInterval: return "align:" + std::to_string(n);
    }
    return "?";
  }

  /// Inverse of describe().
  static ProbeSpec parse(std::string_view text) {
    const std::string s(text);
    if (s == "identify") return identify();
    if (s == "implicit") return implicit();
    if (s == "plan") return plan();
    const auto colon = s.find(':');
    if (colon != std::string::npos) {
      const std::string head = s.substr(0, colon);
      std::int64_t n = 0;
      try {
        std::size_t used = 0;
        n = std::stoll(s.substr(colon + 1), &used);
        if (used != s.size() - colon - 1) n = 0;
      } catch (const std::exception&) {
        n = 0;
      }
      if (n >= 1) {
        if (head == "count") return count(n);
        if (head == "control") return control(n);
        if (head == "align") return align(n);
      }
    }
    throw DomainError("unknown probe spec '" + s + "'");
  }

 private:
  static ProbeSpec checked(ProbeSpec s) {
    if (s.n < 1) throw DomainError("probe interval must be >= 1");
    return s;
  }
};

/// Replaces every whitespace-delimited word with "A", keeping punctuation that
/// leads or trails the word. Tokens without letters or digits are kept as-is.
inline std::string letter_control_text(std::string_view text) {
  struct Cp {
    unicode::CharClass cls;
    std::size_t begin;
    std::size_t end;
  };
  std::vector<Cp> cps;
  unicode::Utf8Decoder dec;
  unicode::Utf8Decoder::Decoded d{};
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    bool refeed = false;
    if (!dec.push(static_cast<unsigned char>(text[i]), d, refeed)) continue;
    const std::size_t end = refeed ? i : i + 1;
    cps.push_back({unicode::classify(d.cp), start, end});
    start = end;
    if (refeed) --i;
  }
  if (start < text.size()) cps.push_back({unicode::CharClass::Symbol, start, text.size()});

  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < cps.size();) {
    std::size_t j = i;
    const bool space = cps[i].cls == unicode::CharClass::Whitespace;
    while (j < cps.size() && (cps[j].cls == unicode::CharClass::Whitespace) == space) ++j;
    const std::size_t tb = cps[i].begin;
    const std::size_t te = cps[j - 1].end;
    std::size_t first = j;
    std::size_t last = i;
    for (std::size_t k = i; k < j && !space; ++k) {
      if (cps[k].cls == unicode::CharClass::Word || cps[k].cls == unicode::CharClass::Cjk) {
        if (first == j) first = k;
        last = k;
      }
    }
    if (space || first == j) {
      out.append(text.substr(tb, te - tb));
    } else {
      out.append(text.substr(tb, cps[first].begin - tb));
      out += 'A';
      out.append(text.substr(cps[last].end, te - cps[last].end));
    }
    i = j;
  }
  return out;
}

/// The user turn for one probe. `text` is the passage to count, or the query
/// for plan and align probes; `target` is their target length.
inline std::vector<Message> build_probe_prompt(const ProbeSpec& spec, std::string_view text, std::int64_t target = 0,
                                               const PromptTemplateSet& templates = {}) {
  if (text.empty()) throw DomainError("probe text must be non-empty");
  std::string content;
  const std::string t(text);
  switch (spec.kind) {
    case ProbeKind::IdentifyOneByOne:
    case ProbeKind::CountInterval:
      content = render_template(templates.probe_count, {{"n", std::to_string(spec.interval())}, {"text", t}});
      break;
    case ProbeKind::LetterControl:
      content = render_template(templates.probe_count,
                                {{"n", std::to_string(spec.n)}, {"text", letter_control_text(text)}});
      break;
    case ProbeKind::ImplicitCount:
      content = render_template(templates.probe_implicit, {{"text", t}});
      break;
    case ProbeKind::PlanProbe:
      if (target < 1) throw DomainError("plan probe needs a target >= 1");
      content = render_template(templates.stage1, {{"target_length", std::to_string(target)}, {"prompt", t}});
      break;
    case ProbeKind::AlignInterval:
      if (target < 1) throw DomainError("align probe needs a target >= 1");
      content = render_template(templates.probe_align,
                                {{"target_length", std::to_string(target)}, {"n", std::to_string(spec.n)}, {"prompt", t}});
      break;
  }
  return {{"user", std::move(content)}};
}

/// Declared count of the last well-formed marker in `raw`.
inline std::int64_t parse_probe_output(std::string_view raw, const MarkerFormat& format = {}) {
  if (raw.empty()) throw ParseError("empty probe output");
  const auto stripped = strip(raw, format);
  if (stripped.occurrences.empty()) throw ParseError("probe output has no length marker");
  return stripped.occurrences.back().declared_count;
}

/// Last standalone integer in `raw`; thousands separators are accepted.
inline std::int64_t parse_implicit_count(std::string_view raw) {
  static const std::regex re(R"((^|[^\w.])(\d{1,3}(?:,\d{3})+|\d{1,15})(?![\w]))");
  const std::string s(raw);
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) last = (*it)[2].str();
  if (!last) throw ParseError("probe output has no integer");
  last->erase(std::remove(last->begin(), last->end(), ','), last->end());
  return std::stoll(*last);
}

/// Total words allocated by a plan: the "Total: T words" line if present,
/// otherwise the sum of "(k words)" allocations.
inline std::int64_t parse_plan_total(std::string_view plan) {
  const std::string s(plan);
  static const std::regex total_re(R"(total[^0-9\n]{0,40}?(\d{1,9})\s*words?)", std::regex::icase);
  static const std::regex alloc_re(R"((\d{1,9})\s*words?)", std::regex::icase);
  std::optional<std::int64_t> total;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), total_re); it != std::sregex_iterator(); ++it) {
    total = std::stoll((*it)[1].str());
  }
  if (total) return *total;
  std::int64_t sum = 0;
  bool any = false;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), alloc_re); it != std::sregex_iterator(); ++it) {
    sum += std::stoll((*it)[1].str());
    any = true;
  }
  if (!any) throw ParseError("plan has no word allocation");
  return sum;
}

/// Runs one request to completion and returns the text, sentinel excluded.
/// Throws BackendError on a stream error or when `max_bytes` is exceeded.
inline std::string collect_completion(Backend& backend, const std::vector<Message>& context,
                                      const SamplingParams& sampling = {}, std::size_t max_bytes = 1 << 20) {
  GenerationRequest req;
  req.context = context;
  req.sampling = sampling;
  if (std::find(req.sampling.stop_sequences.begin(), req.sampling.stop_sequences.end(), kDefaultSentinel) ==
      req.sampling.stop_sequences.end()) {
    req.sampling.stop_sequences.emplace_back(kDefaultSentinel);
  }
  auto stream = backend.generate_stream(req);
  StopScanner scanner(req.sampling.stop_sequences);
  std::string out;
  for (;;) {
    StreamEvent ev = stream->next();
    if (ev.kind == StreamEventKind::BackendError) throw BackendError(ev.text);
    if (ev.kind == StreamEventKind::Done) break;
    if (scanner.feed(ev.text, out)) {
      stream->cancel();
      return out;
    }
    if (out.size() > max_bytes) {
      stream->cancel();
      throw BackendError("completion exceeded " + std::to_string(max_bytes) + " bytes");
    }
  }
  scanner.finish(out);
  return out;
}

/// Scores a plan with a judge model, 1-5.
inline int judge_plan(const std::string& query, const std::string& plan, Backend& judge,
                      const PromptTemplateSet& templates = {}, const SamplingParams& sampling = {}) {
  const std::string prompt = render_template(templates.plan_judge, {{"prompt", query}, {"plan", plan}});
  SamplingParams s = sampling;
  s.stop_sequences.clear();  // the judge reply ends after the score, no sentinel
  return parse_judge_score(collect_completion(judge, {{"user", prompt}}, s));
}

/// One item of a probe corpus.
struct ProbeItem {
  std::string id;
  std::string text;    // passage for counting probes
  std::string query;   // question for plan and align probes; falls back to text
  std::int64_t target = 0;  // 0: the passage's own unit count
};

struct ProbeRow {
  std::string item_id;
  std::string spec;
  std::int64_t n_true = 0;
  std::optional<std::int64_t> n_pred;
  std::optional<std::int64_t> n_generated;  // align probes: units actually written
  bool failed = false;
  std::string error;
};

struct ProbeSuiteOptions {
  int parallelism = 1;
  double max_failure_fraction = 0.2;
  SamplingParams sampling;
  PromptTemplateSet templates;
  MarkerFormat format;
};

struct ProbeSuiteResult {
  std::vector<ProbeRow> rows;  // item order, then spec order
  std::vector<std::pair<std::string, ErrorInputs>> inputs;
  std::vector<ErrorReport> reports;
  ErrorReport aggregate;
  std::size_t failures = 0;
};

/// Raised when too many probes fail to parse for the means to be trusted.
class ProbeSuiteAborted : public Error {
 public:
  using Error::Error;
};

namespace probes_detail {

inline ProbeRow run_one(const ProbeItem& item, const ProbeSpec& spec, Backend& backend, const ProbeSuiteOptions& opt) {
  ProbeRow row;
  row.item_id = item.id;
  row.spec = spec.describe();
  const std::int64_t passage_units = static_cast<std::int64_t>(count_units(item.text, spec.rule));
  const std::int64_t target = item.target > 0 ? item.target : passage_units;
  const std::string& query = item.query.empty() ? item.text : item.query;
  try {
    switch (spec.kind) {
      case ProbeKind::IdentifyOneByOne:
      case ProbeKind::CountInterval: {
        row.n_true = passage_units;
        const auto out = collect_completion(backend, build_probe_prompt(spec, item.text, 0, opt.templates), opt.sampling);
        row.n_pred = parse_probe_output(out, opt.format);
        break;
      }
      case ProbeKind::LetterControl: {
        row.n_true = static_cast<std::int64_t>(count_units(letter_control_text(item.text), spec.rule));
        const auto out = collect_completion(backend, build_probe_prompt(spec, item.text, 0, opt.templates), opt.sampling);
        row.n_pred = parse_probe_output(out, opt.format);
        break;
      }
      case ProbeKind::ImplicitCount: {
        row.n_true = passage_units;
        const auto out = collect_completion(backend, build_probe_prompt(spec, item.text, 0, opt.templates), opt.sampling);
        row.n_pred = parse_implicit_count(out);
        break;
      }
      case ProbeKind::PlanProbe: {
        row.n_true = target;
        const auto out = collect_completion(backend, build_probe_prompt(spec, query, target, opt.templates), opt.sampling);
        row.n_pred = parse_plan_total(out);
        break;
      }
      case ProbeKind::AlignInterval: {
        row.n_true = target;
        const auto out = collect_completion(backend, build_probe_prompt(spec, query, target, opt.templates), opt.sampling);
        row.n_pred = parse_probe_output(out, opt.format);
        row.n_generated = static_cast<std::int64_t>(count_units(strip(out, opt.format).clean, spec.rule));
        break;
      }
    }
    if (row.n_true < 1) throw DomainError("probe text has no units");
  } catch (const Error& e) {
    row.failed = true;
    row.n_pred.reset();
    row.n_generated.reset();
    row.error = e.what();
  }
  return row;
}

/// Folds one item's rows into ErrorInputs.
inline ErrorInputs assemble(const std::vector<ProbeRow>& rows, const std::vector<ProbeSpec>& specs,
                            std::int64_t passage_units, std::int64_t target) {
  ErrorInputs in;
  in.n_true = passage_units;
  in.n_target = target;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.failed || !r.n_pred) continue;
    const auto& s = specs[i];
    switch (s.kind) {
      case ProbeKind::IdentifyOneByOne:
      case ProbeKind::CountInterval:
      case ProbeKind::ImplicitCount: in.n_pred_by_interval[s.interval()] = *r.n_pred; break;
      case ProbeKind::LetterControl:
        // Only the one-by-one control is subtracted from e_I.
        if (s.n == 1) in.control_error = identify_count_error(*r.n_pred, r.n_true);
        break;
      case ProbeKind::PlanProbe: in.n_plan = *r.n_pred; break;
      case ProbeKind::AlignInterval:
        in.perceived_by_interval[s.n] = *r.n_pred;
        in.generated_by_interval[s.n] = *r.n_generated;
        break;
    }
  }
  return in;
}

}  // namespace probes_detail

/// Runs every spec on every item. Items run concurrently up to
/// `opt.parallelism`; results are assembled in item order. A failed probe is
/// recorded and excluded; more than `max_failure_fraction` failures abort.
inline ProbeSuiteResult run_probe_suite(const std::vector<ProbeItem>& items, const std::vector<ProbeSpec>& specs,
                                        Backend& backend, const ProbeSuiteOptions& opt = {}) {
  if (items.empty()) throw DomainError("probe corpus is empty");
  if (specs.empty()) throw DomainError("no probe specs");
  std::vector<std::vector<ProbeRow>> per_item(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      for (const auto& s : specs) per_item[i].push_back(probes_detail::run_one(items[i], s, backend, opt));
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp(opt.parallelism, 1, 64));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, items.size()); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ProbeSuiteResult out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    const auto passage = static_cast<std::int64_t>(count_units(item.text, specs.front().rule));
    const std::int64_t target = item.target > 0 ? item.target : passage;
    for (const auto& r : per_item[i]) out.failures += r.failed ? 1 : 0;
    out.rows.insert(out.rows.end(), per_item[i].begin(), per_item[i].end());
    if (passage < 1 || target < 1) continue;
    ErrorInputs in = probes_detail::assemble(per_item[i], specs, passage, target);
    out.reports.push_back(decompose(in));
    out.inputs.emplace_back(item.id, std::move(in));
  }
  const double fraction = static_cast<double>(out.failures) / static_cast<double>(out.rows.size());
  if (fraction > opt.max_failure_fraction) {
    std::string first;
    for (const auto& r : out.rows) {
      if (r.failed) {
        first = r.item_id + " " + r.spec + ": " + r.error;
        break;
      }
    }
    throw ProbeSuiteAborted(std::to_string(out.failures) + " of " + std::to_string(out.rows.size()) +
                            " probes failed, above the abort threshold; first failure: " + first);
  }
  out.aggregate = mean_report(out.reports);
  return out;
}

/// Probe rows as CSV: item_id,spec,N_true,N_pred,failed,N_generated.
inline std::string probe_rows_csv(const std::vector<ProbeRow>& rows) {
  std::ostringstream out;
  out << "item_id,spec,N_true,N_pred,failed,N_generated\n";
  for (const auto& r : rows) {
    std::string id = r.item_id;
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char c : id) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      id = q + "\"";
    }
    out << id << ',' << r.spec << ',' << r.n_true << ',' << (r.n_pred ? std::to_string(*r.n_pred) : "") << ','
        << (r.failed ? 1 : 0) << ',' << (r.n_generated ? std::to_string(*r.n_generated) : "") << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json error_inputs_json(const ErrorInputs& in) {
  auto int_map = [](const std::map<std::int64_t, std::int64_t>& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) j[metrics_detail::interval_name(k)] = v;
    return j;
  };
  nlohmann::ordered_json j;
  j["N_true"] = in.n_true;
  j["N_target"] = in.n_target;
  j["N_pred"] = int_map(in.n_pred_by_interval);
  j["perceived"] = int_map(in.perceived_by_interval);
  j["generated"] = int_map(in.generated_by_interval);
  j["N_plan"] = in.n_plan ? nlohmann::ordered_json(*in.n_plan) : nlohmann::ordered_json();
  j["control_error"] = in.control_error;
  return j;
}

inline nlohmann::ordered_json error_report_json(const ErrorReport& r) {
  auto rate_map = [](const std::map<std::int64_t, double>& m) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : m) j[metrics_detail::interval_name(k)] = v;
    return j;
  };
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["e_I"] = opt(r.e_i);
  j["e_C"] = rate_map(r.e_c);
  j["e_P"] = opt(r.e_p);
  j["e_A"] = rate_map(r.e_a);
  j["E"] = rate_map(r.e_n);
  nlohmann::ordered_json contrib = nlohmann::ordered_json::object();
  for (const auto& [n, c] : r.contributions) {
    contrib[metrics_detail::interval_name(n)] = {
        {"I", c.identifying}, {"C", c.counting}, {"P", c.planning}, {"A", c.aligning}};
  }
  j["contributions"] = std::move(contrib);
  nlohmann::ordered_json un = nlohmann::ordered_json::array();
  for (auto n : r.unattributed) un.push_back(metrics_detail::interval_name(n));
  j["unattributed"] = std::move(un);
  j["flags"] = r.flags;
  return j;
}

}  // namespace lenctl
