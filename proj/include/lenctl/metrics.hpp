// Copyright 2026 The lenctl Authors
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Length-control error rates, their decomposition into identifying, counting,
/// planning and aligning shares, the range violation rate, and the
/// length-bias regression for judge scores.
///
/// Conventions: negative decomposed rates are floored at zero and flagged; a
/// zero-sum decomposition with non-zero E is reported as unattributed.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lenctl/error.hpp"

namespace lenctl {

namespace metrics_detail {

inline double relative(std::int64_t value, std::int64_t base, const char* what) {
  if (base <= 0) throw DomainError(std::string(what) + " must be >= 1");
  if (value < 0) throw DomainError("counts must be non-negative");
  return std::fabs(static_cast<double>(value - base)) / static_cast<double>(base);
}

}  // namespace metrics_detail

/// E = |N_true - N_target| / N_target.
inline double lctg_error(std::int64_t n_true, std::int64_t n_target) {
  return metrics_detail::relative(n_true, n_target, "N_target");
}

/// Identifying error before flooring: one-by-one count error minus the letter control rate.
inline double identifying_error_raw(std::int64_t n_pred_1, std::int64_t n_true, double control_rate) {
  return metrics_detail::relative(n_pred_1, n_true, "N_true") - control_rate;
}

inline double identifying_error(std::int64_t n_pred_1, std::int64_t n_true, double control_rate) {
  return std::max(0.0, identifying_error_raw(n_pred_1, n_true, control_rate));
}

/// e_IC^n = |N_pred^n - N_true| / N_true.
inline double identify_count_error(std::int64_t n_pred_n, std::int64_t n_true) {
  return metrics_detail::relative(n_pred_n, n_true, "N_true");
}

inline double counting_error_raw(std::int64_t n_pred_n, std::int64_t n_true, double e_i) {
  return identify_count_error(n_pred_n, n_true) - e_i;
}

inline double counting_error(std::int64_t n_pred_n, std::int64_t n_true, double e_i) {
  return std::max(0.0, counting_error_raw(n_pred_n, n_true, e_i));
}

inline double planning_error(std::int64_t n_plan, std::int64_t n_target) {
  return metrics_detail::relative(n_plan, n_target, "N_target");
}

inline double aligning_error(std::int64_t n_pred_n, std::int64_t n_target) {
  return metrics_detail::relative(n_pred_n, n_target, "N_target");
}

struct Contribution {
  double identifying = 0.0;
  double counting = 0.0;
  double planning = 0.0;
  double aligning = 0.0;
  /// Sum of the four shares.
  [[nodiscard]] double total() const { return identifying + counting + planning + aligning; }
};

/// Absolute contribution of each sub-error to E^n: e_i / sum(e) * E^n.
/// Throws DomainError when every rate is zero but E^n is not.
inline Contribution contributions(double e_i, double e_c, double e_p, double e_a, double e_n) {
  for (double v : {e_i, e_c, e_p, e_a, e_n}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("error rates must be finite and non-negative");
  }
  const double sum = e_i + e_c + e_p + e_a;
  if (sum == 0.0) {
    if (e_n == 0.0) return {};
    throw DomainError("unattributed error: all sub-error rates are zero but E > 0");
  }
  Contribution c;
  c.identifying = e_i / sum * e_n;
  c.counting = e_c / sum * e_n;
  c.planning = e_p / sum * e_n;
  // Assign the remainder so the shares sum to E^n up to one rounding step.
  c.aligning = e_n - (c.identifying + c.counting + c.planning);
  if (c.aligning < 0.0) c.aligning = 0.0;
  return c;
}

/// Fraction of counts outside [min, max].
inline double range_error_rate(const std::vector<std::int64_t>& counts, std::int64_t min, std::int64_t max) {
  if (min > max) throw DomainError("range needs min <= max");
  if (counts.empty()) throw DomainError("range error rate of an empty list");
  const auto outside = std::count_if(counts.begin(), counts.end(), [&](std::int64_t c) { return c < min || c > max; });
  return static_cast<double>(outside) / static_cast<double>(counts.size());
}

/// Probe measurements for one item. Interval key 0 stands for implicit counting.
struct ErrorInputs {
  std::int64_t n_true = 0;    // true unit count of the probed text
  std::int64_t n_target = 0;  // target length of the generation probes
  std::map<std::int64_t, std::int64_t> n_pred_by_interval;      // counting probes, N_pred^n
  std::map<std::int64_t, std::int64_t> perceived_by_interval;   // aligning probes, last declared count
  std::map<std::int64_t, std::int64_t> generated_by_interval;   // aligning probes, actual count
  std::optional<std::int64_t> n_plan;
  double control_error = 0.0;
};

struct ErrorReport {
  std::optional<double> e_i;
  std::map<std::int64_t, double> e_c;
  std::optional<double> e_p;
  std::map<std::int64_t, double> e_a;
  std::map<std::int64_t, double> e_n;  // E^n
  std::map<std::int64_t, Contribution> contributions;
  std::vector<std::int64_t> unattributed;  // intervals whose decomposition sums to zero with E^n > 0
  std::vector<std::string> flags;
};

namespace metrics_detail {

inline std::string interval_name(std::int64_t n) { return n == 0 ? "implicit" : std::to_string(n); }

inline void attribute(ErrorReport& r) {
  r.contributions.clear();
  r.unattributed.clear();
  for (const auto& [n, e_n] : r.e_n) {
    auto c = r.e_c.find(n);
    auto a = r.e_a.find(n);
    if (c == r.e_c.end() || a == r.e_a.end()) continue;
    const double e_i = r.e_i.value_or(0.0);
    const double e_p = r.e_p.value_or(0.0);
    if (e_i + c->second + e_p + a->second == 0.0 && e_n > 0.0) {
      r.unattributed.push_back(n);
      continue;
    }
    r.contributions[n] = contributions(e_i, c->second, e_p, a->second, e_n);
  }
}

}  // namespace metrics_detail

/// Computes every rate the inputs allow, then the per-interval contributions.
inline ErrorReport decompose(const ErrorInputs& in) {
  ErrorReport r;
  if (auto it = in.n_pred_by_interval.find(1); it != in.n_pred_by_interval.end()) {
    const double raw = identifying_error_raw(it->second, in.n_true, in.control_error);
    if (raw < 0.0) r.flags.push_back("e_I floored at 0 (raw " + std::to_string(raw) + ")");
    r.e_i = std::max(0.0, raw);
  }
  for (const auto& [n, pred] : in.n_pred_by_interval) {
    const double raw = counting_error_raw(pred, in.n_true, r.e_i.value_or(0.0));
    if (raw < 0.0) {
      r.flags.push_back("e_C^" + metrics_detail::interval_name(n) + " floored at 0 (raw " + std::to_string(raw) + ")");
    }
    r.e_c[n] = std::max(0.0, raw);
  }
  if (in.n_plan) r.e_p = planning_error(*in.n_plan, in.n_target);
  for (const auto& [n, perceived] : in.perceived_by_interval) r.e_a[n] = aligning_error(perceived, in.n_target);
  for (const auto& [n, generated] : in.generated_by_interval) r.e_n[n] = lctg_error(generated, in.n_target);
  metrics_detail::attribute(r);
  return r;
}

/// Per-key means of the rates over several items, with contributions recomputed
/// from the means so the closure still holds. Flags are concatenated.
inline ErrorReport mean_report(const std::vector<ErrorReport>& reports) {
  ErrorReport out;
  auto mean_map = [](const std::vector<const std::map<std::int64_t, double>*>& maps) {
    std::map<std::int64_t, std::pair<double, int>> acc;
    for (const auto* m : maps) {
      for (const auto& [k, v] : *m) {
        acc[k].first += v;
        acc[k].second += 1;
      }
    }
    std::map<std::int64_t, double> res;
    for (const auto& [k, s] : acc) res[k] = s.first / s.second;
    return res;
  };
  std::vector<const std::map<std::int64_t, double>*> ec, ea, en;
  double ei_sum = 0.0, ep_sum = 0.0;
  int ei_n = 0, ep_n = 0;
  for (const auto& r : reports) {
    ec.push_back(&r.e_c);
    ea.push_back(&r.e_a);
    en.push_back(&r.e_n);
    if (r.e_i) ei_sum += *r.e_i, ++ei_n;
    if (r.e_p) ep_sum += *r.e_p, ++ep_n;
    out.flags.insert(out.flags.end(), r.flags.begin(), r.flags.end());
  }
  if (ei_n) out.e_i = ei_sum / ei_n;
  if (ep_n) out.e_p = ep_sum / ep_n;
  out.e_c = mean_map(ec);
  out.e_a = mean_map(ea);
  out.e_n = mean_map(en);
  metrics_detail::attribute(out);
  return out;
}

/// One judged generation for the length-bias regression.
struct JudgedRecord {
  double score = 0.0;
  std::string method_id;
  std::string model_id;
  double length = 0.0;
};

struct BiasCorrection {
  std::vector<std::string> column_names;  // "intercept", "method=<id>", "model=<id>", "length"
  std::vector<double> coefficients;
  double beta_length = 0.0;
  std::vector<double> adjusted_scores;
  std::vector<double> residuals;
  /// True when the normal equations were too ill-conditioned and a pseudo-inverse was used.
  bool used_pseudo_inverse = false;
};

namespace metrics_detail {

inline std::vector<std::string> levels(const std::vector<JudgedRecord>& records, std::string JudgedRecord::*field) {
  std::vector<std::string> out;
  for (const auto& r : records) out.push_back(r.*field);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// First column (in order) that lies in the span of the columns before it.
inline std::optional<Eigen::Index> dependent_column(const Eigen::MatrixXd& x, double tol) {
  Eigen::MatrixXd basis(x.rows(), 0);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::VectorXd v = x.col(j);
    const double norm = v.norm();
    if (norm == 0.0) return j;
    v /= norm;
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < basis.cols(); ++k) v -= basis.col(k).dot(v) * basis.col(k);
    }
    const double rest = v.norm();
    if (rest <= tol) return j;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = v / rest;
  }
  return std::nullopt;
}

}  // namespace metrics_detail

/// OLS of score on intercept + method dummies + model dummies + length, with the
/// first level of each factor (sorted by id) as the baseline. Adjusted scores
/// remove the length effect: raw - beta_length * (length - reference_length).
inline BiasCorrection length_bias_correct(const std::vector<JudgedRecord>& records, double reference_length,
                                          double rank_tolerance = 1e-10) {
  const auto methods = metrics_detail::levels(records, &JudgedRecord::method_id);
  const auto models = metrics_detail::levels(records, &JudgedRecord::model_id);
  BiasCorrection out;
  out.column_names.push_back("intercept");
  for (std::size_t i = 1; i < methods.size(); ++i) out.column_names.push_back("method=" + methods[i]);
  for (std::size_t i = 1; i < models.size(); ++i) out.column_names.push_back("model=" + models[i]);
  out.column_names.push_back("length");
  const auto p = static_cast<Eigen::Index>(out.column_names.size());
  const auto n = static_cast<Eigen::Index>(records.size());
  if (n < p) {
    throw DomainError("length-bias regression needs at least " + std::to_string(p) + " records, got " +
                      std::to_string(n));
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (!std::isfinite(r.score) || !std::isfinite(r.length)) throw DomainError("non-finite score or length");
    x(i, 0) = 1.0;
    const auto mi = std::lower_bound(methods.begin(), methods.end(), r.method_id) - methods.begin();
    if (mi > 0) x(i, mi) = 1.0;
    const auto di = std::lower_bound(models.begin(), models.end(), r.model_id) - models.begin();
    if (di > 0) x(i, static_cast<Eigen::Index>(methods.size()) - 1 + di) = 1.0;
    x(i, p - 1) = r.length;
    y(i) = r.score;
  }
  if (auto col = metrics_detail::dependent_column(x, rank_tolerance)) {
    throw DomainError("length-bias design matrix is rank deficient at column '" +
                      out.column_names[static_cast<std::size_t>(*col)] + "'");
  }

  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::VectorXd xty = x.transpose() * y;
  Eigen::VectorXd beta;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  const double cond_guard = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  if (cond_guard > 1e-12) {
    beta = ldlt.solve(xty);
  } else {
    beta = x.completeOrthogonalDecomposition().pseudoInverse() * y;
    out.used_pseudo_inverse = true;
  }

  out.coefficients.assign(beta.data(), beta.data() + beta.size());
  out.beta_length = beta(p - 1);
  const Eigen::VectorXd resid = y - x * beta;
  out.residuals.assign(resid.data(), resid.data() + resid.size());
  for (const auto& r : records) out.adjusted_scores.push_back(r.score - out.beta_length * (r.length - reference_length));
  return out;
}

/// Extracts X from the last "###score X" in a judge reply; X must be 1-5.
inline int parse_judge_score(const std::string& reply) {
  static const std::regex re(R"(###\s*score\s*:?\s*(\d{1,6}))", std::regex::icase);
  std::optional<int> last;
  for (auto it = std::sregex_iterator(reply.begin(), reply.end(), re); it != std::sregex_iterator(); ++it) {
    last = std::stoi((*it)[1].str());
  }
  if (!last) throw ParseError("judge reply has no '###score X'");
  if (*last < 1 || *last > 5) throw ParseError("judge score " + std::to_string(*last) + " outside 1-5");
  return *last;
}

}  // namespace lenctl
