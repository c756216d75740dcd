// Copyright 2026 The flexopf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Result files (flat key = value) and the human-readable / DSV tables.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "flexopf/matpower.hpp"
#include "flexopf/pipeline.hpp"

namespace flexopf {

/// FNV-1a over the case's MATPOWER text and its flexible-line bindings.
/// Identifies the exact (modified) case a result belongs to.
inline std::string case_digest(const NetworkCase& c) {
  std::string text = write_matpower_case(c);
  for (const auto& f : c.flex_lines)
    text += fmt::format("flex {} {} {} {:.17g} {:.17g} {:.17g} {:.17g}\n", f.from, f.to, f.branch_index, f.b_rated,
                        f.g_rated, f.k_min, f.k_max);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return fmt::format("{:016x}", h);
}

/// How to rebuild the solved case from the original files.
struct ResultContext {
  std::string variant = "flexible";  // or "conventional"
  std::optional<double> pmax_flow_mw;
  double epsilon = 0.04;
  bool both_ends = false;
};

inline std::string g17(double v) { return fmt::format("{:.17g}", v); }

inline std::string write_result(const NetworkCase& c, const OPFResult& r, const ResultContext& ctx,
                                std::optional<double> gap = std::nullopt) {
  std::string out;
  const auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  kv("format", "flexopf-result 1");
  kv("case_name", c.name);
  kv("case_digest", case_digest(c));
  kv("variant", ctx.variant);
  kv("pmax_flow_mw", ctx.pmax_flow_mw ? g17(*ctx.pmax_flow_mw) : "none");
  kv("epsilon", g17(ctx.epsilon));
  kv("both_ends", ctx.both_ends ? "true" : "false");
  kv("label", r.label);
  kv("status", to_string(r.status));
  kv("wq", g17(r.wq));
  kv("cost", g17(r.objective.cost));
  kv("penalty", g17(r.objective.penalty));
  kv("lower_bound", g17(r.lower_bound));
  kv("iterations", std::to_string(r.iterations));
  kv("rel_gap", g17(r.rel_gap));
  kv("primal_residual", g17(r.primal_residual));
  kv("dual_residual", g17(r.dual_residual));
  kv("rank.declared", std::to_string(r.rank.declared_rank));
  kv("rank.ratio", g17(r.rank.ratio));
  kv("rank.threshold", g17(r.rank.threshold));
  for (std::size_t i = 0; i < r.rank.eigenvalues.size(); ++i) kv(fmt::format("rank.eig.{}", i + 1), g17(r.rank.eigenvalues[i]));
  if (gap) kv("gap_bound", g17(*gap));
  kv("recovered", r.recovered ? "true" : "false");
  kv("projected", r.projected ? "true" : "false");
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    kv(fmt::format("gen.{}.bus", g + 1), std::to_string(c.generators[g].bus));
    kv(fmt::format("gen.{}.p_pu", g + 1), g17(r.dispatch.p[g]));
    kv(fmt::format("gen.{}.q_pu", g + 1), g17(r.dispatch.q[g]));
  }
  for (std::size_t l = 0; l < c.flex_lines.size(); ++l) {
    const auto& f = c.flex_lines[l];
    kv(fmt::format("flex.{}.line", l + 1), fmt::format("{}-{}", f.from, f.to));
    kv(fmt::format("flex.{}.k", l + 1), g17(r.k[l].k));
    kv(fmt::format("flex.{}.k_from_j", l + 1), g17(r.k[l].k_from_j));
    kv(fmt::format("flex.{}.consistent", l + 1), r.k[l].consistent ? "true" : "false");
    kv(fmt::format("flex.{}.in_range", l + 1), r.k[l].in_range ? "true" : "false");
  }
  if (r.recovered) {
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
      kv(fmt::format("bus.{}.v_re", c.buses[i].id), g17(r.v[i].real()));
      kv(fmt::format("bus.{}.v_im", c.buses[i].id), g17(r.v[i].imag()));
    }
  }
  if (r.residuals) {
    kv("residual.max_abs", g17(r.residuals->max_abs));
    kv("residual.mean_abs", g17(r.residuals->mean_abs));
    kv("residual.max_abs_augmented", g17(r.residuals->max_abs_augmented));
    kv("residual.worst_limit", r.residuals->worst.name);
    kv("residual.worst_limit_slack", g17(r.residuals->worst.slack));
  }
  return out;
}

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ParseError(fmt::format("result line {}: expected 'key = value'", n));
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return kv;
}

/// The operating point stored in a result file.
struct StoredPoint {
  std::string digest;
  ResultContext context;
  std::vector<Complex> v;
  std::vector<double> p, q, k;
};

inline StoredPoint read_result_point(std::string_view text, const NetworkCase& c) {
  const KeyValues kv = parse_key_values(text);
  const auto get = [&](const std::string& k) -> const std::string& {
    const auto it = kv.find(k);
    if (it == kv.end()) throw ParseError(fmt::format("result file lacks key '{}'", k));
    return it->second;
  };
  const auto num = [&](const std::string& k) { return std::stod(get(k)); };
  if (get("format") != "flexopf-result 1") throw ParseError("not a flexopf result file");
  StoredPoint s;
  s.digest = get("case_digest");
  if (s.digest != case_digest(c))
    throw ValidationError(fmt::format("case digest mismatch: result {} vs case {}; refusing to validate", s.digest,
                                      case_digest(c)));
  s.context.variant = get("variant");
  if (get("pmax_flow_mw") != "none") s.context.pmax_flow_mw = num("pmax_flow_mw");
  s.context.epsilon = num("epsilon");
  s.context.both_ends = get("both_ends") == "true";
  if (get("recovered") != "true") throw ValidationError("result holds no recovered operating point (W was not rank one)");
  for (const auto& b : c.buses)
    s.v.emplace_back(num(fmt::format("bus.{}.v_re", b.id)), num(fmt::format("bus.{}.v_im", b.id)));
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    s.p.push_back(num(fmt::format("gen.{}.p_pu", g + 1)));
    s.q.push_back(num(fmt::format("gen.{}.q_pu", g + 1)));
  }
  for (std::size_t l = 0; l < c.flex_lines.size(); ++l) s.k.push_back(num(fmt::format("flex.{}.k", l + 1)));
  return s;
}

/// Context of a stored result without needing the case (used to rebuild it).
inline ResultContext read_result_context(std::string_view text) {
  const KeyValues kv = parse_key_values(text);
  ResultContext ctx;
  if (auto it = kv.find("variant"); it != kv.end()) ctx.variant = it->second;
  if (auto it = kv.find("pmax_flow_mw"); it != kv.end() && it->second != "none") ctx.pmax_flow_mw = std::stod(it->second);
  if (auto it = kv.find("epsilon"); it != kv.end()) ctx.epsilon = std::stod(it->second);
  if (auto it = kv.find("both_ends"); it != kv.end()) ctx.both_ends = it->second == "true";
  return ctx;
}

// ---------------------------------------------------------------------------
// Tables

inline std::string tuning_table(const NetworkCase& c, const OPFResult& r) {
  std::string out = "Optimal tuning of flexible lines\n";
  out += fmt::format("  {:<10} {:>14} {:>10}\n", "line", "b_rated (pu)", "k");
  for (std::size_t l = 0; l < c.flex_lines.size(); ++l) {
    const auto& f = c.flex_lines[l];
    out += fmt::format("  {:<10} {:>14.4f} {:>10.3f}{}\n", fmt::format("({},{})", f.from, f.to), -f.b_rated, r.k[l].k,
                       r.k[l].consistent && r.k[l].in_range ? "" : "  (flagged)");
  }
  return out;
}

inline std::string tuning_table_dsv(const NetworkCase& c, const OPFResult& r) {
  std::string out = "from,to,b_rated_pu,k,k_from_j,consistent,in_range\n";
  for (std::size_t l = 0; l < c.flex_lines.size(); ++l) {
    const auto& f = c.flex_lines[l];
    out += fmt::format("{},{},{:.10g},{:.10g},{:.10g},{},{}\n", f.from, f.to, -f.b_rated, r.k[l].k, r.k[l].k_from_j,
                       r.k[l].consistent, r.k[l].in_range);
  }
  return out;
}

inline std::string study_summary(const StudyResult& s) {
  std::string out;
  for (const OPFResult* r : {&s.relaxed, &s.penalized}) {
    out += fmt::format("{:<10} status {:<18} cost {:>12.2f} $/h  penalty {:>10.2f}  rank {} (lambda2/lambda1 {:.3e})\n",
                       r->label, to_string(r->status), r->objective.cost, r->objective.penalty, r->rank.declared_rank,
                       r->rank.ratio);
    if (r->residuals)
      out += fmt::format("{:<10} residual {:.3e} pu (augmented {:.3e}), worst limit slack {:.3e} ({})\n", "",
                         r->residuals->max_abs, r->residuals->max_abs_augmented, r->residuals->worst.slack,
                         r->residuals->worst.name);
  }
  if (s.gap)
    out += fmt::format("gap bound  {:.4f}{}\n", *s.gap, s.certified() ? "" : "  (penalized solve not rank one: no certificate)");
  return out;
}

inline std::string compare_table(const std::vector<CompareRow>& rows) {
  std::string out = "Generation cost ($/h)\n";
  out += fmt::format("  {:<14}", "");
  for (const auto& r : rows) out += fmt::format(" {:>16}", fmt::format("Pmax={} MW", r.limit_mw));
  out += "\n";
  const auto line = [&](const char* name, auto get) {
    out += fmt::format("  {:<14}", name);
    for (const auto& r : rows) out += fmt::format(" {:>16.2f}", get(r));
    out += "\n";
  };
  line("Conventional", [](const CompareRow& r) { return r.conventional.objective.cost; });
  line("Flexible", [](const CompareRow& r) { return r.flexible.objective.cost; });
  line("Saved cost", [](const CompareRow& r) { return r.saved(); });
  return out;
}

inline std::string compare_table_dsv(const std::vector<CompareRow>& rows) {
  std::string out = "limit_mw,conventional,flexible,saved,conventional_rank,flexible_rank\n";
  for (const auto& r : rows)
    out += fmt::format("{:.10g},{:.10g},{:.10g},{:.10g},{},{}\n", r.limit_mw, r.conventional.objective.cost,
                       r.flexible.objective.cost, r.saved(), r.conventional.rank.declared_rank,
                       r.flexible.rank.declared_rank);
  return out;
}

}  // namespace flexopf
