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

// Flexible-line configuration files.
//
// Line-oriented text; '#' starts a comment. Two statement kinds:
//
//   key = value
//   flex <from> <to> [kmin=<v>] [kmax=<v>] [circuit=<n>] [proportional=<bool>]
//
// Recognized keys: epsilon, wq, rank_threshold, pmax_flow_mw, scale_pgmax,
// zero_flex_resistance, zero_flex_charging, both_ends, default_kmin,
// default_kmax, compare_limits_mw (comma separated list of MW limits).
// See docs/file-formats.md for the full grammar.

#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "flexopf/modifications.hpp"
#include "flexopf/network.hpp"

namespace flexopf {

struct FlexLineRequest {
  int from = 0;
  int to = 0;
  int circuit = 1;  // selects among parallel branches, 1-based in file order
  double k_min = 0.8;
  double k_max = 3.0;
  bool proportional = false;
  bool merge = false;  // collapse all parallel circuits into one flexible line

  bool operator==(const FlexLineRequest&) const = default;
};

struct FlexConfig {
  std::vector<FlexLineRequest> lines;
  double epsilon = 0.04;
  double wq = 0.2;
  double wq_scale = 100.0;  // the penalty is wq * wq_scale $/h per MVAr
  bool conventional_original_resistance = true;
  double rank_threshold = 1e-5;
  std::optional<double> pmax_flow_mw;
  std::optional<double> scale_pgmax;
  bool zero_flex_resistance = false;
  bool zero_flex_charging = false;
  bool both_ends = false;
  std::vector<double> compare_limits_mw;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ParseError(fmt::format("line {}: expected a boolean, found '{}'", line, v));
}

inline double parse_real(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("line {}: expected a number, found '{}'", line, v));
  }
}

inline int parse_int(const std::string& v, int line) {
  const double d = parse_real(v, line);
  if (d != static_cast<int>(d)) throw ParseError(fmt::format("line {}: expected an integer, found '{}'", line, v));
  return static_cast<int>(d);
}

}  // namespace detail

inline FlexConfig parse_flex_config(std::string_view text) {
  FlexConfig cfg;
  double default_kmin = 0.8;
  double default_kmax = 3.0;
  struct Pending {
    FlexLineRequest req;
    bool has_kmin = false, has_kmax = false;
    int line = 0;
  };
  std::vector<Pending> pending;

  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;

    if (line.rfind("flex", 0) == 0 && (line.size() == 4 || std::isspace(static_cast<unsigned char>(line[4])))) {
      std::istringstream ls(line.substr(4));
      std::vector<std::string> toks;
      for (std::string t; ls >> t;) toks.push_back(t);
      if (toks.size() < 2) throw ParseError(fmt::format("line {}: flex needs two bus ids", lineno));
      Pending p;
      p.line = lineno;
      p.req.from = detail::parse_int(toks[0], lineno);
      p.req.to = detail::parse_int(toks[1], lineno);
      for (std::size_t t = 2; t < toks.size(); ++t) {
        const auto eq = toks[t].find('=');
        if (eq == std::string::npos) throw ParseError(fmt::format("line {}: expected key=value, found '{}'", lineno, toks[t]));
        const std::string k = toks[t].substr(0, eq), v = toks[t].substr(eq + 1);
        if (k == "kmin") {
          p.req.k_min = detail::parse_real(v, lineno);
          p.has_kmin = true;
        } else if (k == "kmax") {
          p.req.k_max = detail::parse_real(v, lineno);
          p.has_kmax = true;
        } else if (k == "circuit") {
          p.req.circuit = detail::parse_int(v, lineno);
          if (p.req.circuit < 1) throw ParseError(fmt::format("line {}: circuit must be >= 1", lineno));
        } else if (k == "proportional") {
          p.req.proportional = detail::parse_bool(v, lineno);
        } else if (k == "merge") {
          p.req.merge = detail::parse_bool(v, lineno);
        } else {
          throw ParseError(fmt::format("line {}: unknown flex attribute '{}'", lineno, k));
        }
      }
      pending.push_back(p);
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(fmt::format("line {}: expected 'key = value'", lineno));
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key == "epsilon") cfg.epsilon = detail::parse_real(val, lineno);
    else if (key == "wq") cfg.wq = detail::parse_real(val, lineno);
    else if (key == "wq_scale") cfg.wq_scale = detail::parse_real(val, lineno);
    else if (key == "conventional_original_resistance")
      cfg.conventional_original_resistance = detail::parse_bool(val, lineno);
    else if (key == "rank_threshold") cfg.rank_threshold = detail::parse_real(val, lineno);
    else if (key == "pmax_flow_mw") cfg.pmax_flow_mw = detail::parse_real(val, lineno);
    else if (key == "scale_pgmax") cfg.scale_pgmax = detail::parse_real(val, lineno);
    else if (key == "zero_flex_resistance") cfg.zero_flex_resistance = detail::parse_bool(val, lineno);
    else if (key == "zero_flex_charging") cfg.zero_flex_charging = detail::parse_bool(val, lineno);
    else if (key == "both_ends") cfg.both_ends = detail::parse_bool(val, lineno);
    else if (key == "default_kmin") default_kmin = detail::parse_real(val, lineno);
    else if (key == "default_kmax") default_kmax = detail::parse_real(val, lineno);
    else if (key == "compare_limits_mw") {
      std::string item;
      std::istringstream ls(val);
      while (std::getline(ls, item, ','))
        if (auto t = detail::trim(item); !t.empty()) cfg.compare_limits_mw.push_back(detail::parse_real(t, lineno));
    } else {
      throw ParseError(fmt::format("line {}: unknown key '{}'", lineno, key));
    }
  }

  if (!(cfg.epsilon > 0.0)) throw ParseError("epsilon must be positive");
  if (cfg.wq < 0.0) throw ParseError("wq must be nonnegative");
  if (!(cfg.wq_scale > 0.0)) throw ParseError("wq_scale must be positive");
  if (!(cfg.rank_threshold > 0.0)) throw ParseError("rank_threshold must be positive");

  for (auto& p : pending) {
    if (!p.has_kmin) p.req.k_min = default_kmin;
    if (!p.has_kmax) p.req.k_max = default_kmax;
    const auto& r = p.req;
    if (!(r.k_min > 0.0))
      throw ParseError(fmt::format("line {}: flex {}-{}: k_min must be positive", p.line, r.from, r.to));
    if (r.k_min > r.k_max)
      throw ParseError(fmt::format("line {}: flex {}-{}: k_min > k_max", p.line, r.from, r.to));
    if (r.merge && r.circuit != 1)
      throw ParseError(fmt::format("line {}: flex {}-{}: merge and circuit are exclusive", p.line, r.from, r.to));
    if (r.k_min > 1.0 || r.k_max < 1.0)
      throw ParseError(fmt::format("line {}: flex {}-{}: range [{}, {}] must contain 1", p.line, r.from,
                                   r.to, r.k_min, r.k_max));
    for (const auto& q : cfg.lines)
      if (((q.from == r.from && q.to == r.to) || (q.from == r.to && q.to == r.from)) && q.circuit == r.circuit)
        throw ParseError(fmt::format("line {}: flex {}-{} listed twice", p.line, r.from, r.to));
    cfg.lines.push_back(r);
  }
  return cfg;
}

inline FlexConfig read_flex_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open flex configuration '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_flex_config(ss.str());
}

/// Finds the branch a request refers to (either orientation, in service).
inline std::size_t find_flex_branch(const NetworkCase& c, const FlexLineRequest& r) {
  int seen = 0;
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    if (!br.in_service) continue;
    if ((br.from == r.from && br.to == r.to) || (br.from == r.to && br.to == r.from))
      if (++seen == r.circuit) return k;
  }
  throw ValidationError(fmt::format("flex line {}-{} (circuit {}) does not match any in-service branch",
                                    r.from, r.to, r.circuit));
}

/// Resolves requests against the case's branches. The rated admittance is
/// read from the branch as it stands in `c`.
inline std::vector<FlexLineSpec> bind_flex_lines(const NetworkCase& c, const std::vector<FlexLineRequest>& reqs) {
  std::vector<FlexLineSpec> out;
  for (const auto& r : reqs) {
    const std::size_t k = find_flex_branch(c, r);
    const auto& br = c.branches[k];
    if (br.tap != 1.0 || br.shift_deg != 0.0)
      throw ValidationError(fmt::format("flex line {}-{} is a transformer branch", r.from, r.to));
    if (br.series_g != 0.0 && !r.proportional)
      throw ValidationError(fmt::format(
          "flex line {}-{} has nonzero resistance; zero it or enable proportional mode", r.from, r.to));
    FlexLineSpec s;
    s.from = br.from;
    s.to = br.to;
    s.branch_index = k;
    s.b_rated = br.series_b;
    s.g_rated = r.proportional ? br.series_g : 0.0;
    s.k_min = r.k_min;
    s.k_max = r.k_max;
    out.push_back(s);
  }
  return out;
}

/// All in-service branches joining the request's endpoints, in file order.
inline std::vector<std::size_t> parallel_branches(const NetworkCase& c, const FlexLineRequest& r) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    const auto& br = c.branches[k];
    if (br.in_service && ((br.from == r.from && br.to == r.to) || (br.from == r.to && br.to == r.from)))
      out.push_back(k);
  }
  return out;
}

/// Modification set implied by the configuration's global options. With
/// `flexible` false the flex lines keep their original resistance and
/// charging if the configuration asks for that (conventional comparison).
inline CaseModifications modifications_from(const NetworkCase& c, const FlexConfig& cfg, bool flexible = true) {
  CaseModifications m;
  m.scale_p_max = cfg.scale_pgmax;
  if (cfg.pmax_flow_mw) m.flow_limit_pu = *cfg.pmax_flow_mw / c.base_mva;
  const bool touch = flexible || !cfg.conventional_original_resistance;
  for (const auto& r : cfg.lines) {
    std::size_t k;
    if (r.merge) {
      auto group = parallel_branches(c, r);
      if (group.empty()) (void)find_flex_branch(c, r);  // throws with the usual message
      k = group.front();
      m.merge_groups.push_back(std::move(group));
    } else {
      k = find_flex_branch(c, r);
    }
    if (touch && cfg.zero_flex_resistance) m.zero_resistance_branches.push_back(k);
    if (touch && cfg.zero_flex_charging) m.zero_charging_branches.push_back(k);
  }
  return m;
}

/// Applies the configured modifications and binds the flexible lines.
inline NetworkCase prepare_case(const NetworkCase& base, const FlexConfig& cfg) {
  NetworkCase c = apply_case_modifications(base, modifications_from(base, cfg));
  c.flex_lines = bind_flex_lines(c, cfg.lines);
  validate(c);
  return c;
}

/// The comparison case without flexible lines: same limits and merges, flex
/// branches held at their (optionally original) fixed admittance.
inline NetworkCase prepare_conventional_case(const NetworkCase& base, const FlexConfig& cfg) {
  NetworkCase c = apply_case_modifications(base, modifications_from(base, cfg, false));
  c.flex_lines.clear();
  validate(c);
  return c;
}

}  // namespace flexopf
