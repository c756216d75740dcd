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

// Reader and writer for the subset of the MATPOWER case format used here:
// baseMVA, bus, gen, branch and (optional) polynomial gencost.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "flexopf/log.hpp"
#include "flexopf/network.hpp"

namespace flexopf {

namespace detail {

using Matrix = std::vector<std::vector<double>>;

inline std::string strip_matlab_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  bool in_string = false;
  for (char ch : text) {
    if (ch == '\n') {
      in_comment = false;
      in_string = false;
      out.push_back(ch);
      continue;
    }
    if (in_comment) continue;
    if (ch == '\'') in_string = !in_string;
    if (ch == '%' && !in_string) {
      in_comment = true;
      continue;
    }
    out.push_back(ch);
  }
  return out;
}

inline double parse_number(const std::string& tok, const std::string& where) {
  std::string t = tok;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(fmt::format("{}: cannot parse number '{}'", where, tok));
  }
}

/// Parses the body between '[' and ']' into rows.
inline Matrix parse_matrix_body(std::string_view body, const std::string& name) {
  Matrix rows;
  std::string cur;
  std::vector<std::string> toks;
  auto flush_tok = [&] {
    if (!cur.empty()) toks.push_back(std::move(cur));
    cur.clear();
  };
  auto flush_row = [&] {
    flush_tok();
    if (toks.empty()) return;
    std::vector<double> row;
    row.reserve(toks.size());
    for (const auto& t : toks)
      row.push_back(parse_number(t, fmt::format("{} row {}", name, rows.size() + 1)));
    rows.push_back(std::move(row));
    toks.clear();
  };
  bool continuation = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char ch = body[i];
    if (ch == '.' && body.substr(i, 3) == "...") {
      continuation = true;
      i += 2;
      continue;
    }
    if (ch == ';') {
      flush_row();
    } else if (ch == '\n' || ch == '\r') {
      if (!continuation) flush_row();
      flush_tok();
      continuation = false;
    } else if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',') {
      flush_tok();
    } else {
      cur.push_back(ch);
    }
  }
  flush_row();
  return rows;
}

struct MatpowerFields {
  std::optional<double> base_mva;
  std::map<std::string, Matrix> matrices;
  std::string name = "case";
};

inline MatpowerFields scan_matpower(std::string_view raw) {
  const std::string text = strip_matlab_comments(raw);
  MatpowerFields out;
  std::size_t pos = 0;
  // Function header gives the case name.
  if (auto f = text.find("function"); f != std::string::npos) {
    auto eq = text.find('=', f);
    auto nl = text.find('\n', f);
    if (eq != std::string::npos && eq < nl) {
      std::string nm = text.substr(eq + 1, nl - eq - 1);
      nm.erase(std::remove_if(nm.begin(), nm.end(), [](unsigned char c) { return std::isspace(c); }),
               nm.end());
      if (!nm.empty()) out.name = nm;
    }
  }
  while (true) {
    auto dot = text.find("mpc.", pos);
    if (dot == std::string::npos) break;
    std::size_t p = dot + 4;
    std::size_t e = p;
    while (e < text.size() && (std::isalnum(static_cast<unsigned char>(text[e])) || text[e] == '_')) ++e;
    const std::string field = text.substr(p, e - p);
    std::size_t eq = text.find_first_not_of(" \t", e);
    if (eq == std::string::npos || text[eq] != '=') {
      pos = e;
      continue;
    }
    std::size_t v = text.find_first_not_of(" \t\r\n", eq + 1);
    if (v == std::string::npos) break;
    if (text[v] == '[') {
      auto close = text.find(']', v);
      if (close == std::string::npos) throw ParseError(fmt::format("mpc.{}: unterminated matrix", field));
      out.matrices[field] = parse_matrix_body(std::string_view(text).substr(v + 1, close - v - 1), field);
      pos = close + 1;
    } else {
      auto semi = text.find_first_of(";\n", v);
      std::string val = text.substr(v, semi - v);
      while (!val.empty() && std::isspace(static_cast<unsigned char>(val.back()))) val.pop_back();
      if (field == "baseMVA") out.base_mva = parse_number(val, "baseMVA");
      pos = semi == std::string::npos ? text.size() : semi + 1;
    }
  }
  return out;
}

inline void require_columns(const Matrix& m, const std::string& name, std::size_t min_cols) {
  for (std::size_t r = 0; r < m.size(); ++r)
    if (m[r].size() < min_cols)
      throw ParseError(fmt::format("mpc.{} row {}: expected at least {} columns, found {}", name, r + 1,
                                   min_cols, m[r].size()));
}

}  // namespace detail

/// Parses MATPOWER case text into a validated per-unit NetworkCase.
inline NetworkCase parse_matpower_case(std::string_view text) {
  auto fields = detail::scan_matpower(text);
  if (!fields.base_mva) throw ParseError("missing mpc.baseMVA");
  for (const char* req : {"bus", "gen", "branch"})
    if (!fields.matrices.count(req)) throw ParseError(fmt::format("missing mpc.{} matrix", req));

  NetworkCase c;
  c.name = fields.name;
  c.base_mva = *fields.base_mva;
  const double base = c.base_mva;

  const auto& bus = fields.matrices["bus"];
  detail::require_columns(bus, "bus", 13);
  bool extra_columns = false;
  for (std::size_t r = 0; r < bus.size(); ++r) {
    const auto& row = bus[r];
    Bus b;
    b.id = static_cast<int>(row[0]);
    const int type = static_cast<int>(row[1]);
    if (type < 1 || type > 3)
      throw ParseError(fmt::format("mpc.bus row {}: unsupported bus type {}", r + 1, type));
    b.kind = static_cast<BusKind>(type);
    b.p_load = row[2] / base;
    b.q_load = row[3] / base;
    b.shunt_g = row[4] / base;
    b.shunt_b = row[5] / base;
    b.area = static_cast<int>(row[6]);
    b.vm = row[7];
    b.va_deg = row[8];
    b.base_kv = row[9];
    b.zone = static_cast<int>(row[10]);
    b.v_max = row[11];
    b.v_min = row[12];
    extra_columns |= row.size() > 13;
    c.buses.push_back(b);
  }

  const auto& gen = fields.matrices["gen"];
  detail::require_columns(gen, "gen", 10);
  for (const auto& row : gen) {
    Generator g;
    g.bus = static_cast<int>(row[0]);
    g.q_max = row[3] / base;
    g.q_min = row[4] / base;
    g.vg = row[5];
    g.in_service = row[7] > 0;
    g.p_max = row[8] / base;
    g.p_min = row[9] / base;
    extra_columns |= row.size() > 10;
    c.generators.push_back(g);
  }

  if (auto it = fields.matrices.find("gencost"); it != fields.matrices.end()) {
    const auto& gc = it->second;
    if (gc.size() < c.generators.size())
      throw ParseError(fmt::format("mpc.gencost has {} rows, expected at least {}", gc.size(),
                                   c.generators.size()));
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
      const auto& row = gc[g];
      if (row.size() < 4)
        throw ParseError(fmt::format("mpc.gencost row {}: expected at least 4 columns, found {}", g + 1,
                                     row.size()));
      if (static_cast<int>(row[0]) != 2)
        throw ParseError(fmt::format("mpc.gencost row {}: only polynomial (model 2) costs are supported", g + 1));
      const auto ncoef = static_cast<std::size_t>(row[3]);
      if (ncoef < 1 || ncoef > 3 || row.size() < 4 + ncoef)
        throw ParseError(fmt::format("mpc.gencost row {}: expected 1 to 3 polynomial coefficients, "
                                     "found {} columns",
                                     g + 1, row.size()));
      double coef[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
      for (std::size_t k = 0; k < ncoef; ++k) coef[3 - ncoef + k] = row[4 + k];
      c.generators[g].cost_c2 = coef[0];
      c.generators[g].cost_c1 = coef[1];
      c.generators[g].cost_c0 = coef[2];
    }
  }

  const auto& branch = fields.matrices["branch"];
  detail::require_columns(branch, "branch", 11);
  for (const auto& row : branch) {
    Branch br;
    br.from = static_cast<int>(row[0]);
    br.to = static_cast<int>(row[1]);
    br.set_impedance(row[2], row[3]);
    br.charging_b = row[4];
    br.p_flow_max = row[5] > 0.0 ? row[5] / base : kInf;
    br.tap = row[8] == 0.0 ? 1.0 : row[8];
    br.shift_deg = row[9];
    br.in_service = row[10] > 0;
    extra_columns |= row.size() > 11;
    c.branches.push_back(br);
  }

  if (extra_columns)
    logger().info("{}: ramp, area-control and angle-limit columns are ignored", c.name);

  validate(c);
  return c;
}

inline NetworkCase read_matpower_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(fmt::format("cannot open case file '{}'", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_matpower_case(ss.str());
}

/// Serializes a case back to MATPOWER text. Flexible-line designations are
/// not part of the format and are dropped.
inline std::string write_matpower_case(const NetworkCase& c) {
  const double base = c.base_mva;
  std::string out;
  auto num = [](double v) {
    if (std::isinf(v)) return std::string(v > 0 ? "Inf" : "-Inf");
    return fmt::format("{:.17g}", v);
  };
  out += fmt::format("function mpc = {}\nmpc.version = '2';\nmpc.baseMVA = {};\n\n", c.name, num(base));
  out += "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\nmpc.bus = [\n";
  for (const auto& b : c.buses)
    out += fmt::format("\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{};\n", b.id,
                       static_cast<int>(b.kind), num(b.p_load * base), num(b.q_load * base),
                       num(b.shunt_g * base), num(b.shunt_b * base), b.area, num(b.vm), num(b.va_deg),
                       num(b.base_kv), b.zone, num(b.v_max), num(b.v_min));
  out += "];\n\n%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\nmpc.gen = [\n";
  for (const auto& g : c.generators)
    out += fmt::format("\t{}\t0\t0\t{}\t{}\t{}\t{}\t{}\t{}\t{};\n", g.bus, num(g.q_max * base),
                       num(g.q_min * base), num(g.vg), num(base), g.in_service ? 1 : 0,
                       num(g.p_max * base), num(g.p_min * base));
  out += "];\n\n%% fbus tbus r x b rateA rateB rateC ratio angle status\nmpc.branch = [\n";
  for (const auto& br : c.branches)
    out += fmt::format("\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t{}\t{}\t{};\n", br.from, br.to,
                       num(br.resistance), num(br.reactance), num(br.charging_b),
                       std::isinf(br.p_flow_max) ? std::string("0") : num(br.p_flow_max * base),
                       br.tap == 1.0 ? std::string("0") : num(br.tap), num(br.shift_deg),
                       br.in_service ? 1 : 0);
  out += "];\n\n%% 2 startup shutdown n c2 c1 c0\nmpc.gencost = [\n";
  for (const auto& g : c.generators)
    out += fmt::format("\t2\t0\t0\t3\t{}\t{}\t{};\n", num(g.cost_c2), num(g.cost_c1), num(g.cost_c0));
  out += "];\n";
  return out;
}

}  // namespace flexopf
