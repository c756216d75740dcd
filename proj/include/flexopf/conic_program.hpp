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

// Standard-form conic programs over a product of PSD and nonnegative blocks,
// plus SDPA sparse-format serialization.
//
//   minimize    <C, X> + offset
//   subject to  <A_i, X> = b_i,   i = 1..m
//               X = diag(X_1, ..., X_K),  X_k PSD or elementwise >= 0
//
// Coefficient matrices are stored as upper-triangular entries of symmetric
// matrices (SDPA convention): an entry (r, c, v) with r < c sets both
// A_rc and A_cr to v, so it contributes 2 v X_rc to <A, X>.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "flexopf/network.hpp"

namespace flexopf {

enum class BlockKind { kPsd, kLinear };

struct BlockSpec {
  BlockKind kind = BlockKind::kPsd;
  std::size_t dim = 0;
  std::string name;
};

struct Entry {
  std::size_t block = 0;
  std::size_t row = 0;  // row <= col; row == col for linear blocks
  std::size_t col = 0;
  double value = 0.0;
};

struct ConstraintRow {
  std::vector<Entry> entries;
  double rhs = 0.0;
  std::string family;  // constraint family, used by the census
  std::string label;   // identifies the constraint instance
};

struct ConicProgram {
  std::vector<BlockSpec> blocks;
  std::vector<Entry> objective;
  double objective_offset = 0.0;
  std::vector<ConstraintRow> rows;

  std::size_t add_block(BlockKind kind, std::size_t dim, std::string name) {
    blocks.push_back({kind, dim, std::move(name)});
    return blocks.size() - 1;
  }
};

/// Block-diagonal primal/dual variable. Linear blocks are stored as
/// dim x 1 column vectors.
using BlockMatrix = std::vector<Eigen::MatrixXd>;

inline BlockMatrix zero_blocks(const ConicProgram& p) {
  BlockMatrix out;
  for (const auto& b : p.blocks)
    out.push_back(b.kind == BlockKind::kPsd ? Eigen::MatrixXd::Zero(b.dim, b.dim) : Eigen::MatrixXd::Zero(b.dim, 1));
  return out;
}

/// <A, X> for a list of upper-triangular entries.
inline double apply_entries(const std::vector<Entry>& entries, const BlockMatrix& x,
                            const std::vector<BlockSpec>& blocks) {
  double s = 0.0;
  for (const auto& e : entries) {
    if (blocks[e.block].kind == BlockKind::kLinear) s += e.value * x[e.block](e.row, 0);
    else if (e.row == e.col) s += e.value * x[e.block](e.row, e.row);
    else s += 2.0 * e.value * x[e.block](e.row, e.col);
  }
  return s;
}

/// Adds scale * A into a dense block-diagonal accumulator.
inline void accumulate_entries(const std::vector<Entry>& entries, double scale, BlockMatrix& out,
                               const std::vector<BlockSpec>& blocks) {
  for (const auto& e : entries) {
    if (blocks[e.block].kind == BlockKind::kLinear) {
      out[e.block](e.row, 0) += scale * e.value;
    } else {
      out[e.block](e.row, e.col) += scale * e.value;
      if (e.row != e.col) out[e.block](e.col, e.row) += scale * e.value;
    }
  }
}

inline double objective_of(const ConicProgram& p, const BlockMatrix& x) {
  return apply_entries(p.objective, x, p.blocks) + p.objective_offset;
}

/// Checks the structural invariants (entries in range, finite values).
inline void check_program(const ConicProgram& p) {
  auto check = [&](const Entry& e, const std::string& where) {
    if (e.block >= p.blocks.size()) throw ValidationError(fmt::format("{}: block {} out of range", where, e.block));
    const auto& b = p.blocks[e.block];
    if (e.row > e.col || e.col >= b.dim || (b.kind == BlockKind::kLinear && e.row != e.col))
      throw ValidationError(fmt::format("{}: entry ({}, {}) invalid for block '{}'", where, e.row, e.col, b.name));
    if (!std::isfinite(e.value)) throw ValidationError(fmt::format("{}: non-finite coefficient", where));
  };
  for (const auto& e : p.objective) check(e, "objective");
  for (const auto& r : p.rows) {
    for (const auto& e : r.entries) check(e, r.label);
    if (!std::isfinite(r.rhs)) throw ValidationError(fmt::format("{}: non-finite right-hand side", r.label));
  }
}

/// Writes the program in SDPA sparse format. The program is encoded as the
/// SDPA dual problem (max <F0, Y> s.t. <F_i, Y> = c_i, Y PSD) with F0 = -C,
/// F_i = A_i, c_i = b_i; the optimal SDPA objective is therefore the negated
/// optimum of `p` without its constant offset. Block order follows
/// `p.blocks`, linear blocks are written with negative size.
inline std::string write_sdpa(const ConicProgram& p) {
  std::string out;
  out += "\"flexopf conic program: F0 = -C, F_i = A_i, c = b\n";
  out += fmt::format("* objective_offset {:.17g}\n", p.objective_offset);
  out += fmt::format("{}\n{}\n", p.rows.size(), p.blocks.size());
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    out += fmt::format("{}{}", k ? " " : "", p.blocks[k].kind == BlockKind::kLinear
                                                 ? -static_cast<long>(p.blocks[k].dim)
                                                 : static_cast<long>(p.blocks[k].dim));
  out += "\n";
  for (std::size_t i = 0; i < p.rows.size(); ++i) out += fmt::format("{}{:.17g}", i ? " " : "", p.rows[i].rhs);
  out += "\n";
  auto emit = [&](std::size_t mat, const std::vector<Entry>& entries, double sign) {
    // Merge duplicates so the file holds one value per position.
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> merged;
    for (const auto& e : entries) merged[{e.block, e.row, e.col}] += sign * e.value;
    for (const auto& [key, v] : merged) {
      if (v == 0.0) continue;
      out += fmt::format("{} {} {} {} {:.17g}\n", mat, std::get<0>(key) + 1, std::get<1>(key) + 1,
                         std::get<2>(key) + 1, v);
    }
  };
  emit(0, p.objective, -1.0);
  for (std::size_t i = 0; i < p.rows.size(); ++i) emit(i + 1, p.rows[i].entries, 1.0);
  return out;
}

/// Reads an SDPA sparse file written under the convention of write_sdpa.
inline ConicProgram read_sdpa(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  ConicProgram p;
  std::vector<std::string> header;
  // Header lines: comments start with '"' or '*'.
  std::string body;
  while (std::getline(in, line)) {
    if (!line.empty() && (line[0] == '"' || line[0] == '*')) {
      if (line.rfind("* objective_offset", 0) == 0) p.objective_offset = std::stod(line.substr(18));
      continue;
    }
    for (char& ch : line)
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    body += line + "\n";
  }
  std::istringstream bs(body);
  long m = 0, nblocks = 0;
  if (!(bs >> m >> nblocks) || m < 0 || nblocks <= 0) throw ParseError("SDPA: bad header");
  for (long k = 0; k < nblocks; ++k) {
    long d = 0;
    if (!(bs >> d) || d == 0) throw ParseError("SDPA: bad block size");
    p.add_block(d < 0 ? BlockKind::kLinear : BlockKind::kPsd, static_cast<std::size_t>(std::labs(d)),
                fmt::format("block{}", k + 1));
  }
  p.rows.resize(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) {
    if (!(bs >> p.rows[i].rhs)) throw ParseError("SDPA: missing cost vector entry");
    p.rows[i].family = "sdpa";
    p.rows[i].label = fmt::format("row{}", i + 1);
  }
  long mat, blk, r, c;
  double v;
  while (bs >> mat >> blk >> r >> c >> v) {
    if (mat < 0 || mat > m || blk < 1 || blk > nblocks || r < 1 || c < 1)
      throw ParseError(fmt::format("SDPA: entry index out of range ({} {} {} {})", mat, blk, r, c));
    Entry e{static_cast<std::size_t>(blk - 1), static_cast<std::size_t>(std::min(r, c) - 1),
            static_cast<std::size_t>(std::max(r, c) - 1), v};
    if (mat == 0) {
      e.value = -v;
      p.objective.push_back(e);
    } else {
      p.rows[mat - 1].entries.push_back(e);
    }
  }
  if (!bs.eof()) throw ParseError("SDPA: trailing garbage in entry list");
  check_program(p);
  return p;
}

}  // namespace flexopf
