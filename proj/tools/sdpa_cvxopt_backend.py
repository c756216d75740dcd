# Copyright 2026 The flexopf Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Solves an SDPA sparse file (flexopf convention) with cvxopt.

usage: sdpa_cvxopt_backend.py INPUT.dat-s OUTPUT.txt

The file encodes  min <C,X> s.t. <A_i,X> = b_i, X PSD/nonnegative  as the
SDPA dual with F0 = -C, F_i = A_i, c = b. That is cvxopt's conelp dual with
h = vec(C), G[:, i] = vec(A_i), c = -b, so z returns X and x returns y.

Output lines:
  status <optimal|...>
  y <i> <value>
  x <block> <row> <col> <value>      (upper triangle, 1-based)
"""

import sys

import cvxopt
from cvxopt import matrix, spmatrix, solvers


def read_sdpa(path):
    offset = 0.0
    body = []
    with open(path) as fh:
        for line in fh:
            if line.startswith('"') or line.startswith("*"):
                if line.startswith("* objective_offset"):
                    offset = float(line.split()[2])
                continue
            body.append(line.translate(str.maketrans(",{}()", "     ")))
    tok = " ".join(body).split()
    m, nb = int(tok[0]), int(tok[1])
    dims = [int(t) for t in tok[2:2 + nb]]
    pos = 2 + nb
    b = [float(t) for t in tok[pos:pos + m]]
    pos += m
    entries = []
    while pos + 5 <= len(tok):
        mat, blk, r, c = (int(t) for t in tok[pos:pos + 4])
        entries.append((mat, blk - 1, min(r, c) - 1, max(r, c) - 1, float(tok[pos + 4])))
        pos += 5
    return m, dims, b, entries, offset


def main():
    if len(sys.argv) != 3:
        sys.stderr.write(__doc__)
        return 1
    m, dims, b, entries, _ = read_sdpa(sys.argv[1])
    lin = [k for k, d in enumerate(dims) if d < 0]
    psd = [k for k, d in enumerate(dims) if d > 0]
    # Offsets of each block inside cvxopt's stacked vector: 'l' first, then 's'.
    start, at = {}, 0
    for k in lin:
        start[k] = at
        at += -dims[k]
    for k in psd:
        start[k] = at
        at += dims[k] ** 2
    total = at

    rows, cols, vals = [], [], []
    h = [0.0] * total
    for mat, blk, r, c, v in entries:
        if dims[blk] < 0:
            idx = [start[blk] + r]
        else:
            n = dims[blk]
            idx = [start[blk] + r + c * n]
            if r != c:
                idx.append(start[blk] + c + r * n)
        for i in idx:
            if mat == 0:
                h[i] += -v  # F0 = -C
            else:
                rows.append(i)
                cols.append(mat - 1)
                vals.append(v)
    G = spmatrix(vals, rows, cols, (total, m))
    cone = {"l": sum(-dims[k] for k in lin), "q": [], "s": [dims[k] for k in psd]}
    solvers.options["show_progress"] = False
    solvers.options["abstol"] = 1e-9
    solvers.options["reltol"] = 1e-9
    solvers.options["feastol"] = 1e-9
    sol = solvers.conelp(matrix([-x for x in b]), G, matrix(h), cone)

    with open(sys.argv[2], "w") as out:
        status = "optimal" if sol["status"] == "optimal" else "numerical_failure"
        out.write("status %s\n" % status)
        for i in range(m):
            out.write("y %d %.17g\n" % (i + 1, sol["x"][i]))
        z = sol["z"]
        for k in lin:
            for r in range(-dims[k]):
                out.write("x %d %d %d %.17g\n" % (k + 1, r + 1, r + 1, z[start[k] + r]))
        for k in psd:
            n = dims[k]
            for c in range(n):
                for r in range(c + 1):
                    v = 0.5 * (z[start[k] + r + c * n] + z[start[k] + c + r * n])
                    out.write("x %d %d %d %.17g\n" % (k + 1, r + 1, c + 1, v))
    return 0


if __name__ == "__main__":
    sys.exit(main())
