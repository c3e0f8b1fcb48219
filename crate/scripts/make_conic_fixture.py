"""Solve a dumped ConicProgram with ECOS and freeze the optimal objective.

The fixture lets the Rust test suite cross-check the Clarabel backend
against an unrelated interior-point code. Run once after changing how
subproblems are built:

    cargo run --release -p covert-uav --example dump_subproblem -- /tmp/first.json
    python3 scripts/make_conic_fixture.py /tmp/first.json \
        crates/core/tests/fixtures/first_subproblem_reference.json

The program is handed to ECOS in its native form (min c'x, Gx + s = h,
Ax = b, s in a product of cones), with no modeling layer in between.
Requires numpy, scipy and ecos.
"""

import json
import math
import sys

import ecos
import numpy as np
import scipy.sparse as sp


class Rows:
    """Accumulates rows of (G, h) for s = h - G x, i.e. s = a'x + c."""

    def __init__(self):
        self.i, self.j, self.v, self.h = [], [], [], []

    def add(self, terms, constant):
        r = len(self.h)
        for j, coef in terms:
            self.i.append(r)
            self.j.append(j)
            self.v.append(-coef)
        self.h.append(constant)

    def extend(self, other):
        off = len(self.h)
        self.i.extend(r + off for r in other.i)
        self.j.extend(other.j)
        self.v.extend(other.v)
        self.h.extend(other.h)

    def matrices(self, n):
        g = sp.csc_matrix((self.v, (self.i, self.j)), shape=(len(self.h), n))
        return g, np.array(self.h, dtype=float)


def combine(rows, weights):
    """Linear combination of affine rows as (terms, constant)."""
    acc, constant = {}, 0.0
    for row, w in zip(rows, weights):
        if w == 0.0:
            continue
        for j, coef in row["terms"]:
            acc[j] = acc.get(j, 0.0) + w * coef
        constant += w * row["constant"]
    return list(acc.items()), constant


def build(program):
    n = len(program["objective"])
    linear, equality, socs = Rows(), Rows(), []
    for j, (lo, up) in enumerate(zip(program["lower"], program["upper"])):
        if lo is not None and up is not None and lo == up:
            equality.add([(j, 1.0)], -lo)
            continue
        if lo is not None:
            linear.add([(j, 1.0)], -lo)
        if up is not None:
            linear.add([(j, -1.0)], up)

    for block in program["blocks"]:
        kind, rows = block["kind"], block["rows"]
        if kind == "zero":
            for row in rows:
                equality.add(row["terms"], row["constant"])
        elif kind == "nonnegative":
            for row in rows:
                linear.add(row["terms"], row["constant"])
        elif kind == "second_order":
            cone = Rows()
            for row in rows:
                cone.add(row["terms"], row["constant"])
            socs.append(cone)
        elif kind == "rotated_second_order":
            # 2uv >= |w|^2, u, v >= 0  iff  ((u + v), (u - v), sqrt2 w) in the standard cone.
            cone = Rows()
            cone.add(*combine(rows[:2], [1.0, 1.0]))
            cone.add(*combine(rows[:2], [1.0, -1.0]))
            for row in rows[2:]:
                cone.add(*combine([row], [math.sqrt(2.0)]))
            socs.append(cone)
        else:
            raise ValueError(f"unknown cone kind {kind}")

    dims = {"l": len(linear.h), "q": [len(c.h) for c in socs]}
    stacked = Rows()
    stacked.extend(linear)
    for cone in socs:
        stacked.extend(cone)
    g, h = stacked.matrices(n)
    # Equalities as s = a'x + c = 0, i.e. (-a)'x = c.
    a, b = equality.matrices(n)
    # Maximize c'x.
    c = -np.array(program["objective"], dtype=float)
    return c, g, h, dims, a, b, n


def main():
    src, dst = sys.argv[1], sys.argv[2]
    with open(src) as f:
        program = json.load(f)
    c, g, h, dims, a, b, n = build(program)
    tol = {"abstol": 1e-8, "reltol": 1e-8, "feastol": 1e-9, "max_iters": 200, "verbose": False}
    if a.shape[0] > 0:
        sol = ecos.solve(c, g, h, dims, a, b, **tol)
    else:
        sol = ecos.solve(c, g, h, dims, **tol)
    info = sol["info"]
    # Flag 10 is "close to optimal"; accept it only when the certificate is
    # still well inside the 1e-6 comparison the Rust test makes.
    accurate = info["relgap"] is not None and info["relgap"] <= 5e-7 and max(info["pres"], info["dres"]) <= 1e-9
    if info["exitFlag"] not in (0, 10) or not accurate:
        raise SystemExit(f"reference solve ended with {info['infostring']}")
    x = sol["x"]
    fixture = {
        "n_vars": n,
        "n_rows": sum(len(b["rows"]) for b in program["blocks"]),
        "objective": float(np.dot(program["objective"], x)),
        "relative_gap": info["relgap"],
        "solver": f"ECOS {ecos.__version__}",
    }
    with open(dst, "w") as f:
        json.dump(fixture, f, indent=2)
        f.write("\n")
    print(json.dumps(fixture, indent=2))


if __name__ == "__main__":
    main()
