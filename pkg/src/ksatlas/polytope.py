"""Exact geometry of the non-contextual / local polytope.

Vertices are the behaviors of global deterministic assignments. All
verdicts (classical bounds, membership, facet tightness) are computed in
exact rational arithmetic; the assignment scan itself runs on scaled
int64 coefficients (see _kernels) with an overflow guard that falls back
to Fractions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._kernels import best_assignment, decode_assignment
from .errors import BudgetExceeded, NoDisturbanceViolated, ScenarioMismatch
from .graphs import is_complete_n_partite
from .ratlp import solve_feasibility
from .scenario import (
    Behavior,
    Inequality,
    check_inequality,
    evaluate,
    frac,
    maximal_contexts,
    outcome_grid,
    validate_behavior,
)

__all__ = [
    "DEFAULT_BUDGET",
    "Layout",
    "PolytopeDescription",
    "TightnessReport",
    "MembershipResult",
    "enumerate_vertices",
    "classical_bound",
    "membership_test",
    "polytope_dimension",
    "tightness_test",
    "int_rank",
]

DEFAULT_BUDGET = 1 << 24
MEMORY_BUDGET = 1 << 26  # max stored coordinate entries (N * D)


class Layout:
    """Flat coordinate order: maximal contexts lexicographically, each
    table in row-major outcome order."""

    def __init__(self, scenario):
        self.scenario = scenario
        self.contexts = tuple(c.members for c in maximal_contexts(scenario))
        self.grids = [outcome_grid(scenario, c) for c in self.contexts]
        self.offsets = []
        d = 0
        for g in self.grids:
            self.offsets.append(d)
            d += len(g)
        self.size = d
        self.pairs = [
            (ctx, asg)
            for ctx, grid in zip(self.contexts, self.grids)
            for asg in grid
        ]
        self._pos = [
            {asg: k for k, asg in enumerate(grid)} for grid in self.grids
        ]

    def coord_index(self, ctx_i, assignment):
        return self.offsets[ctx_i] + self._pos[ctx_i][tuple(assignment)]

    def behavior_coords(self, behavior):
        vec = []
        for ctx, grid in zip(self.contexts, self.grids):
            tab = behavior.table(ctx)
            for asg in grid:
                v = tab[asg]
                vec.append(v if isinstance(v, Fraction) else frac(v))
        return vec

    def behavior_from_row(self, row, mode="rational"):
        tables = {}
        for ctx, grid, off in zip(self.contexts, self.grids, self.offsets):
            tab = {}
            for k, asg in enumerate(grid):
                v = row[off + k]
                tab[asg] = Fraction(int(v)) if mode == "rational" else float(v)
            tables[ctx] = tab
        return Behavior(self.scenario, mode, tables)


@dataclass
class PolytopeDescription:
    scenario: object
    layout: Layout
    coords: np.ndarray          # (N, D) uint8, one row per distinct vertex
    assignment_index: np.ndarray  # first assignment realizing each vertex

    @property
    def n_vertices(self):
        return self.coords.shape[0]

    def vertex_behavior(self, i):
        return self.layout.behavior_from_row(self.coords[i])

    _dim_cache: int | None = field(default=None, repr=False)

    @property
    def dimension(self):
        if self._dim_cache is None:
            self._dim_cache = _affine_rank(self.coords)
        return self._dim_cache


@dataclass(frozen=True)
class TightnessReport:
    verdict: str                 # facet | lower-dimensional face | not supporting | violated-by-vertex
    classical_bound: Fraction
    saturating_vertices: int
    face_dimension: int          # -1 when no vertex saturates
    polytope_dimension: int

    def to_json(self):
        from .scenario import frac_str
        return {
            "verdict": self.verdict,
            "classical_bound": frac_str(self.classical_bound),
            "saturating_vertices": self.saturating_vertices,
            "face_dimension": self.face_dimension,
            "polytope_dimension": self.polytope_dimension,
        }


@dataclass(frozen=True)
class MembershipResult:
    member: bool
    weights: dict | None = None       # vertex index -> Fraction
    witness: Inequality | None = None
    witness_value: Fraction | None = None

    def to_json(self, scenario):
        from .scenario import frac_str
        out = {"member": self.member}
        if self.weights is not None:
            out["weights"] = {str(k): frac_str(w) for k, w in self.weights.items() if w}
        if self.witness is not None:
            out["witness"] = self.witness.to_json(scenario)
            out["witness_value"] = frac_str(self.witness_value)
        return out


def _assignment_space(scenario):
    radices = [len(o) for o in scenario.outcomes]
    total = 1
    for r in radices:
        total *= r
    return radices, total


def enumerate_vertices(scenario, budget=DEFAULT_BUDGET):
    """All deterministic-assignment behaviors as exact 0/1 coordinate rows.

    Duplicate images are merged on the full coordinate vector; row order
    follows the first realizing assignment, so output is deterministic.
    """
    layout = Layout(scenario)
    radices, total = _assignment_space(scenario)
    if total > budget:
        raise BudgetExceeded(f"{total} assignments exceed budget {budget}")
    if total * layout.size > MEMORY_BUDGET:
        raise BudgetExceeded(
            f"{total} x {layout.size} coordinate entries exceed the memory budget")

    digits = np.zeros((total, len(radices)), dtype=np.int64)
    idx = np.arange(total, dtype=np.int64)
    stride = 1
    for m in range(len(radices) - 1, -1, -1):
        digits[:, m] = (idx // stride) % radices[m]
        stride *= radices[m]

    coords = np.zeros((total, layout.size), dtype=np.uint8)
    for ci, (ctx, grid) in enumerate(zip(layout.contexts, layout.grids)):
        pos = np.zeros(total, dtype=np.int64)
        s = 1
        for m in reversed(ctx):
            pos += digits[:, m] * s
            s *= radices[m]
        coords[idx, layout.offsets[ci] + pos] = 1

    _, first = np.unique(coords, axis=0, return_index=True)
    keep = np.sort(first)
    return PolytopeDescription(scenario, layout, coords[keep], keep)


def _int_terms(scenario, inequality):
    """Terms with outcome labels replaced by indices and coefficients
    scaled to integers; returns (terms, denominator, max_abs_sum)."""
    label_pos = [
        {o: k for k, o in enumerate(outs)} for outs in scenario.outcomes
    ]
    denom = 1
    for _, _, coef in inequality.terms:
        denom = denom * coef.denominator // math.gcd(denom, coef.denominator)
    terms = []
    absum = 0
    for members, asg, coef in inequality.terms:
        c = int(coef * denom)
        absum += abs(c)
        terms.append((
            tuple(members),
            tuple(label_pos[m][o] for m, o in zip(members, asg)),
            c,
        ))
    return terms, denom, absum


def _merge_terms(terms):
    """Coalesce identical (members, outcome-index) events."""
    acc = {}
    for members, outs, c in terms:
        acc[(members, outs)] = acc.get((members, outs), 0) + c
    return [(m, o, c) for (m, o), c in acc.items() if c]


def _bound_by_party_decomposition(scenario, inequality, partition, budget):
    """Exact classical bound for complete multipartite compatibility.

    Deterministic assignments factor per party and every term touches at
    most one measurement of each party, so one party (the one with the
    largest assignment space) can be maximized setting-by-setting while
    the others are enumerated jointly.
    """
    radices, _ = _assignment_space(scenario)
    prods = []
    for part in partition.parts:
        p = 1
        for m in part:
            p *= radices[m]
        prods.append(p)
    star = max(range(len(prods)), key=lambda k: prods[k])
    star_meas = set(partition.parts[star])
    others = [m for m in range(len(radices)) if m not in star_meas]
    other_total = 1
    for m in others:
        other_total *= radices[m]
    if other_total > budget:
        raise BudgetExceeded(
            f"{other_total} assignments on the enumerated parties exceed budget {budget}")

    split = []
    for members, asg, coef in inequality.terms:
        inside = [(m, o) for m, o in zip(members, asg) if m in star_meas]
        outside = tuple((m, o) for m, o in zip(members, asg) if m not in star_meas)
        if len(inside) > 1:
            raise ScenarioMismatch(
                "term references two measurements of the same party")
        split.append((outside, inside[0] if inside else None, coef))

    best = None
    for combo in itertools.product(*(scenario.outcomes[m] for m in others)):
        val = dict(zip(others, combo))
        base = Fraction(0)
        gains = {m: {o: Fraction(0) for o in scenario.outcomes[m]}
                 for m in star_meas}
        for outside, inside, coef in split:
            if any(val[m] != o for m, o in outside):
                continue
            if inside is None:
                base += coef
            else:
                m, o = inside
                gains[m][o] += coef
        total = base + sum(max(g.values()) for g in gains.values())
        if best is None or total > best:
            best = total
    return best


def classical_bound(inequality, scenario, budget=DEFAULT_BUDGET):
    """Exact maximum of the inequality over deterministic assignments.

    Complete multipartite scenarios use the per-party decomposition (the
    assignment space factorizes); everything else is a full scan on the
    integer kernel, with a Fraction fallback if the scaled coefficients
    could overflow int64.
    """
    check_inequality(scenario, inequality)
    if not inequality.terms:
        return Fraction(0)
    radices, total = _assignment_space(scenario)

    if total > budget:
        partition = is_complete_n_partite(scenario.compat)
        if partition is not None and partition.n_parts >= 2:
            return _bound_by_party_decomposition(scenario, inequality, partition, budget)
        raise BudgetExceeded(f"{total} assignments exceed budget {budget}")

    terms, denom, absum = _int_terms(scenario, inequality)
    terms = _merge_terms(terms)
    if not terms:
        return Fraction(0)
    if absum < (1 << 62):
        best, _ = best_assignment(radices, terms)
        return Fraction(best, denom)

    # exact fallback for coefficients too wide for int64
    best = None
    for combo in itertools.product(*scenario.outcomes):
        v = Fraction(0)
        for members, asg, coef in inequality.terms:
            if all(combo[m] == o for m, o in zip(members, asg)):
                v += coef
        if best is None or v > best:
            best = v
    return best


def _vertex_values(desc, inequality):
    """Exact inequality value for every enumerated vertex."""
    terms, denom, _ = _int_terms(desc.scenario, inequality)
    weights = np.zeros(desc.layout.size, dtype=np.int64)
    for members, out_idx, c in terms:
        ctx_i = None
        for k, ctx in enumerate(desc.layout.contexts):
            if set(members) <= set(ctx):
                ctx_i = k
                break
        # distribute the sub-context event over the containing table
        grid = desc.layout.grids[ctx_i]
        ctx = desc.layout.contexts[ctx_i]
        want = dict(zip(members, out_idx))
        for k, asg in enumerate(grid):
            ok = True
            for m, oi in want.items():
                pos = ctx.index(m)
                if asg[pos] != desc.scenario.outcomes[m][oi]:
                    ok = False
                    break
            if ok:
                weights[desc.layout.offsets[ctx_i] + k] += c
    vals = desc.coords.astype(np.int64) @ weights
    return vals, denom


def polytope_dimension(scenario, budget=DEFAULT_BUDGET):
    """Affine dimension of the vertex set, by fraction-free rank."""
    return enumerate_vertices(scenario, budget=budget).dimension


def int_rank(rows):
    """Rank over the rationals of an integer matrix (Bareiss elimination;
    all intermediate values stay integers)."""
    rows = [[int(v) for v in r] for r in rows]
    m = len(rows)
    if m == 0:
        return 0
    n = len(rows[0])
    rank = 0
    prev = 1
    for c in range(n):
        piv = None
        for i in range(rank, m):
            if rows[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        p = rows[rank][c]
        for i in range(rank + 1, m):
            ric = rows[i][c]
            if ric == 0 and prev == 1:
                continue
            row_i, row_r = rows[i], rows[rank]
            for j in range(c + 1, n):
                row_i[j] = (row_i[j] * p - ric * row_r[j]) // prev
            row_i[c] = 0
        prev = p
        rank += 1
        if rank == m:
            break
    return rank


def _affine_rank(coords):
    """Dimension of the affine hull of integer coordinate rows."""
    if coords.shape[0] <= 1:
        return 0
    base = coords[0].astype(np.int64)
    diffs = coords[1:].astype(np.int64) - base
    return int_rank(diffs.tolist())


def tightness_test(inequality, scenario, budget=DEFAULT_BUDGET):
    """Facet verdict for the inequality at its stored bound, all exact."""
    check_inequality(scenario, inequality)
    desc = enumerate_vertices(scenario, budget=budget)
    vals, denom = _vertex_values(desc, inequality)
    max_val = Fraction(int(vals.max()), denom)
    poly_dim = desc.dimension

    if max_val > inequality.bound:
        return TightnessReport("violated-by-vertex", max_val, 0, -1, poly_dim)
    if max_val < inequality.bound:
        return TightnessReport("not supporting", max_val, 0, -1, poly_dim)
    sat = np.nonzero(vals == int(inequality.bound * denom))[0]
    face_dim = _affine_rank(desc.coords[sat])
    verdict = "facet" if face_dim == poly_dim - 1 else "lower-dimensional face"
    return TightnessReport(verdict, max_val, int(len(sat)), face_dim, poly_dim)


def _membership_lp(vertex_cols, coords_b, tol):
    """Feasibility system for convex weights, optionally with slack tol.

    Columns: N vertex weights, then for tol > 0 per coordinate a +slack,
    a -slack and a cap filler. Rows: D coordinate equations, the weight
    normalization, and for tol > 0 the slack caps.
    """
    n = len(vertex_cols)
    d = len(coords_b)
    rows = []
    rhs = []
    width = n if tol == 0 else n + 3 * d
    for i in range(d):
        row = [Fraction(int(col[i])) for col in vertex_cols]
        if tol != 0:
            row += [Fraction(0)] * (3 * d)
            row[n + 3 * i] = Fraction(1)
            row[n + 3 * i + 1] = Fraction(-1)
        rows.append(row)
        rhs.append(coords_b[i])
    rows.append([Fraction(1)] * n + [Fraction(0)] * (width - n))
    rhs.append(Fraction(1))
    if tol != 0:
        for i in range(d):
            row = [Fraction(0)] * width
            row[n + 3 * i] = Fraction(1)
            row[n + 3 * i + 1] = Fraction(1)
            row[n + 3 * i + 2] = Fraction(1)
            rows.append(row)
            rhs.append(frac(tol))
    return rows, rhs


def membership_test(behavior, scenario, tol=None, budget=DEFAULT_BUDGET):
    """Exact membership in the convex hull of deterministic behaviors.

    Rational behaviors are decided exactly (tol defaults to 0); float
    behaviors are rationalized entrywise and tested with a slack of tol
    (default 1e-9) around each coordinate, which makes the verdict
    approximate in the documented sense. Non-members come with an exact
    separating inequality respected by every vertex and strictly violated
    by the behavior.
    """
    report = validate_behavior(scenario, behavior,
                               tol=None if behavior.mode == "rational" else (tol or 1e-9))
    if not report.ok:
        raise NoDisturbanceViolated(
            "behavior fails normalization/no-disturbance; not a polytope question")
    if tol is None:
        tol = 0 if behavior.mode == "rational" else 1e-9
    tol = frac(tol)

    desc = enumerate_vertices(scenario, budget=budget)
    layout = desc.layout
    b = layout.behavior_coords(behavior)
    cols = [desc.coords[i] for i in range(desc.n_vertices)]

    rows, rhs = _membership_lp(cols, b, tol)
    res = solve_feasibility(rows, rhs)
    if res.feasible:
        weights = {i: res.x[i] for i in range(desc.n_vertices) if res.x[i] != 0}
        return MembershipResult(True, weights=weights)

    if tol != 0:
        rows, rhs = _membership_lp(cols, b, Fraction(0))
        res = solve_feasibility(rows, rhs)
        if res.feasible:
            # inside exactly but the slack system failed: cannot happen
            # (slack system is a relaxation); defensive fallback
            weights = {i: res.x[i] for i in range(desc.n_vertices) if res.x[i] != 0}
            return MembershipResult(True, weights=weights)

    y = res.certificate
    coefs = y[: layout.size]
    vert_vals = [
        sum(c * int(col[i]) for i, c in enumerate(coefs) if c)
        for col in cols
    ]
    bound = max(vert_vals)
    value = sum(c * b[i] for i, c in enumerate(coefs) if c)
    terms = tuple(
        (layout.pairs[i][0], layout.pairs[i][1], coefs[i])
        for i in range(layout.size)
        if coefs[i] != 0
    )
    witness = Inequality(terms, bound, kind="NCHV", label="separating-witness")
    return MembershipResult(False, witness=witness, witness_value=value)
