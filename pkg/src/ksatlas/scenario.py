"""Measurement scenarios, behaviors, and linear inequalities over them.

A scenario is a list of measurements with finite outcome sets plus a
compatibility graph; contexts are the maximal cliques. A behavior stores
one probability table per maximal context, either as exact rationals or
as floats. Inequalities are linear functionals over event probabilities;
correlator expressions are stored expanded into event terms so a single
evaluation path serves both forms.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .errors import (
    DuplicateMeasurement,
    InvalidEdge,
    MissingContextTable,
    NegativeProbability,
    ScenarioMismatch,
    TooFewOutcomes,
)
from .graphs import Graph, maximal_cliques

__all__ = [
    "Scenario",
    "Context",
    "Behavior",
    "Inequality",
    "ValidationReport",
    "build_scenario",
    "maximal_contexts",
    "validate_behavior",
    "evaluate",
    "frac",
    "frac_str",
    "outcome_grid",
    "correlator_inequality",
    "correlator_decomposition",
    "uniform_behavior",
    "deterministic_behavior",
    "mix_behaviors",
]


def frac(x):
    """Coerce ints, 'p/q' strings, floats and Fractions to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    return Fraction(x)


def frac_str(x):
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


@dataclass(frozen=True)
class Scenario:
    measurements: tuple          # measurement identifiers, in index order
    outcomes: tuple              # per measurement, tuple of outcome labels
    compat: Graph                # edge = compatible pair of measurement indices

    def index_of(self, mid):
        try:
            return self.measurements.index(mid)
        except ValueError:
            raise ScenarioMismatch(f"unknown measurement id {mid!r}") from None

    def to_json(self):
        return {
            "measurements": [
                {"id": m, "outcomes": list(self.outcomes[k])}
                for k, m in enumerate(self.measurements)
            ],
            "compat": [list(e) for e in self.compat.edges],
        }

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        ids = [m["id"] for m in data["measurements"]]
        outs = [tuple(m["outcomes"]) for m in data["measurements"]]
        edges = tuple((int(i), int(j)) for i, j in data["compat"])
        return build_scenario(ids, outs, edges)


@dataclass(frozen=True)
class Context:
    members: tuple  # sorted measurement indices

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(self.members)))


def build_scenario(measurements, outcomes, compat_edges):
    """Validated scenario constructor.

    `outcomes` may be a per-measurement list of outcome labels or a list
    of outcome counts (count k yields labels 0..k-1; count 2 yields the
    dichotomic labels +1/-1).
    """
    ids = tuple(measurements)
    if len(set(ids)) != len(ids):
        raise DuplicateMeasurement("measurement identifiers must be unique")
    out_sets = []
    for spec in outcomes:
        if isinstance(spec, int):
            labels = (1, -1) if spec == 2 else tuple(range(spec))
        else:
            labels = tuple(spec)
        if len(labels) < 2:
            raise TooFewOutcomes(f"measurement needs >= 2 outcomes, got {labels}")
        if len(set(labels)) != len(labels):
            raise TooFewOutcomes(f"duplicate outcome labels {labels}")
        out_sets.append(labels)
    if len(out_sets) != len(ids):
        raise TooFewOutcomes("one outcome set per measurement required")
    seen = set()
    for i, j in compat_edges:
        if not (0 <= i < len(ids)) or not (0 <= j < len(ids)):
            raise InvalidEdge(f"edge ({i},{j}) out of range")
        if i == j:
            raise InvalidEdge(f"self-loop at {i}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise InvalidEdge(f"duplicate edge {key}")
        seen.add(key)
    return Scenario(ids, tuple(out_sets), Graph(len(ids), tuple(seen)))


@lru_cache(maxsize=256)
def _maximal_context_tuples(scenario):
    return tuple(maximal_cliques(scenario.compat))


def maximal_contexts(scenario):
    """Maximal cliques of the compatibility graph in lexicographic order."""
    return [Context(c) for c in _maximal_context_tuples(scenario)]


def outcome_grid(scenario, members):
    """Cartesian product of outcome labels for the given measurement
    indices, in index order (row-major)."""
    return list(itertools.product(*(scenario.outcomes[m] for m in members)))


def context_key(scenario, members):
    return ",".join(scenario.measurements[m] for m in sorted(members))


@dataclass(frozen=True)
class Behavior:
    """Probability tables over the maximal contexts of a scenario.

    mode 'rational' keeps Fraction entries (required by the polytope
    operations); mode 'float' keeps floats with tolerance-based checks.
    """

    scenario: Scenario
    mode: str
    tables: dict  # context members tuple -> {assignment tuple: value}

    def table(self, members):
        key = tuple(sorted(members))
        if key not in self.tables:
            raise MissingContextTable(f"no table for context {key}")
        return self.tables[key]

    def marginal(self, members, sub, assignment):
        """P(assignment on sub) obtained from the table of `members`."""
        tab = self.table(members)
        members = tuple(sorted(members))
        pos = {m: k for k, m in enumerate(members)}
        want = dict(zip(sub, assignment))
        total = 0 if self.mode == "rational" else 0.0
        for asg, p in tab.items():
            if all(asg[pos[m]] == want[m] for m in sub):
                total += p
        return total

    def prob(self, sub, assignment):
        """P(assignment | sub-context) from the first maximal context
        containing the sub-context."""
        sub = tuple(sub)
        for ctx in _maximal_context_tuples(self.scenario):
            if set(sub) <= set(ctx):
                return self.marginal(ctx, sub, assignment)
        raise ScenarioMismatch(f"{sub} is not inside any maximal context")

    def to_json(self):
        s = self.scenario
        tables = {}
        for members, tab in sorted(self.tables.items()):
            entries = {}
            for asg, p in tab.items():
                k = ",".join(str(o) for o in asg)
                entries[k] = frac_str(p) if self.mode == "rational" else p
            tables[context_key(s, members)] = entries
        return {"mode": self.mode, "tables": tables}

    @classmethod
    def from_json(cls, scenario, data):
        if isinstance(data, str):
            data = json.loads(data)
        mode = data["mode"]
        tables = {}
        for ckey, entries in data["tables"].items():
            members = tuple(sorted(scenario.index_of(x) for x in ckey.split(",")))
            label_map = [
                {str(o): o for o in scenario.outcomes[m]} for m in members
            ]
            tab = {}
            for akey, val in entries.items():
                toks = akey.split(",")
                asg = tuple(label_map[k][tok] for k, tok in enumerate(toks))
                tab[asg] = frac(val) if mode == "rational" else float(val)
            tables[members] = tab
        return cls(scenario, mode, tables)


@dataclass(frozen=True)
class Inequality:
    """sum coef * P(assignment | context)  <=  bound.

    Each term references a sub-context (sorted measurement indices) of
    some maximal context and an outcome assignment for it.
    """

    terms: tuple     # ((members, assignment, Fraction coef), ...)
    bound: Fraction
    kind: str = "NCHV"   # "NCHV" or "LR"
    label: str = ""

    def __post_init__(self):
        canon = tuple(
            (tuple(m), tuple(a), frac(c)) for m, a, c in self.terms
        )
        object.__setattr__(self, "terms", canon)
        object.__setattr__(self, "bound", frac(self.bound))

    def relabeled(self, kind=None, label=None):
        return Inequality(self.terms, self.bound,
                          kind if kind is not None else self.kind,
                          label if label is not None else self.label)

    def to_json(self, scenario):
        return {
            "terms": [
                {
                    "context": [scenario.measurements[m] for m in members],
                    "assignment": list(asg),
                    "coef": frac_str(coef),
                }
                for members, asg, coef in self.terms
            ],
            "bound": frac_str(self.bound),
            "kind": self.kind,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, scenario, data):
        if isinstance(data, str):
            data = json.loads(data)
        terms = []
        for t in data["terms"]:
            pairs = sorted(
                zip((scenario.index_of(x) for x in t["context"]), t["assignment"])
            )
            members = tuple(m for m, _ in pairs)
            asg = []
            for m, o in pairs:
                match = [lbl for lbl in scenario.outcomes[m] if lbl == o or str(lbl) == str(o)]
                if not match:
                    raise ScenarioMismatch(f"outcome {o!r} unknown for measurement {m}")
                asg.append(match[0])
            terms.append((members, tuple(asg), frac(t["coef"])))
        return cls(tuple(terms), frac(data["bound"]), data.get("kind", "NCHV"),
                   data.get("label", ""))


def check_inequality(scenario, inequality):
    """Every term context must sit inside some maximal context and use
    valid outcome labels."""
    ctxs = _maximal_context_tuples(scenario)
    for members, asg, _ in inequality.terms:
        if len(members) != len(asg):
            raise ScenarioMismatch(f"term {members} has mismatched assignment {asg}")
        if not any(set(members) <= set(c) for c in ctxs):
            raise ScenarioMismatch(f"term context {members} not inside any maximal context")
        for m, o in zip(members, asg):
            if o not in scenario.outcomes[m]:
                raise ScenarioMismatch(f"outcome {o!r} invalid for measurement index {m}")


def correlator_inequality(scenario, correlators, bound, kind="NCHV", label=""):
    """Expand <M_a M_b ...> correlators over dichotomic +-1 measurements
    into event terms: each correlator contributes one term per joint
    outcome, weighted by coef times the product of outcomes."""
    terms = []
    for members, coef in correlators:
        members = tuple(sorted(members))
        coef = frac(coef)
        for m in members:
            if set(scenario.outcomes[m]) != {1, -1}:
                raise ScenarioMismatch(
                    f"correlator needs +-1 outcomes on measurement {m}")
        for asg in outcome_grid(scenario, members):
            sign = 1
            for o in asg:
                sign *= o
            terms.append((members, asg, coef * sign))
    ineq = Inequality(tuple(terms), frac(bound), kind, label)
    check_inequality(scenario, ineq)
    return ineq


def correlator_decomposition(scenario, inequality):
    """Exact expansion of the inequality into products of +-1 observables.

    Returns ({subset: Fraction}, constant): the inequality value on any
    behavior equals constant + sum over subsets of coef * <prod M_i>.
    Requires every referenced measurement to be dichotomic +-1.
    """
    coeffs = {}
    const = Fraction(0)
    for members, asg, coef in inequality.terms:
        k = len(members)
        for m in members:
            if set(scenario.outcomes[m]) != {1, -1}:
                raise ScenarioMismatch(
                    f"measurement {m} is not a +-1 observable")
        w = Fraction(coef, 2 ** k)
        for r in range(k + 1):
            for subset in itertools.combinations(range(k), r):
                sign = 1
                for pos in subset:
                    sign *= asg[pos]
                key = tuple(members[pos] for pos in subset)
                if key == ():
                    const += w * sign
                else:
                    coeffs[key] = coeffs.get(key, Fraction(0)) + w * sign
    coeffs = {k: v for k, v in coeffs.items() if v != 0}
    return coeffs, const


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    normalization: tuple = ()      # (context, deviation) pairs
    negativity: tuple = ()         # (context, assignment, value)
    no_disturbance: tuple = ()     # (ctx_a, ctx_b, shared, max deviation)

    def to_json(self, scenario):
        key = lambda c: context_key(scenario, c)
        return {
            "ok": self.ok,
            "normalization": [
                {"context": key(c), "deviation": str(d)} for c, d in self.normalization
            ],
            "negativity": [
                {"context": key(c), "assignment": [str(o) for o in a], "value": str(v)}
                for c, a, v in self.negativity
            ],
            "no_disturbance": [
                {
                    "contexts": [key(a), key(b)],
                    "shared": key(s),
                    "deviation": str(d),
                }
                for a, b, s, d in self.no_disturbance
            ],
        }


def validate_behavior(scenario, behavior, tol=None):
    """Normalization and no-disturbance checks.

    Rational mode compares exactly (tol forced to 0); float mode uses the
    given tolerance (default 1e-9). Missing tables and negative entries
    raise; normalization and marginal mismatches are reported.
    """
    if behavior.scenario != scenario:
        raise ScenarioMismatch("behavior belongs to a different scenario")
    exact = behavior.mode == "rational"
    if tol is None:
        tol = 0 if exact else 1e-9
    if exact:
        tol = frac(tol)

    ctxs = _maximal_context_tuples(scenario)
    norm_issues, neg_issues, nd_issues = [], [], []
    for ctx in ctxs:
        tab = behavior.table(ctx)  # raises MissingContextTable
        grid = outcome_grid(scenario, ctx)
        for asg in grid:
            if asg not in tab:
                raise MissingContextTable(
                    f"context {ctx} lacks entry for {asg}")
            v = tab[asg]
            if (exact and v < 0) or (not exact and v < -float(tol)):
                raise NegativeProbability(f"P{asg}|{ctx} = {v}")
        total = sum(tab[a] for a in grid)
        dev = abs(total - 1)
        if dev > tol:
            norm_issues.append((ctx, dev))

    for a in range(len(ctxs)):
        for b in range(a + 1, len(ctxs)):
            shared = tuple(sorted(set(ctxs[a]) & set(ctxs[b])))
            if not shared:
                continue
            worst = 0 if exact else 0.0
            for asg in outcome_grid(scenario, shared):
                pa = behavior.marginal(ctxs[a], shared, asg)
                pb = behavior.marginal(ctxs[b], shared, asg)
                dev = abs(pa - pb)
                if dev > worst:
                    worst = dev
            if worst > tol:
                nd_issues.append((ctxs[a], ctxs[b], shared, worst))

    ok = not (norm_issues or neg_issues or nd_issues)
    return ValidationReport(ok, tuple(norm_issues), tuple(neg_issues), tuple(nd_issues))


def evaluate(inequality, behavior):
    """Value of the inequality functional on a behavior; exact in rational
    mode."""
    check_inequality(behavior.scenario, inequality)
    total = Fraction(0) if behavior.mode == "rational" else 0.0
    for members, asg, coef in inequality.terms:
        p = behavior.prob(members, asg)
        total += (coef if behavior.mode == "rational" else float(coef)) * p
    return total


# -- behavior constructors ----------------------------------------------------

def uniform_behavior(scenario, mode="rational"):
    tables = {}
    for ctx in _maximal_context_tuples(scenario):
        grid = outcome_grid(scenario, ctx)
        p = Fraction(1, len(grid)) if mode == "rational" else 1.0 / len(grid)
        tables[ctx] = {asg: p for asg in grid}
    return Behavior(scenario, mode, tables)


def deterministic_behavior(scenario, assignment, mode="rational"):
    """Behavior of one global valuation: every context table is the
    indicator of the restricted assignment."""
    one = Fraction(1) if mode == "rational" else 1.0
    zero = Fraction(0) if mode == "rational" else 0.0
    tables = {}
    for ctx in _maximal_context_tuples(scenario):
        want = tuple(assignment[m] for m in ctx)
        tables[ctx] = {
            asg: (one if asg == want else zero)
            for asg in outcome_grid(scenario, ctx)
        }
    return Behavior(scenario, mode, tables)


def mix_behaviors(behaviors, weights):
    """Convex mixture; all behaviors must share scenario and mode."""
    first = behaviors[0]
    if first.mode == "rational":
        weights = [frac(w) for w in weights]
    tables = {}
    for ctx in _maximal_context_tuples(first.scenario):
        tab = {}
        for asg in outcome_grid(first.scenario, ctx):
            tab[asg] = sum(w * b.table(ctx)[asg] for w, b in zip(weights, behaviors))
        tables[ctx] = tab
    return Behavior(first.scenario, first.mode, tables)
