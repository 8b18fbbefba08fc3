"""Conversions between Bell scenarios and KS contextuality scenarios.

Implements the arrows of the connection map: the identity lift from Bell
to KS (same measurements, outcomes and compatibility), the distribution
of a multipartite KS scenario among spatially separated parties (which
completes the compatibility graph and may cost tightness), the canned
examples used throughout (hexagon with its six-term witness, n-cycles,
CHSH, the two-qubit Peres-Mermin square), and the lift of a
state-independent witness set to a bipartite Bell inequality.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionTooLarge,
    InvalidPartition,
    NotABellScenario,
    NotDichotomic,
    SicVerificationFailed,
    TooSmall,
    UndersizedPart,
)
from .graphs import (
    Graph,
    Partition,
    enumerate_n_partitions,
    is_complete_n_partite,
)
from .polytope import DEFAULT_BUDGET, classical_bound, tightness_test
from .quantum import (
    SICSet,
    observable_effects,
    remove_measurement,
    seesaw_max,
    verify_sic,
)
from .scenario import (
    Inequality,
    Scenario,
    build_scenario,
    correlator_decomposition,
    correlator_inequality,
    frac,
    maximal_contexts,
    outcome_grid,
)

__all__ = [
    "MappingReport",
    "SicBellReport",
    "PearleExample",
    "bell_to_ks",
    "ks_to_bell",
    "pearle_hexagon",
    "n_cycle",
    "n_cycle_quantum_model",
    "chsh_example",
    "pm_square",
    "sic_to_bell",
    "map_report",
]

PARTY_LETTERS = string.ascii_uppercase


@dataclass
class MappingReport:
    direction: str               # "bell-to-ks" or "ks-to-bell"
    connection: str              # "one-to-one", "partial" or "generic-lift"
    source_scenario: Scenario
    source_inequality: Inequality
    target_scenario: Scenario | None
    target_inequality: Inequality | None
    source_bound: Fraction | None
    target_bound: Fraction | None
    bound_preserved: bool | None
    source_tightness: object | None
    target_tightness: object | None
    tightness_preserved: bool | None
    partition: Partition | None = None
    source_quantum: float | None = None
    target_quantum: float | None = None
    quantum_method: str = ""
    notes: tuple = ()

    def to_json(self):
        from .scenario import frac_str
        out = {
            "direction": self.direction,
            "connection": self.connection,
            "source": {
                "scenario": self.source_scenario.to_json(),
                "inequality": self.source_inequality.to_json(self.source_scenario),
            },
            "notes": list(self.notes),
        }
        if self.target_scenario is not None:
            out["target"] = {
                "scenario": self.target_scenario.to_json(),
                "inequality": self.target_inequality.to_json(self.target_scenario),
            }
        if self.source_bound is not None:
            out["source_bound"] = frac_str(self.source_bound)
        if self.target_bound is not None:
            out["target_bound"] = frac_str(self.target_bound)
            out["bound_preserved"] = self.bound_preserved
        if self.source_tightness is not None:
            out["source_tightness"] = self.source_tightness.to_json()
        if self.target_tightness is not None:
            out["target_tightness"] = self.target_tightness.to_json()
            out["tightness_preserved"] = self.tightness_preserved
        if self.partition is not None:
            out["partition"] = self.partition.to_json()
        if self.source_quantum is not None:
            out["quantum"] = {
                "source": self.source_quantum,
                "target": self.target_quantum,
                "method": self.quantum_method,
            }
        return out


def _require_bell(scenario):
    partition = is_complete_n_partite(scenario.compat)
    if partition is None or partition.n_parts < 2:
        raise NotABellScenario(
            "compatibility graph is not complete n-partite with n >= 2")
    if partition.undersized_parts():
        raise NotABellScenario("a Bell scenario needs >= 2 measurements per party")
    return partition


def bell_to_ks(scenario, inequality, budget=DEFAULT_BUDGET):
    """Identity lift: a Bell inequality read as a KS non-contextuality
    inequality on the scenario with the same measurements, outcomes and
    compatibility. Everything is re-verified rather than assumed."""
    partition = _require_bell(scenario)
    target_ineq = inequality.relabeled(kind="NCHV")
    src_bound = classical_bound(inequality, scenario, budget=budget)
    tgt_bound = classical_bound(target_ineq, scenario, budget=budget)
    src_tight = tightness_test(inequality, scenario, budget=budget)
    tgt_tight = tightness_test(target_ineq, scenario, budget=budget)
    return MappingReport(
        direction="bell-to-ks",
        connection="one-to-one",
        source_scenario=scenario,
        source_inequality=inequality,
        target_scenario=scenario,
        target_inequality=target_ineq,
        source_bound=src_bound,
        target_bound=tgt_bound,
        bound_preserved=src_bound == tgt_bound,
        source_tightness=src_tight,
        target_tightness=tgt_tight,
        tightness_preserved=src_tight.verdict == tgt_tight.verdict,
        partition=partition,
    )


def _validate_partition(scenario, partition):
    n = len(scenario.measurements)
    seen = set()
    for part in partition.parts:
        for m in part:
            if not (0 <= m < n) or m in seen:
                raise InvalidPartition(f"partition does not partition 0..{n-1}")
            seen.add(m)
        for a in part:
            for b in part:
                if a < b and scenario.compat.has_edge(a, b):
                    raise InvalidPartition(
                        f"part {part} is not independent: edge ({a},{b})")
    if len(seen) != n:
        raise InvalidPartition("partition misses some measurements")
    if partition.undersized_parts():
        raise UndersizedPart(
            "every party needs at least two (incompatible) measurements")


def ks_to_bell(scenario, inequality, partition, budget=DEFAULT_BUDGET):
    """Distribute the measurements of a multipartite KS scenario among
    spatially separated parties.

    The target compatibility graph is the complete n-partite closure over
    the parts (space-like separation makes all cross-party pairs
    compatible). Inequality terms are carried verbatim; the classical
    bound and the tightness verdict are recomputed on the target, never
    trusted. When the source is already complete n-partite the map is the
    identity (ids included); otherwise measurements get party-prefixed
    identifiers.
    """
    _validate_partition(scenario, partition)
    n_meas = len(scenario.measurements)
    part_of = {}
    for k, part in enumerate(partition.parts):
        for m in part:
            part_of[m] = k
    closure_edges = tuple(
        (i, j) for i in range(n_meas) for j in range(i + 1, n_meas)
        if part_of[i] != part_of[j]
    )
    identity = set(closure_edges) == set(scenario.compat.edges)
    if identity:
        target = scenario
    else:
        ids = [
            f"{PARTY_LETTERS[part_of[m]]}_{scenario.measurements[m]}"
            for m in range(n_meas)
        ]
        target = build_scenario(ids, scenario.outcomes, closure_edges)

    src_bound = classical_bound(inequality, scenario, budget=budget)
    tgt_terms = inequality.terms  # indices unchanged, only ids renamed
    probe = Inequality(tgt_terms, inequality.bound, "LR", inequality.label)
    tgt_bound = classical_bound(probe, target, budget=budget)
    target_ineq = Inequality(tgt_terms, tgt_bound, "LR", inequality.label)
    src_tight = tightness_test(inequality, scenario, budget=budget)
    tgt_tight = tightness_test(target_ineq, target, budget=budget)
    return MappingReport(
        direction="ks-to-bell",
        connection="one-to-one" if identity else "partial",
        source_scenario=scenario,
        source_inequality=inequality,
        target_scenario=target,
        target_inequality=target_ineq,
        source_bound=src_bound,
        target_bound=tgt_bound,
        bound_preserved=src_bound == tgt_bound,
        source_tightness=src_tight,
        target_tightness=tgt_tight,
        tightness_preserved=src_tight.verdict == tgt_tight.verdict,
        partition=partition,
    )


# -- canned examples -----------------------------------------------------------

def n_cycle(n, budget=DEFAULT_BUDGET):
    """n dichotomic measurements on a cycle with the chained correlator
    expression; the classical bound is computed, not hardcoded."""
    if n < 4:
        raise TooSmall("the cycle family starts at n = 4")
    scenario = build_scenario(
        [f"M{i+1}" for i in range(n)], [2] * n,
        [(i, (i + 1) % n) for i in range(n)],
    )
    correlators = [((i, i + 1), 1) for i in range(n - 1)] + [((n - 1, 0), -1)]
    probe = correlator_inequality(scenario, correlators, 0, "NCHV", f"cycle-{n}")
    bound = classical_bound(probe, scenario, budget=budget)
    inequality = correlator_inequality(scenario, correlators, bound, "NCHV",
                                       f"cycle-{n}")
    return scenario, inequality


def n_cycle_quantum_model(n):
    """Closed-form maximizer for even cycles: odd measurements act on the
    first qubit, even ones on the second, at angles spaced pi/n, on the
    maximally entangled two-qubit state. Reaches n cos(pi/n)."""
    if n < 4 or n % 2:
        raise TooSmall("closed-form cycle models exist for even n >= 4")
    from .quantum import QuantumModel

    eye = np.eye(2, dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.array([[1, 0], [0, -1]], dtype=complex)

    def rot(theta):
        return np.cos(theta) * z + np.sin(theta) * x

    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1 / np.sqrt(2)
    effects = []
    for i in range(n):
        theta = -i * np.pi / n
        local = rot(theta)
        obs = np.kron(local, eye) if i % 2 == 0 else np.kron(eye, local.T)
        effects.append(observable_effects(obs))
    return QuantumModel(4, phi, tuple(effects))


def pearle_hexagon(budget=DEFAULT_BUDGET):
    """The hexagon scenario, its six-correlator witness with bound 4, the
    odd/even bipartition, and the Bell inequality it maps to."""
    scenario, gamma = n_cycle(6, budget=budget)
    partition = Partition(((0, 2, 4), (1, 3, 5)))
    report = ks_to_bell(scenario, gamma, partition, budget=budget)
    return PearleExample(
        scenario=scenario,
        gamma=gamma,
        partition=partition,
        bell_scenario=report.target_scenario,
        gamma_prime=report.target_inequality,
    )


@dataclass(frozen=True)
class PearleExample:
    scenario: Scenario
    gamma: Inequality
    partition: Partition
    bell_scenario: Scenario
    gamma_prime: Inequality


def chsh_example(budget=DEFAULT_BUDGET):
    """The two-party two-setting scenario and its facet inequality."""
    scenario = build_scenario(
        ["A1", "A2", "B1", "B2"], [2] * 4,
        [(0, 2), (0, 3), (1, 2), (1, 3)],
    )
    correlators = [((0, 2), 1), ((0, 3), 1), ((1, 2), 1), ((1, 3), -1)]
    probe = correlator_inequality(scenario, correlators, 0, "LR", "chsh")
    bound = classical_bound(probe, scenario, budget=budget)
    return scenario, correlator_inequality(scenario, correlators, bound, "LR", "chsh")


def pm_square():
    """The two-qubit Peres-Mermin square as a critical SIC set.

    Nine dichotomic observables whose commutation graph has the six
    row/column contexts; the witness adds the six context correlators
    with the sign of the corresponding operator product, so its operator
    form is 6 times the identity while the classical bound is 4.
    """
    eye = np.eye(2, dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    z = np.array([[1, 0], [0, -1]], dtype=complex)
    grid = [
        ("A11", np.kron(z, eye)), ("A12", np.kron(eye, z)), ("A13", np.kron(z, z)),
        ("A21", np.kron(eye, x)), ("A22", np.kron(x, eye)), ("A23", np.kron(x, x)),
        ("A31", np.kron(z, x)), ("A32", np.kron(x, z)), ("A33", np.kron(y, y)),
    ]
    ids = [g[0] for g in grid]
    mats = [g[1] for g in grid]
    edges = [
        (i, j) for i in range(9) for j in range(i + 1, 9)
        if np.abs(mats[i] @ mats[j] - mats[j] @ mats[i]).max() < 1e-12
    ]
    scenario = build_scenario(ids, [2] * 9, edges)
    correlators = []
    for ctx in maximal_contexts(scenario):
        prod = np.eye(4, dtype=complex)
        for m in ctx.members:
            prod = prod @ mats[m]
        sign = 1 if prod[0, 0].real > 0 else -1
        correlators.append((ctx.members, sign))
    probe = correlator_inequality(scenario, correlators, 0, "NCHV", "pm-witness")
    mu = classical_bound(probe, scenario)
    witness = correlator_inequality(scenario, correlators, mu, "NCHV", "pm-witness")
    effects = tuple(observable_effects(m) for m in mats)
    return SICSet(4, scenario, effects, witness, mu, float(len(correlators)))


# -- SIC set to bipartite Bell -----------------------------------------------------

@dataclass
class SicBellReport:
    scenario: Scenario
    inequality: Inequality        # lifted Bell expression, bound = exact local bound
    local_bound: Fraction
    mu: Fraction
    local_bound_matches_mu: bool
    constant: Fraction            # additive constant dropped from the expression
    quantum_value: float          # on the maximally entangled state
    violation: float
    removal_violations: tuple     # (measurement id, violation after removal)

    def to_json(self):
        from .scenario import frac_str
        return {
            "scenario": self.scenario.to_json(),
            "inequality": self.inequality.to_json(self.scenario),
            "local_bound": frac_str(self.local_bound),
            "mu": frac_str(self.mu),
            "local_bound_matches_mu": self.local_bound_matches_mu,
            "constant": frac_str(self.constant),
            "quantum_value": self.quantum_value,
            "violation": self.violation,
            "removals": [
                {"removed": mid, "violation": v} for mid, v in self.removal_violations
            ],
        }


def _dichotomic_indices(scenario):
    for m, outs in enumerate(scenario.outcomes):
        if set(outs) != {1, -1}:
            raise NotDichotomic(
                "the Bell lift is implemented for +-1 observable sets")


def _lift_once(sic_set, budget):
    """Build the bipartite Bell scenario and expression for one witness set.

    For every correlator subset T of the witness (coefficient c_T) and
    every j in T, Alice jointly measures T and contributes the product of
    her outcomes except the one for j, while Bob measures the transposed
    partner observable of j; on the maximally entangled state each such
    term reproduces the witness correlator, so their |T|-average restores
    the witness value q (minus the constant term, which is returned
    separately).
    """
    _dichotomic_indices(sic_set.scenario)
    subsets, const = correlator_decomposition(sic_set.scenario, sic_set.witness)
    subsets = {t: c for t, c in subsets.items() if c != 0}
    if not subsets:
        raise SicVerificationFailed("witness has no correlator content")
    s = sic_set.scenario

    alice_settings = sorted(subsets)           # tuples of measurement indices
    bob_meas = sorted({m for t in subsets for m in t})
    alice_ids = ["A(" + "&".join(s.measurements[m] for m in t) + ")"
                 for t in alice_settings]
    bob_ids = ["B(" + s.measurements[m] + ")" for m in bob_meas]

    def joint_label(asg):
        return "".join("+" if o == 1 else "-" for o in asg)

    alice_outcomes = [
        tuple(joint_label(asg) for asg in itertools.product(*([(1, -1)] * len(t))))
        for t in alice_settings
    ]
    n_a = len(alice_settings)
    edges = [(i, n_a + j) for i in range(n_a) for j in range(len(bob_meas))]
    bell = build_scenario(
        alice_ids + bob_ids,
        list(alice_outcomes) + [(1, -1)] * len(bob_meas),
        edges,
    )
    bob_index = {m: n_a + k for k, m in enumerate(bob_meas)}

    terms = []
    for ti, t in enumerate(alice_settings):
        c = subsets[t]
        k = len(t)
        for pos, j in enumerate(t):
            for asg in itertools.product(*([(1, -1)] * k)):
                partial = 1
                for p, o in enumerate(asg):
                    if p != pos:
                        partial *= o
                for b in (1, -1):
                    coef = Fraction(c, k) * partial * b
                    terms.append((
                        (ti, bob_index[j]),
                        (joint_label(asg), b),
                        coef,
                    ))
    probe = Inequality(tuple(terms), 0, "LR", "sic-lift")
    local = classical_bound(probe, bell, budget=budget)
    lifted = Inequality(tuple(terms), local, "LR", "sic-lift")

    # quantum value on the maximally entangled state:
    # <Phi| M (x) N |Phi> = Tr(M N^T)/d, and Bob's effects are transposes
    d = sic_set.dim
    value = 0.0
    for t in alice_settings:
        c = float(subsets[t])
        k = len(t)
        for pos, j in enumerate(t):
            for asg in itertools.product(*([(1, -1)] * k)):
                partial = 1
                for p, o in enumerate(asg):
                    if p != pos:
                        partial *= o
                e_alice = np.eye(d, dtype=complex)
                for m, o in zip(t, asg):
                    oi = s.outcomes[m].index(o)
                    e_alice = e_alice @ sic_set.effects[m][oi]
                for b in (1, -1):
                    oi = s.outcomes[j].index(b)
                    e_bob = sic_set.effects[j][oi]
                    p = float(np.trace(e_alice @ e_bob).real) / d
                    value += (c / k) * partial * b * p
    return bell, lifted, local, value, const


def sic_to_bell(sic_set, budget=DEFAULT_BUDGET, sample_states=50, seed=0):
    """Lift a verified SIC set to a bipartite Bell inequality.

    The local bound is computed exactly on the lifted scenario; the
    quantum value is evaluated directly on the two-qudit maximally
    entangled state. If the computed local bound differs from the
    witness's classical bound mu, the report carries both and flags the
    mismatch rather than hiding it. For every measurement of the embedded
    contextual subset, the lift is rebuilt without it and the residual
    violation reported.
    """
    if sic_set.dim > 8:
        raise DimensionTooLarge("the desk-scale lift supports dimension <= 8")
    rep = verify_sic(sic_set, sample_states=sample_states, seed=seed)
    if not rep.is_sic:
        raise SicVerificationFailed(
            f"not a SIC set: min witness value {rep.min_eigenvalue} "
            f"vs bound {sic_set.mu}")

    bell, lifted, local, value, const = _lift_once(sic_set, budget)
    violation = value - float(local)

    removals = []
    n_meas = len(sic_set.scenario.measurements)
    embedded = getattr(sic_set, "embedded", None) or range(n_meas)
    for m in embedded:
        reduced = remove_measurement(sic_set, m)
        if not reduced.witness.terms:
            removals.append((sic_set.scenario.measurements[m], 0.0))
            continue
        _, _, local_r, value_r, _ = _lift_once(reduced, budget)
        removals.append(
            (sic_set.scenario.measurements[m], value_r - float(local_r)))

    return SicBellReport(
        scenario=bell,
        inequality=lifted,
        local_bound=local,
        mu=sic_set.mu,
        local_bound_matches_mu=(local + const) == sic_set.mu,
        constant=const,
        quantum_value=value,
        violation=violation,
        removal_violations=tuple(removals),
    )


# -- end-to-end driver ---------------------------------------------------------

def _first_valid_partition(graph):
    """Lexicographically smallest partition into >= 2 parts of size >= 2."""
    for n_parts in range(2, graph.n // 2 + 1):
        for part in enumerate_n_partitions(graph, n_parts):
            if not part.undersized_parts():
                return part
    return None


def map_report(scenario, inequality, partition=None, with_quantum=False,
               dim=2, restarts=8, seed=0, budget=DEFAULT_BUDGET):
    """Detect the applicable arrow for the scenario and run it.

    Complete n-partite compatibility gives the one-to-one connection (run
    in the direction matching the inequality's bound kind); other
    n-partite graphs with >= 2 measurements per part give the partial
    connection via the lexicographically smallest valid partition; when
    no such partition exists only the generic witness-set lift applies,
    which needs a SIC set rather than a bare inequality and is therefore
    only reported.
    """
    cnp = is_complete_n_partite(scenario.compat)
    if cnp is not None and cnp.n_parts >= 2 and not cnp.undersized_parts():
        if inequality.kind == "LR":
            report = bell_to_ks(scenario, inequality, budget=budget)
        else:
            report = ks_to_bell(scenario, inequality, cnp, budget=budget)
    else:
        part = partition or _first_valid_partition(scenario.compat)
        if part is None:
            return MappingReport(
                direction="ks-to-bell",
                connection="generic-lift",
                source_scenario=scenario,
                source_inequality=inequality,
                target_scenario=None,
                target_inequality=None,
                source_bound=classical_bound(inequality, scenario, budget=budget),
                target_bound=None,
                bound_preserved=None,
                source_tightness=tightness_test(inequality, scenario, budget=budget),
                target_tightness=None,
                tightness_preserved=None,
                notes=(
                    "no n-partition with two measurements per part exists; "
                    "only the generic SIC-set lift arrow applies",
                ),
            )
        report = ks_to_bell(scenario, inequality, part, budget=budget)

    notes = list(report.notes)
    if report.connection == "partial" and not report.tightness_preserved:
        notes.append("tightness lost under the party closure")
    if report.connection == "partial":
        notes.append(
            "quantum value of the source witness may be unattainable in the "
            "Bell scenario; compare the reported quantum values")
    report.notes = tuple(notes)

    if with_quantum and report.target_scenario is not None:
        src_q = seesaw_max(report.source_inequality, report.source_scenario,
                           dim=dim, restarts=restarts, seed=seed)
        tgt_q = seesaw_max(report.target_inequality, report.target_scenario,
                           dim=dim, restarts=restarts, seed=seed)
        report.source_quantum = src_q.value
        report.target_quantum = tgt_q.value
        report.quantum_method = (
            f"seesaw(dim={dim}, restarts={restarts}, seed={seed}); "
            "lower bounds on the quantum maxima")
    return report
