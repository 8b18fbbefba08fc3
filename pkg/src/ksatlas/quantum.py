"""Finite-dimensional quantum models for measurement scenarios.

Covers behavior generation from states and (commuting-per-context)
measurements, dilation of POVMs to projective measurements on a larger
space, seesaw maximization of correlator inequalities over dichotomic
observables, and verification of state-independent witness sets.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    InvalidModel,
    InvalidSet,
    NonCommutingContext,
    NotAPOVM,
    NotDichotomic,
    RankDeficiencyAmbiguous,
    ScenarioMismatch,
)
from .scenario import (
    Behavior,
    Inequality,
    Scenario,
    build_scenario,
    correlator_decomposition,
    frac,
    maximal_contexts,
    outcome_grid,
)

__all__ = [
    "QuantumModel",
    "DilationResult",
    "SICSet",
    "SeesawResult",
    "SicReport",
    "quantum_behavior",
    "neumark_dilation",
    "seesaw_max",
    "verify_sic",
    "criticality_check",
    "remove_measurement",
    "observable_effects",
    "witness_operator",
    "random_state",
    "mat_to_json",
    "mat_from_json",
]

ATOL = 1e-10


# -- small dense linear algebra helpers ----------------------------------------

def herm(a):
    return 0.5 * (a + a.conj().T)


def eigh_sorted(a):
    """Ascending eigendecomposition of the Hermitian part."""
    return np.linalg.eigh(herm(a))


def psd_sqrt(a):
    vals, vecs = eigh_sorted(a)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T


def polar_sign(a):
    """Hermitian sign factor of a Hermitian operator: eigenvalues mapped
    to +-1 (zero goes to +1, which keeps the result deterministic)."""
    vals, vecs = eigh_sorted(a)
    signs = np.where(vals < 0.0, -1.0, 1.0)
    return (vecs * signs) @ vecs.conj().T


def random_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def mat_to_json(a):
    a = np.asarray(a, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def mat_from_json(data):
    return np.array([[complex(re, im) for re, im in row] for row in data])


# -- models ---------------------------------------------------------------------

@dataclass
class QuantumModel:
    """State plus one effect list per scenario measurement."""

    dim: int
    state: np.ndarray            # (d,) pure vector or (d,d) density matrix
    effects: tuple               # per measurement: tuple of (d,d) effects
    pvm_flags: tuple = ()        # optional per-measurement PVM claim

    def density(self):
        s = np.asarray(self.state, dtype=complex)
        if s.ndim == 1:
            return np.outer(s, s.conj())
        return s

    def to_json(self, scenario):
        s = np.asarray(self.state, dtype=complex)
        kind = "pure" if s.ndim == 1 else "mixed"
        data = [[float(x.real), float(x.imag)] for x in s] if s.ndim == 1 else mat_to_json(s)
        return {
            "d": self.dim,
            "state": {"kind": kind, "data": data},
            "measurements": [
                {
                    "id": scenario.measurements[k],
                    "effects": [mat_to_json(e) for e in eff],
                    "pvm": bool(self.pvm_flags[k]) if self.pvm_flags else False,
                }
                for k, eff in enumerate(self.effects)
            ],
        }

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        d = int(data["d"])
        st = data["state"]
        if st["kind"] == "pure":
            state = np.array([complex(re, im) for re, im in st["data"]])
        else:
            state = mat_from_json(st["data"])
        effects = tuple(
            tuple(mat_from_json(e) for e in m["effects"]) for m in data["measurements"]
        )
        flags = tuple(bool(m.get("pvm", False)) for m in data["measurements"])
        return cls(d, state, effects, flags)


def validate_model(model, scenario, atol=ATOL):
    """Shape, positivity, completeness, PVM and edge-commutation checks."""
    d = model.dim
    rho = model.density()
    if rho.shape != (d, d):
        raise InvalidModel(f"state shape {rho.shape} does not match d={d}")
    if abs(np.trace(rho) - 1.0) > 1e-8 or np.linalg.eigvalsh(herm(rho))[0] < -1e-8:
        raise InvalidModel("state is not a unit-trace positive matrix")
    if len(model.effects) != len(scenario.measurements):
        raise InvalidModel("one effect list per scenario measurement required")
    for k, eff in enumerate(model.effects):
        if len(eff) != len(scenario.outcomes[k]):
            raise InvalidModel(
                f"measurement {k}: {len(eff)} effects for "
                f"{len(scenario.outcomes[k])} outcomes")
        total = np.zeros((d, d), dtype=complex)
        for e in eff:
            if e.shape != (d, d):
                raise InvalidModel(f"measurement {k}: bad effect shape {e.shape}")
            if np.linalg.eigvalsh(herm(e))[0] < -atol:
                raise InvalidModel(f"measurement {k}: effect not psd")
            total += e
        if np.abs(total - np.eye(d)).max() > atol:
            raise InvalidModel(f"measurement {k}: effects do not sum to identity")
        if model.pvm_flags and model.pvm_flags[k]:
            for a, ea in enumerate(eff):
                if np.abs(ea @ ea - ea).max() > atol:
                    raise InvalidModel(f"measurement {k}: effect {a} not idempotent")
                for eb in eff[a + 1:]:
                    if np.abs(ea @ eb).max() > atol:
                        raise InvalidModel(f"measurement {k}: projectors not orthogonal")
    for i, j in scenario.compat.edges:
        for ea in model.effects[i]:
            for eb in model.effects[j]:
                if np.abs(ea @ eb - eb @ ea).max() > atol:
                    raise NonCommutingContext(
                        f"effects of compatible measurements {i},{j} do not commute")


def quantum_behavior(model, scenario, atol=ATOL):
    """Joint probabilities per maximal context from commuting effects.

    P(a,b,...|ctx) = Tr(rho E_a E_b ...) with effects multiplied in
    ascending measurement-index order; commutation makes the order
    irrelevant, fixing it keeps results bit-reproducible.
    """
    validate_model(model, scenario, atol=atol)
    rho = model.density()
    tables = {}
    for ctx in maximal_contexts(scenario):
        members = ctx.members
        tab = {}
        for asg in outcome_grid(scenario, members):
            op = rho
            for m, o in zip(members, asg):
                oi = scenario.outcomes[m].index(o)
                op = op @ model.effects[m][oi]
            p = float(np.trace(op).real)
            tab[asg] = 0.0 if abs(p) < 1e-15 else p
        tables[members] = tab
    return Behavior(scenario, "float", tables)


# -- Neumark dilation ------------------------------------------------------------

@dataclass
class DilationResult:
    isometry: np.ndarray        # (D, d), V^dagger V = I_d
    projectors: tuple           # per outcome, (D, D) orthogonal projectors
    blocks: tuple               # per outcome, (offset, rank)

    @property
    def dilated_dim(self):
        return self.isometry.shape[0]

    def outcome_probability(self, k, psi):
        w = self.isometry @ np.asarray(psi, dtype=complex)
        off, r = self.blocks[k]
        return float(np.linalg.norm(w[off:off + r]) ** 2)


def neumark_dilation(effects, method="rank-block", atol=ATOL):
    """Dilate a POVM to a projective measurement on dimension sum-of-ranks.

    Row k of the isometry block for effect E is sqrt(lam) v^dagger over
    the eigenpairs of E with lam above threshold; the projectors select
    the blocks. Eigenvalues in the ambiguous band (1e-12, 1e-9) relative
    to the largest one raise RankDeficiencyAmbiguous rather than silently
    choosing a rank.
    """
    if method != "rank-block":
        raise ValueError(f"unknown dilation method {method!r}")
    effects = [np.asarray(e, dtype=complex) for e in effects]
    d = effects[0].shape[0]
    total = np.zeros((d, d), dtype=complex)
    for e in effects:
        if e.shape != (d, d):
            raise NotAPOVM("effects must share one square shape")
        if np.linalg.eigvalsh(herm(e))[0] < -atol:
            raise NotAPOVM("effect has a negative eigenvalue")
        total += e
    if np.abs(total - np.eye(d)).max() > atol:
        raise NotAPOVM("effects do not sum to the identity")

    rows = []
    blocks = []
    for e in effects:
        vals, vecs = eigh_sorted(e)
        top = float(vals[-1])
        if top <= 0.0:
            blocks.append((len(rows), 0))
            continue
        rel = vals / top
        if np.any((rel > 1e-12) & (rel < 1e-9)):
            raise RankDeficiencyAmbiguous(
                "effect eigenvalue in the ambiguous band (1e-12, 1e-9) of the max")
        keep = rel >= 1e-9
        off = len(rows)
        for lam, v in zip(vals[keep], vecs[:, keep].T):
            rows.append(np.sqrt(lam) * v.conj())
        blocks.append((off, int(keep.sum())))
    v_iso = np.array(rows)
    big = v_iso.shape[0]
    projectors = []
    for off, r in blocks:
        p = np.zeros((big, big), dtype=complex)
        for k in range(off, off + r):
            p[k, k] = 1.0
        projectors.append(p)
    return DilationResult(v_iso, tuple(projectors), tuple(blocks))


# -- seesaw maximization ----------------------------------------------------------

@dataclass
class SeesawResult:
    value: float
    model: QuantumModel
    converged: bool
    restarts: int
    iterations: int

    def to_json(self, scenario):
        return {
            "value": self.value,
            "converged": self.converged,
            "restarts": self.restarts,
            "iterations": self.iterations,
            "model": self.model.to_json(scenario),
        }


def _sym_product(mats):
    """Average of the operator product over all orderings."""
    k = len(mats)
    if k == 0:
        raise ValueError("empty product")
    if k == 1:
        return mats[0]
    acc = np.zeros_like(mats[0])
    for perm in itertools.permutations(range(k)):
        p = mats[perm[0]]
        for i in perm[1:]:
            p = p @ mats[i]
        acc = acc + p
    return acc / math.factorial(k)


def _objective_operator(subsets, const, observables, dim):
    b = const * np.eye(dim, dtype=complex)
    for members, coef in subsets.items():
        b = b + coef * _sym_product([observables[m] for m in members])
    return herm(b)


def _effective_operator(subsets, observables, rho, target, dim):
    """Hermitian F with Tr(M_target F) the target-linear part of the
    objective, under full symmetrization of each product."""
    f = np.zeros((dim, dim), dtype=complex)
    for members, coef in subsets.items():
        if target not in members:
            continue
        k = len(members)
        scale = coef / math.factorial(k)
        for perm in itertools.permutations(members):
            pos = perm.index(target)
            pre = np.eye(dim, dtype=complex)
            for m in perm[:pos]:
                pre = pre @ observables[m]
            post = np.eye(dim, dtype=complex)
            for m in perm[pos + 1:]:
                post = post @ observables[m]
            # Tr(rho pre M post) = Tr(M post rho pre)
            f = f + scale * (post @ rho @ pre)
    return herm(f)


def _random_observable(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(g)
    signs = rng.integers(0, 2, size=dim) * 2.0 - 1.0
    if np.all(signs == signs[0]):
        signs[0] = -signs[0]
    return herm((q * signs) @ q.conj().T)


def seesaw_max(inequality, scenario, dim, restarts=20, iters=300, seed=0,
               ftol=1e-13):
    """Alternating maximization of a correlator inequality over dichotomic
    observables and a pure state of the given dimension.

    The inequality is expanded into products of +-1 observables (raising
    NotDichotomic if any measurement is not +-1 valued); products are
    fully symmetrized so the objective stays Hermitian off the commuting
    manifold. State updates take the top eigenvector of the objective
    operator, observable updates the polar sign of the effective
    operator; both are exact block maximizers, so the value is monotone
    within a run. The best value over all restarts is a lower bound on
    the quantum maximum.
    """
    for outs in scenario.outcomes:
        if set(outs) != {1, -1}:
            raise NotDichotomic("seesaw requires +-1 outcomes on every measurement")
    if dim < 2:
        raise InvalidModel("dim must be >= 2")
    subsets_frac, const_frac = correlator_decomposition(scenario, inequality)
    subsets = {k: float(v) for k, v in subsets_frac.items()}
    const = float(const_frac)
    n_meas = len(scenario.measurements)
    rng = np.random.default_rng(seed)

    best_val = -np.inf
    best_obs = None
    best_state = None
    best_conv = False
    total_iters = 0

    for _ in range(restarts):
        observables = [_random_observable(dim, rng) for _ in range(n_meas)]
        prev = -np.inf
        converged = False
        for it in range(iters):
            total_iters += 1
            b = _objective_operator(subsets, const, observables, dim)
            vals, vecs = eigh_sorted(b)
            state = vecs[:, -1]
            rho = np.outer(state, state.conj())
            for m in range(n_meas):
                f = _effective_operator(subsets, observables, rho, m, dim)
                observables[m] = polar_sign(f)
            val = float(vals[-1])
            if val < prev - 1e-9:
                raise RuntimeError("seesaw lost monotonicity")
            if abs(val - prev) <= ftol * (1.0 + abs(val)):
                converged = True
                break
            prev = val
        b = _objective_operator(subsets, const, observables, dim)
        vals, vecs = eigh_sorted(b)
        val = float(vals[-1])
        state = vecs[:, -1]
        if val > best_val:
            best_val = val
            best_obs = [o.copy() for o in observables]
            best_state = state
            best_conv = converged

    effects = tuple(
        (0.5 * (np.eye(dim) + o), 0.5 * (np.eye(dim) - o)) for o in best_obs
    )
    model = QuantumModel(dim, best_state, effects)
    return SeesawResult(best_val, model, best_conv, restarts, total_iters)


# -- state-independent witness sets ------------------------------------------------

@dataclass
class SICSet:
    """Measurements claimed to witness contextuality for every state."""

    dim: int
    scenario: Scenario
    effects: tuple               # per measurement, per outcome effects
    witness: Inequality
    mu: Fraction                 # classical (NCHV) bound of the witness
    q: float                     # claimed state-independent quantum value
    embedded: tuple | None = None  # contextual subset driving the Bell lift
                                   # (None means the whole set)

    def model(self, state=None):
        if state is None:
            state = np.eye(self.dim, dtype=complex) / self.dim
        return QuantumModel(self.dim, state, self.effects)

    def to_json(self):
        from .scenario import frac_str
        return {
            "d": self.dim,
            "scenario": self.scenario.to_json(),
            "measurements": [
                {
                    "id": self.scenario.measurements[k],
                    "effects": [mat_to_json(e) for e in eff],
                }
                for k, eff in enumerate(self.effects)
            ],
            "witness": self.witness.to_json(self.scenario),
            "mu": frac_str(self.mu),
            "q": self.q,
        }

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        scenario = Scenario.from_json(data["scenario"])
        effects = tuple(
            tuple(mat_from_json(e) for e in m["effects"])
            for m in data["measurements"]
        )
        witness = Inequality.from_json(scenario, data["witness"])
        return cls(int(data["d"]), scenario, effects, witness,
                   frac(data["mu"]), float(data["q"]))


def observable_effects(observable, atol=1e-9):
    """Effects (E_+, E_-) of a +-1 observable (Hermitian involution)."""
    m = np.asarray(observable, dtype=complex)
    if np.abs(m @ m - np.eye(m.shape[0])).max() > atol:
        raise InvalidModel("observable is not an involution")
    eye = np.eye(m.shape[0])
    return (0.5 * (eye + m), 0.5 * (eye - m))


def witness_operator(sic_set):
    """Operator form of the witness: sum of coef times the (commuting)
    product of the effects selected by each term."""
    d = sic_set.dim
    w = np.zeros((d, d), dtype=complex)
    for members, asg, coef in sic_set.witness.terms:
        op = np.eye(d, dtype=complex)
        for m, o in zip(members, asg):
            oi = sic_set.scenario.outcomes[m].index(o)
            op = op @ sic_set.effects[m][oi]
        w = w + float(coef) * op
    return herm(w)


@dataclass
class SicReport:
    is_sic: bool
    q_estimate: float                 # Tr(W)/d
    identity_deviation: float         # ||W - q I||_F
    min_eigenvalue: float
    sample_min: float
    mu: Fraction

    def to_json(self):
        from .scenario import frac_str
        return {
            "is_sic": self.is_sic,
            "q_estimate": self.q_estimate,
            "identity_deviation": self.identity_deviation,
            "min_eigenvalue": self.min_eigenvalue,
            "sample_min": self.sample_min,
            "mu": frac_str(self.mu),
        }


def verify_sic(sic_set, sample_states=100, seed=0):
    """State-independence diagnostics for a witness set.

    Two diagnostics are reported separately: the deviation of the witness
    operator from a scalar multiple of the identity, and its minimum
    eigenvalue (the exact minimum of the witness value over states). The
    verdict requires the minimum over states to strictly exceed the
    classical bound.
    """
    if sic_set.dim < 3:
        raise InvalidSet("state-independent witness sets need dimension >= 3")
    if len(sic_set.effects) != len(sic_set.scenario.measurements):
        raise InvalidSet("one effect list per scenario measurement required")
    w = witness_operator(sic_set)
    d = sic_set.dim
    q_est = float(np.trace(w).real) / d
    dev = float(np.linalg.norm(w - q_est * np.eye(d)))
    vals = np.linalg.eigvalsh(w)
    lam_min = float(vals[0])
    rng = np.random.default_rng(seed)
    sample_min = math.inf
    for _ in range(sample_states):
        psi = random_state(d, rng)
        sample_min = min(sample_min, float((psi.conj() @ w @ psi).real))
    is_sic = lam_min > float(sic_set.mu) + 1e-9
    return SicReport(is_sic, q_est, dev, lam_min, sample_min, sic_set.mu)


def remove_measurement(sic_set, index):
    """The witness set with one measurement deleted.

    The compatibility graph is induced on the remaining measurements,
    witness terms whose context contains the deleted measurement are
    dropped, and the classical bound is recomputed exactly.
    """
    from .polytope import classical_bound

    s = sic_set.scenario
    keep = [m for m in range(len(s.measurements)) if m != index]
    remap = {m: k for k, m in enumerate(keep)}
    edges = [
        (remap[i], remap[j]) for i, j in s.compat.edges
        if i != index and j != index
    ]
    reduced = build_scenario(
        [s.measurements[m] for m in keep],
        [s.outcomes[m] for m in keep],
        edges,
    )
    terms = tuple(
        (tuple(remap[m] for m in members), asg, coef)
        for members, asg, coef in sic_set.witness.terms
        if index not in members
    )
    witness = Inequality(terms, sic_set.witness.bound, sic_set.witness.kind,
                         sic_set.witness.label + f"-minus-{s.measurements[index]}")
    mu = classical_bound(witness, reduced)
    witness = Inequality(terms, mu, witness.kind, witness.label)
    effects = tuple(sic_set.effects[m] for m in keep)
    q = float(np.trace(witness_operator(
        SICSet(sic_set.dim, reduced, effects, witness, mu, 0.0))).real) / sic_set.dim
    return SICSet(sic_set.dim, reduced, effects, witness, mu, q)


def criticality_check(sic_set, sample_states=50, seed=0):
    """Per-element effect of removal on the SIC property.

    Returns (critical, breaks) where breaks[k] is True when deleting
    measurement k destroys the SIC property; the set is critical when
    every removal does.
    """
    base = verify_sic(sic_set, sample_states=sample_states, seed=seed)
    if not base.is_sic:
        raise InvalidSet("the full set is not a SIC set")
    breaks = []
    for k in range(len(sic_set.scenario.measurements)):
        reduced = remove_measurement(sic_set, k)
        if not reduced.witness.terms:
            breaks.append(True)
            continue
        rep = verify_sic(reduced, sample_states=sample_states, seed=seed)
        breaks.append(not rep.is_sic)
    return all(breaks), breaks
