import math

import numpy as np
import pytest

from ksatlas.bridge import chsh_example, n_cycle, n_cycle_quantum_model, pm_square
from ksatlas.errors import (
    InvalidSet,
    NonCommutingContext,
    NotAPOVM,
    NotDichotomic,
    RankDeficiencyAmbiguous,
)
from ksatlas.quantum import (
    QuantumModel,
    SICSet,
    criticality_check,
    eigh_sorted,
    herm,
    neumark_dilation,
    observable_effects,
    polar_sign,
    quantum_behavior,
    random_state,
    remove_measurement,
    seesaw_max,
    verify_sic,
    witness_operator,
)
from ksatlas.scenario import build_scenario, evaluate, validate_behavior

I2 = np.eye(2, dtype=complex)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)


def random_pvm(dim, rng):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, _ = np.linalg.qr(g)
    return tuple(np.outer(q[:, k], q[:, k].conj()) for k in range(dim))


def random_povm(dim, n_effects, rng):
    """Random POVM by normalizing positive matrices with the inverse
    square root of their sum."""
    mats = []
    for _ in range(n_effects):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        mats.append(g @ g.conj().T)
    total = sum(mats)
    vals, vecs = np.linalg.eigh(total)
    inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return [herm(inv_sqrt @ m @ inv_sqrt) for m in mats]


# -- linear algebra kernel ---------------------------------------------------

def test_eigh_residual_is_small():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = int(rng.integers(2, 9))
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        a = herm(a)
        vals, vecs = eigh_sorted(a)
        assert np.linalg.norm(a @ vecs - vecs * vals) <= 1e-9 * max(
            1.0, np.linalg.norm(a))


def test_polar_sign_is_involution():
    rng = np.random.default_rng(5)
    a = herm(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    s = polar_sign(a)
    assert np.abs(s @ s - np.eye(4)).max() < 1e-12


# -- quantum behaviors ----------------------------------------------------------

def test_mixed_state_pvm_behavior_is_no_disturbing():
    rng = np.random.default_rng(7)
    s = build_scenario(["a", "b", "c"], [2, 2, 2], [(0, 1), (1, 2)])
    # one shared PVM basis per context keeps compatible pairs commuting
    basis = random_pvm(4, rng)
    eff_a = (basis[0] + basis[1], basis[2] + basis[3])
    eff_b = (basis[0] + basis[2], basis[1] + basis[3])
    eff_c = (basis[0], basis[1] + basis[2] + basis[3])
    model = QuantumModel(4, np.eye(4, dtype=complex) / 4, (eff_a, eff_b, eff_c))
    beh = quantum_behavior(model, s)
    assert validate_behavior(s, beh, tol=1e-12).ok


def test_random_pvm_behaviors_pass_validation():
    rng = np.random.default_rng(11)
    s = build_scenario(["a", "b"], [2, 2], [(0, 1)])
    for _ in range(10):
        basis = random_pvm(4, rng)
        eff_a = (basis[0] + basis[1], basis[2] + basis[3])
        eff_b = (basis[0] + basis[2], basis[1] + basis[3])
        psi = random_state(4, rng)
        model = QuantumModel(4, psi, (eff_a, eff_b))
        beh = quantum_behavior(model, s)
        assert validate_behavior(s, beh, tol=1e-10).ok


def test_noncommuting_context_is_rejected():
    s = build_scenario(["a", "b"], [2, 2], [(0, 1)])
    model = QuantumModel(2, np.array([1, 0], dtype=complex),
                         (observable_effects(PZ), observable_effects(PX)))
    with pytest.raises(NonCommutingContext):
        quantum_behavior(model, s)


def test_chsh_tsirelson_closed_form_model():
    # singlet-equivalent construction through the even-cycle model family
    scenario, ineq = n_cycle(4)
    model = n_cycle_quantum_model(4)
    beh = quantum_behavior(model, scenario)
    assert validate_behavior(scenario, beh, tol=1e-10).ok
    assert abs(evaluate(ineq, beh) - 2 * math.sqrt(2)) < 1e-9


def test_hexagon_maximizer_value():
    scenario, gamma = n_cycle(6)
    beh = quantum_behavior(n_cycle_quantum_model(6), scenario)
    assert abs(evaluate(gamma, beh) - 3 * math.sqrt(3)) < 1e-6


# -- Neumark dilation ---------------------------------------------------------

def test_pvm_dilates_to_itself():
    rng = np.random.default_rng(13)
    pvm = random_pvm(3, rng)
    dil = neumark_dilation(pvm)
    assert dil.dilated_dim == 3
    for _ in range(20):
        psi = random_state(3, rng)
        for k, e in enumerate(pvm):
            want = float((psi.conj() @ e @ psi).real)
            assert abs(want - dil.outcome_probability(k, psi)) < 1e-10


def test_trine_povm_dilation():
    vecs = [np.array([math.cos(2 * math.pi * k / 3),
                      math.sin(2 * math.pi * k / 3)]) for k in range(3)]
    effects = [(2 / 3) * np.outer(v, v).astype(complex) for v in vecs]
    dil = neumark_dilation(effects)
    assert dil.dilated_dim == 3
    v = dil.isometry
    assert np.abs(v.conj().T @ v - np.eye(2)).max() < 1e-10
    rng = np.random.default_rng(17)
    for _ in range(100):
        psi = random_state(2, rng)
        for k, e in enumerate(effects):
            want = float((psi.conj() @ e @ psi).real)
            assert abs(want - dil.outcome_probability(k, psi)) < 1e-10


def test_random_povm_dilation_properties():
    rng = np.random.default_rng(19)
    for _ in range(10):
        d = int(rng.integers(2, 5))
        k = int(rng.integers(2, 6))
        effects = random_povm(d, k, rng)
        dil = neumark_dilation(effects)
        v = dil.isometry
        assert np.abs(v.conj().T @ v - np.eye(d)).max() < 1e-10
        # projectors idempotent, orthogonal, complete
        total = np.zeros((dil.dilated_dim, dil.dilated_dim), dtype=complex)
        for p in dil.projectors:
            assert np.abs(p @ p - p).max() < 1e-12
            total += p
        assert np.abs(total - np.eye(dil.dilated_dim)).max() < 1e-12
        for i in range(len(dil.projectors)):
            for j in range(i + 1, len(dil.projectors)):
                assert np.abs(dil.projectors[i] @ dil.projectors[j]).max() < 1e-12
        assert dil.dilated_dim == sum(r for _, r in dil.blocks)


def test_not_a_povm_is_rejected():
    with pytest.raises(NotAPOVM):
        neumark_dilation([np.eye(2, dtype=complex) * 0.9])
    with pytest.raises(NotAPOVM):
        neumark_dilation([PZ, np.eye(2, dtype=complex) - PZ])  # PZ not psd


def test_ambiguous_rank_is_flagged():
    e1 = np.diag([1.0, 5e-10]).astype(complex)
    e2 = np.eye(2, dtype=complex) - e1
    with pytest.raises(RankDeficiencyAmbiguous):
        neumark_dilation([e1, e2])


# -- seesaw ----------------------------------------------------------------------

def test_seesaw_reaches_cycle_closed_forms():
    for n in (4, 5, 6):
        scenario, ineq = n_cycle(n)
        res = seesaw_max(ineq, scenario, dim=2, restarts=6, seed=1)
        want = n * math.cos(math.pi / n)
        assert abs(res.value - want) < 1e-6
        assert res.value <= want + 1e-9  # analytic ceiling for this family


def test_seesaw_chsh_joint_dimension_four():
    scenario, ineq = chsh_example()
    res = seesaw_max(ineq, scenario, dim=4, restarts=10, seed=2)
    assert abs(res.value - 2 * math.sqrt(2)) < 1e-6


def test_seesaw_model_is_consistent_with_its_value():
    scenario, ineq = n_cycle(4)
    res = seesaw_max(ineq, scenario, dim=2, restarts=6, seed=3)
    for eff_pair in res.model.effects:
        total = eff_pair[0] + eff_pair[1]
        assert np.abs(total - np.eye(2)).max() < 1e-9


def test_seesaw_requires_dichotomic_outcomes():
    from ksatlas.scenario import Inequality
    s = build_scenario(["a", "b"], [3, 2], [(0, 1)])
    ineq = Inequality((((0,), (0,), 1),), 1)
    with pytest.raises(NotDichotomic):
        seesaw_max(ineq, s, dim=2)


# -- SIC sets ----------------------------------------------------------------------

def test_pm_witness_operator_is_six_identity(pm):
    w = witness_operator(pm)
    assert np.linalg.norm(w - 6 * np.eye(4)) <= 1e-9


def test_pm_verify(pm):
    rep = verify_sic(pm, sample_states=1000, seed=0)
    assert rep.is_sic
    assert pm.mu == 4
    assert abs(rep.q_estimate - 6) < 1e-12
    assert rep.identity_deviation <= 1e-9
    # state independence: all sampled values within 1e-8 of q
    assert abs(rep.sample_min - rep.q_estimate) < 1e-8
    assert abs(rep.min_eigenvalue - 6) < 1e-12


def test_pm_is_critical(pm):
    critical, breaks = criticality_check(pm)
    assert critical and len(breaks) == 9 and all(breaks)


def test_pm_with_redundant_duplicate_is_not_critical(pm):
    # append a copy of the first observable: removing the copy changes
    # nothing, so the enlarged set cannot be critical
    s = pm.scenario
    obs0 = pm.effects[0][0] - pm.effects[0][1]
    mats = [eff[0] - eff[1] for eff in pm.effects] + [obs0]
    ids = list(s.measurements) + ["dup"]
    edges = [
        (i, j) for i in range(10) for j in range(i + 1, 10)
        if np.abs(mats[i] @ mats[j] - mats[j] @ mats[i]).max() < 1e-12
    ]
    bigger = build_scenario(ids, [2] * 10, edges)
    witness = pm.witness  # same six contexts, still sub-cliques
    sic = SICSet(4, bigger, tuple(pm.effects) + (pm.effects[0],), witness,
                 pm.mu, pm.q)
    assert verify_sic(sic).is_sic
    critical, breaks = criticality_check(sic)
    assert not critical
    assert breaks[:9] == [True] * 9 and breaks[9] is False


def test_reduced_pm_set_is_state_dependent(pm):
    reduced = remove_measurement(pm, 0)
    rep = verify_sic(reduced)
    assert not rep.is_sic
    assert rep.min_eigenvalue <= float(reduced.mu) + 1e-9
    assert reduced.mu == 4


def test_commuting_triple_is_not_sic():
    # three commuting observables witness nothing: value = classical bound
    z1 = np.kron(PZ, I2)
    z2 = np.kron(I2, PZ)
    z3 = np.kron(PZ, PZ)
    mats = [z1, z2, z3]
    s = build_scenario(["a", "b", "c"], [2] * 3, [(0, 1), (0, 2), (1, 2)])
    from ksatlas.scenario import correlator_inequality
    from ksatlas.polytope import classical_bound
    probe = correlator_inequality(s, [((0, 1, 2), 1)], 0)
    mu = classical_bound(probe, s)
    witness = correlator_inequality(s, [((0, 1, 2), 1)], mu)
    sic = SICSet(4, s, tuple(observable_effects(m) for m in mats), witness,
                 mu, 1.0)
    assert not verify_sic(sic).is_sic
    with pytest.raises(InvalidSet):
        criticality_check(sic)
