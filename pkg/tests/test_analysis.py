import math

import numpy as np
import pytest
import sympy

from loccprune.analysis import (
    BoundViolation,
    analyze_measurement,
    bounds,
    chi,
    q_basis,
    rounds_lower_bound,
)
from loccprune.channels import (
    Channel,
    amplitude_damping_channel,
    dephasing_channel,
    identity_channel,
    minimal_rep,
    remix,
)
from loccprune.harness import GenSpec, generate_tree, random_channel, random_isometry
from loccprune.numerics import operator_sum


def exact_chi(kraus):
    """Rank of the stacked vec(K_i^dag K_j) over exact sympy matrices."""
    rows = []
    for a in kraus:
        for b in kraus:
            rows.append(list(a.H * b))
    return sympy.Matrix(rows).rank()


def test_chi_identity_and_dephasing():
    assert chi(minimal_rep(identity_channel((2,)))) == 1
    assert chi(minimal_rep(dephasing_channel((2,)))) == 2


def test_chi_amplitude_damping_matches_exact_rank():
    half = sympy.Rational(1, 2)
    k0 = sympy.Matrix([[1, 0], [0, sympy.sqrt(1 - half)]])
    k1 = sympy.Matrix([[0, sympy.sqrt(half)], [0, 0]])
    assert exact_chi([k0, k1]) == 4
    assert chi(minimal_rep(amplitude_damping_channel(0.5))) == 4


def test_chi_invariant_under_remixing():
    rng = np.random.default_rng(0)
    c = random_channel((2, 2), 3, rng)
    mixed = remix(c, random_isometry(7, 3, rng))
    assert chi(minimal_rep(c)) == chi(minimal_rep(mixed))


def local_dephasing():
    # dephasing on party 0 of two qubits: kappa = 2, chi = 2
    p0 = np.kron(np.diag([1.0, 0.0]), np.eye(2))
    p1 = np.kron(np.diag([0.0, 1.0]), np.eye(2))
    return Channel((2, 2), [p0, p1])


def test_bounds_non_extreme_arithmetic():
    report = bounds(minimal_rep(local_dephasing()))
    assert (report.kappa, report.chi) == (2, 2)
    assert report.thm2_bound == 4
    assert report.thm3_bounds == [6, 6]
    assert report.effective_bounds == [4, 4]
    assert not report.is_extreme


def test_bounds_extreme_qubit():
    report = bounds(minimal_rep(amplitude_damping_channel(0.5)))
    assert report.is_extreme
    assert report.effective_bounds == [4]


def test_round_bound_values():
    assert rounds_lower_bound(8, 2) == (pytest.approx(1.5), 2)
    # exact integer ceiling where log 16 / log 4 is exactly 2
    assert rounds_lower_bound(16, 2)[1] == 2
    assert rounds_lower_bound(17, 2)[1] == 3
    assert rounds_lower_bound(5, 1) == (0.0, 0)
    report = bounds(minimal_rep(local_dephasing()), n_p=8)
    assert report.round_lower_bound == pytest.approx(math.log(8) / math.log(4))
    assert report.round_lower_bound_int == 2


def test_bounds_rejects_np_below_kappa():
    with pytest.raises(ValueError):
        bounds(minimal_rep(local_dephasing()), n_p=1)


def test_q_basis_orthonormal_and_split():
    rng = np.random.default_rng(1)
    rep = minimal_rep(random_channel((2,), 3, rng))
    qb = q_basis(rep)
    flat = qb.matrices.reshape(len(qb.matrices), -1)
    assert np.allclose(flat.conj() @ flat.T, np.eye(rep.kappa ** 2), atol=1e-10)
    assert qb.chi == chi(rep)
    for q in qb.matrices[qb.chi:]:
        assert np.linalg.norm(operator_sum(q, rep.kraus)) <= 1e-8
    for q, op in zip(qb.matrices[: qb.chi], qb.operators):
        assert np.allclose(operator_sum(q, rep.kraus), op)
        assert np.linalg.norm(op) > 1e-8


def test_analyze_single_and_proportional_outcomes():
    rep = minimal_rep(amplitude_damping_channel(0.3))
    assert analyze_measurement(rep, [np.eye(2)], 0).independent_count == 1
    ana = analyze_measurement(rep, [0.4 * np.eye(2), 0.6 * np.eye(2)], 0)
    assert ana.independent_count == 1
    assert ana.reconstruction_residual < 1e-12


def test_analyze_generated_qubit_measurement():
    tree = generate_tree(GenSpec((2,), rounds=1, outcomes=2, seed=5))
    rep = tree.rep
    assert (rep.kappa, chi(rep)) == (2, 4)
    ana = analyze_measurement(rep, [c.c_matrix for c in tree.root.children], 0)
    assert ana.bound == 4
    assert ana.independent_count <= 4
    assert ana.m_matrix.shape == (2, 4)
    assert ana.reconstruction_residual < 1e-10


def test_analyze_raises_when_bound_is_broken():
    # kappa = 4, chi = 16 on two qubits: d^2 + kappa^2 - chi = 4, yet generic
    # labels (not from a valid measurement) can be 6-fold independent
    rng = np.random.default_rng(2)
    rep = minimal_rep(random_channel((2, 2), 4, rng))
    assert (rep.kappa, chi(rep)) == (4, 16)
    labels = []
    for _ in range(6):
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        labels.append(g @ g.conj().T)
    with pytest.raises(BoundViolation):
        analyze_measurement(rep, labels, 0)
