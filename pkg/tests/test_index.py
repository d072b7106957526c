import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phdae import MatFun, assemble
from phdae.exceptions import RankAssumptionError, TimeVaryingError
from phdae.generators import random_index_one, random_invertible, time_varying_phdae
from phdae.index import (BehaviorPencil, check_index_le_one, derivative_array, kernel_blocks,
                         strangeness_analysis)
from phdae.models import preset


def brute_force_level(E, A, level):
    """Hand-assembled derivative array of E x' = A x and the rank quantities at ``level``."""
    n = E.shape[0]
    k = level + 1
    M = np.zeros((k * n, k * n))
    for i in range(k):
        M[i * n:(i + 1) * n, i * n:(i + 1) * n] = E
        if i:
            M[i * n:(i + 1) * n, (i - 1) * n:i * n] = -A
    Nm = np.zeros((k * n, n))
    Nm[:n] = -A
    rank_m = np.linalg.matrix_rank(M)
    r = np.linalg.matrix_rank(np.hstack([Nm, M]))
    return M, rank_m, r


def drazin_index(E, A):
    """Index of E^ = (cE - A)^{-1} E, i.e. the differentiation index of a regular pencil."""
    n = E.shape[0]
    Eh = np.linalg.solve(0.7 * E - A, E)
    ranks = [n]
    P = np.eye(n)
    nrm = np.linalg.norm(Eh, 2)
    for k in range(1, n + 2):
        P = P @ Eh
        # round-off in the k-th power grows like ||Eh||^k
        ranks.append(np.linalg.matrix_rank(P, tol=1e-8 * max(1.0, nrm ** k)))
        if ranks[-1] == ranks[-2]:
            return len(ranks) - 2
    return n


def kronecker_pencil(rng, nd, blocks):
    """Regular pencil with an nd-dimensional ODE part and nilpotent Jordan blocks of the given sizes."""
    n = nd + sum(blocks)
    Ek = np.zeros((n, n))
    Ak = np.zeros((n, n))
    Ek[:nd, :nd] = np.eye(nd)
    Ak[:nd, :nd] = rng.standard_normal((nd, nd))
    pos = nd
    for b in blocks:
        Ak[pos:pos + b, pos:pos + b] = np.eye(b)
        for i in range(b - 1):
            Ek[pos + i, pos + i + 1] = 1.0
        pos += b
    P = random_invertible(rng, n, 5.0)
    Q = random_invertible(rng, n, 5.0)
    return P @ Ek @ Q, P @ Ak @ Q


def test_derivative_array_layout():
    p = BehaviorPencil.from_matrices(np.diag([1.0, 0.0]), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    M, Nm = derivative_array(p, 1)
    M_ref, _, _ = brute_force_level(p.E, p.A, 1)
    assert np.array_equal(M, M_ref)
    assert np.array_equal(Nm[:2], -p.A) and not Nm[2:].any()


def test_pure_ode_and_pure_algebraic_have_mu_zero(rng):
    A = rng.standard_normal((3, 3))
    ode = strangeness_analysis(BehaviorPencil.from_matrices(random_invertible(rng, 3), A))
    assert ode.success and (ode.mu, ode.a, ode.d, ode.n_hidden) == (0, 0, 3, 0)
    alg = strangeness_analysis(BehaviorPencil.from_matrices(np.zeros((3, 3)),
                                                            random_invertible(rng, 3)))
    assert alg.success and (alg.mu, alg.a, alg.d, alg.n_hidden) == (0, 3, 0, 0)
    assert ode.differentiation_index == 0 and alg.differentiation_index == 1


def test_two_by_two_pencil_against_brute_force():
    E = np.diag([1.0, 0.0])
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    # level 0: a = 1 and d = 0 but n - a - nu = 1, so it is rejected
    _, rank_m0, r0 = brute_force_level(E, A, 0)
    assert r0 - rank_m0 == 1
    # level 1 is accepted with a = 2 and d = 0
    _, rank_m1, r1 = brute_force_level(E, A, 1)
    assert (rank_m1, r1) == (2, 4)
    idx = strangeness_analysis(BehaviorPencil.from_matrices(E, A))
    assert idx.success
    assert (idx.mu, idx.r, idx.a, idx.d, idx.nu) == (1, r1, r1 - rank_m1, 0, 0)
    assert idx.levels[0]["accepted"] is False
    # x2 = x1' and 0 = -x1 force x = 0: one explicit and one hidden constraint
    assert idx.n_hidden == 1
    assert np.allclose(np.abs(idx.A3), [[0.0, 1.0]])
    assert idx.constraints.shape[0] == 2
    assert idx.differentiation_index == 2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.lists(st.integers(1, 3), min_size=1, max_size=2),
       st.integers(0, 10_000))
def test_strangeness_matches_drazin_index(nd, blocks, seed):
    rng = np.random.default_rng(seed)
    E, A = kronecker_pencil(rng, nd, blocks)
    ind = drazin_index(E, A)
    assert ind == max(blocks)
    idx = strangeness_analysis(BehaviorPencil.from_matrices(E, A), tol=1e-10)
    assert idx.success
    assert idx.mu == max(ind - 1, 0)
    assert idx.d == nd
    assert idx.a == sum(blocks)
    assert idx.n_hidden == sum(b - 1 for b in blocks)
    assert np.allclose(idx.Z1.T @ idx.Z1, np.eye(idx.d), atol=1e-12)


def test_mu_max_exhausted_reports_failure(rng):
    E, A = kronecker_pencil(rng, 1, [3])
    idx = strangeness_analysis(BehaviorPencil.from_matrices(E, A), mu_max=1)
    assert not idx.success
    assert "mu_max" in idx.message
    assert idx.differentiation_index is None


# frozen golden values: (mu, r, a, d, nu, hidden with u = 0, hidden with inputs)
GOLDEN = {
    "rlc": (1, 8, 2, 2, 0, 1, 1),
    "rlc_minimal": (1, 6, 2, 1, 0, 1, 1),
    "rlc_no_source": (0, 3, 0, 3, 0, 0, 0),
    "gas": (1, 14, 2, 5, 0, 1, 0),
    "gas_small": (1, 8, 2, 2, 0, 1, 0),
    "manipulator": (1, 16, 4, 4, 0, 2, 0),
    "acoustic": (0, 6, 0, 6, 0, 0, 0),
    "acoustic_conservative": (0, 6, 0, 6, 0, 0, 0),
    "acoustic_singular": (1, 12, 2, 4, 0, 1, 1),
}


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_preset_index_golden(name):
    s = preset(name)
    i0 = strangeness_analysis(s, include_inputs=False)
    i1 = strangeness_analysis(s, include_inputs=True)
    assert i0.success and i1.success
    got = (i0.mu, i0.r, i0.a, i0.d, i0.nu, i0.n_hidden, i1.n_hidden)
    assert got == GOLDEN[name]


def test_hidden_constraints_annihilate_consistent_states():
    # for u = 0 every consistent state lies in the null space of all constraints
    s = preset("gas")
    idx = strangeness_analysis(s, include_inputs=False)
    E, A = s.E.coeff(0), s.A.coeff(0)
    # directions x in the constraint null space
    from phdae.linalg import null_space
    X = null_space(idx.constraints)
    assert X.shape[1] == idx.d
    # the explicit equations are satisfied there
    Ze = null_space(E.T)
    assert np.allclose(Ze.T @ A @ X, 0, atol=1e-10)


def test_summary_is_serializable():
    d = strangeness_analysis(preset("rlc")).summary()
    assert set(d) >= {"mu", "r", "a", "d", "nu", "hidden_constraints", "tol"}


def test_time_varying_systems_are_refused(rng):
    with pytest.raises(TimeVaryingError):
        strangeness_analysis(time_varying_phdae(rng, 3, 1))


def test_check_index_le_one(rng):
    inst = random_index_one(rng, 2, 2, 1)
    assert check_index_le_one(inst.system)
    assert not check_index_le_one(preset("gas"))
    assert not check_index_le_one(preset("rlc"))
    assert check_index_le_one(preset("acoustic"))
    kb = kernel_blocks(inst.system, 0.0)
    assert kb["rank"] == 2 and kb["L22"].shape == (2, 2)


def test_rank_change_is_reported():
    E = MatFun(np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]))
    s = assemble({"E": E, "J": np.zeros((2, 2))}, interval=(0.0, 1.0))
    with pytest.raises(RankAssumptionError) as exc:
        check_index_le_one(s)
    assert exc.value.singular_values is not None
