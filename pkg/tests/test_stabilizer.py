import numpy as np
import pytest
from hypothesis import given, strategies as st

from pepslab import stabilizer as sb


def _is_stabilized(t, v):
    for k in range(t.n_generators):
        g = t.generator(k).matrix()
        if np.linalg.norm(g @ v - v) > 1e-9:
            return False
    return True


def _same_up_to_phase(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return abs(abs(np.vdot(a, b)) - 1) < 1e-9


def _apply_bell_projector(v, p, N, i, j):
    psi = v.reshape((p,) * N)
    out = np.zeros_like(psi)
    # <Phi|_{ij} psi, then |Phi>_{ij}
    contracted = np.einsum(np.moveaxis(psi, [i, j], [0, 1]), [0, 0, Ellipsis], [Ellipsis])
    moved = np.moveaxis(out, [i, j], [0, 1])
    for k in range(p):
        moved[k, k] = contracted / p
    return np.moveaxis(moved, [0, 1], [i, j]).reshape(-1)


def test_pauli_commutation_phase():
    p = 3
    X = sb.QuditPauli.single(p, 1, "X", 0).matrix()
    Z = sb.QuditPauli.single(p, 1, "Z", 0).matrix()
    w = np.exp(2j * np.pi / p)
    assert np.allclose(Z @ X, w * X @ Z)
    a = sb.QuditPauli.single(p, 1, "Z", 0)
    b = sb.QuditPauli.single(p, 1, "X", 0)
    assert a.symplectic(b) == 1


def test_non_prime_dimension_rejected():
    with pytest.raises(sb.StabilizerError):
        sb.computational_zero(2, 4)


def test_tableau_validation():
    with pytest.raises(sb.StabilizerError):
        sb.StabilizerTableau(2, [[1], [0]], [[0], [1]], [0, 0])  # X and Z anticommute
    with pytest.raises(sb.StabilizerError):
        sb.StabilizerTableau(2, [[0, 0], [0, 0]], [[1, 0], [1, 0]], [0, 0])
    with pytest.raises(sb.StabilizerError):
        sb.StabilizerTableau(2, [[1]], [[1]], [0])  # XZ is not Hermitian


@pytest.mark.parametrize("p", [2, 3, 5])
def test_bell_pair_dense(p):
    v = sb.bell_pair(p).to_dense()
    ref = np.zeros(p * p)
    ref[[k * p + k for k in range(p)]] = 1
    assert _same_up_to_phase(v, ref)


@given(st.sampled_from([2, 3]), st.integers(1, 4), st.integers(0, 10 ** 6))
def test_random_states_are_stabilized(p, N, seed):
    if p ** N > 256:
        N = 3
    t = sb.random_stabilizer_state(N, p, seed)
    assert t.n_generators == N
    t.validate()
    assert _is_stabilized(t, t.to_dense())


def test_random_qubit_states_are_uniform():
    # the six single-qubit stabilizer states, each with probability 1/6
    refs = [np.array(v, complex) / np.linalg.norm(v) for v in
            ([1, 0], [0, 1], [1, 1], [1, -1], [1, 1j], [1, -1j])]
    counts = np.zeros(6)
    n = 1800
    for s in range(n):
        v = sb.random_stabilizer_state(1, 2, s).to_dense()
        k = [i for i, r in enumerate(refs) if _same_up_to_phase(v, r)]
        assert len(k) == 1
        counts[k[0]] += 1
    chi2 = np.sum((counts - n / 6) ** 2 / (n / 6))
    assert chi2 < 20.5  # 0.1% quantile of chi^2 with 5 dof


def test_random_state_determinism():
    a = sb.random_stabilizer_state(5, 3, (1, 2))
    b = sb.random_stabilizer_state(5, 3, (1, 2))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.phases, b.phases)


def test_group_element_matches_matrix_product():
    t = sb.random_stabilizer_state(3, 3, 4)
    g = t.group_element([2, 1, 0]).matrix()
    g0, g1 = t.generator(0).matrix(), t.generator(1).matrix()
    assert np.allclose(g, g0 @ g0 @ g1)


@given(st.sampled_from([2, 3]), st.integers(0, 10 ** 6))
def test_measure_matches_projector(p, seed):
    N = 3
    t = sb.random_stabilizer_state(N, p, seed)
    rng = np.random.default_rng(seed)
    x, z = rng.integers(0, p, N), rng.integers(0, p, N)
    if not np.any(x) and not np.any(z):
        x[0] = 1
    phase = int(x @ z) % 2 if p == 2 else 0
    P = sb.QuditPauli(p, x, z, phase)
    M = P.matrix()
    proj = sum(np.linalg.matrix_power(M, k) for k in range(p)) / p
    v = proj @ t.to_dense()
    res = sb.measure(t, P)
    if np.linalg.norm(v) < 1e-9:
        assert res is sb.ZERO
    else:
        assert res is not sb.ZERO
        assert _same_up_to_phase(res.to_dense(), v)


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]))
def test_forced_bell_projection_matches_dense(seed, p):
    N = 4 if p == 2 else 3
    t = sb.random_stabilizer_state(N, p, seed)
    i, j = 0, N - 1
    v = _apply_bell_projector(t.to_dense(), p, N, i, j)
    res = sb.forced_bell_project(t, i, j)
    if np.linalg.norm(v) < 1e-9:
        assert res is sb.ZERO
    else:
        assert _same_up_to_phase(res.to_dense(), v)


@given(st.integers(0, 10 ** 6))
def test_contract_bond_matches_tensor_contraction(seed):
    p = 2
    a = sb.random_stabilizer_state(3, p, (seed, 0))
    b = sb.random_stabilizer_state(3, p, (seed, 1))
    res = sb.contract_bond(a, b, [(2, 0)])
    A = a.to_dense().reshape(p, p, p)
    B = b.to_dense().reshape(p, p, p)
    ref = np.einsum("abk,kcd->abcd", A, B).reshape(-1)
    if np.linalg.norm(ref) < 1e-9:
        assert res is sb.ZERO
    else:
        assert res.n_qudits == 4
        assert _same_up_to_phase(res.to_dense(), ref)


def test_contract_bond_of_bell_pairs_is_bell_pair():
    p = 5
    res = sb.contract_bond(sb.bell_pair(p), sb.bell_pair(p), [(1, 0)])
    assert _same_up_to_phase(res.to_dense(), sb.bell_pair(p).to_dense())


def test_project_zero_and_discard():
    t = sb.tensor_product(sb.bell_pair(3), sb.computational_zero(1, 3))
    rest = sb.discard_qudits(t, [2])
    assert _same_up_to_phase(rest.to_dense(), sb.bell_pair(3).to_dense())
    with pytest.raises(sb.StabilizerError):
        sb.discard_qudits(t, [0])
    half = sb.project_zero(sb.bell_pair(3), 0)
    assert _same_up_to_phase(half.to_dense(), np.eye(9)[0])


def test_zero_state_is_falsy_singleton():
    assert not sb.ZERO
    assert sb.ZERO is type(sb.ZERO)()


def test_incompatible_projection_gives_zero():
    t = sb.computational_zero(2, 3)
    z = sb.QuditPauli(3, [0, 0], [1, 0], 1)  # w Z_0 has eigenvalue w on |0>
    assert sb.measure(t, z) is sb.ZERO


def _dense_entropy(v, p, N, region):
    psi = np.moveaxis(v.reshape((p,) * N), list(region), list(range(len(region))))
    m = psi.reshape(p ** len(region), -1)
    rank = np.sum(np.linalg.svd(m, compute_uv=False) > 1e-9)
    return np.log(rank) / np.log(p)


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3]))
def test_entropy_matches_partial_trace_rank(seed, p):
    N = 5 if p == 2 else 4
    t = sb.random_stabilizer_state(N, p, seed)
    v = t.to_dense()
    for region in ([0], [0, 1], [1, 3], [0, 2, N - 1]):
        S = sb.entanglement_entropy(t, region)
        assert S == round(S)
        assert abs(S - _dense_entropy(v, p, N, region)) < 1e-9


def test_entropy_edge_cases():
    t = sb.bell_pair(2)
    assert sb.entanglement_entropy(t, []) == 0.0
    assert sb.entanglement_entropy(t, [0, 1]) == 0.0
    assert sb.entanglement_entropy(t, [0]) == 1.0
    with pytest.raises(sb.StabilizerError):
        sb.entanglement_entropy(t, [2])


def test_conjugate_state():
    t = sb.random_stabilizer_state(2, 3, 8)
    assert _same_up_to_phase(sb.conjugate(t).to_dense(), t.to_dense().conj())
