import numpy as np
import pytest
from hypothesis import given, strategies as st

from pepslab import finite, peps
from pepslab.bmps import renyi_entropy


def _dense_entropy(vec, cut):
    m = vec.reshape(int(np.prod(vec.shape[:cut])), -1)
    s = np.linalg.svd(m, compute_uv=False)
    s = s[s > 1e-14 * s[0]]
    return renyi_entropy(s / np.linalg.norm(s), 1)


@given(st.integers(0, 10 ** 6), st.integers(1, 3), st.integers(1, 3))
def test_exact_norm_matches_dense(seed, Lx, Ly):
    lat = peps.sample_disordered(Lx, Ly, 2, 2, seed)
    ref = peps.dense_norm(lat)
    val = finite.finite_norm(lat)
    assert abs(val - ref) < 1e-9 * ref


def test_norm_of_3x3_network():
    lat = peps.sample_disordered(3, 3, 2, 2, 1)
    ref = peps.dense_norm(lat)
    assert abs(finite.finite_norm(lat, chi=None) - ref) < 1e-9 * ref
    # chi = D^(2 * min(x, Lx - x)) is already exact for three columns
    assert abs(finite.finite_norm(lat, chi=16) - ref) < 1e-9 * ref


def test_overlap_matches_dense():
    a = peps.sample_disordered(3, 2, 2, 2, 1)
    b = peps.sample_disordered(3, 2, 2, 2, 2)
    ref = np.vdot(peps.dense_state(b), peps.dense_state(a))
    val = finite.finite_norm(a, other=b)
    assert abs(val - ref) < 1e-9 * abs(ref)


def test_log_norm_is_overflow_safe():
    lat = peps.clean_lattice(peps.PepsTensor(30.0 * peps.sample_clean(2, 2, 0).tensor), 4, 4)
    log_n = finite.finite_log_norm(lat, chi=16)
    assert np.isfinite(log_n.real)
    small = peps.clean_lattice(peps.sample_clean(2, 2, 0), 4, 4)
    ref = finite.finite_log_norm(small, chi=16)
    assert abs(log_n.real - ref.real - 16 * 2 * np.log(30.0)) < 1e-8


def test_entropy_profile_matches_dense_boundary():
    lat = peps.sample_disordered(4, 4, 2, 2, 5)
    prof = finite.finite_entropy_profile(lat, None)
    assert len(prof) == 4
    for y in range(1, 5):
        vec = peps.dense_boundary_vector(lat, rows=y)
        assert abs(prof[y - 1] - _dense_entropy(vec, 2)) < 1e-8


def test_entropy_profile_off_centre_cut():
    lat = peps.sample_disordered(3, 2, 2, 2, 6)
    prof = finite.finite_entropy_profile(lat, None, cut_position=1)
    for y in (1, 2):
        assert abs(prof[y - 1] - _dense_entropy(peps.dense_boundary_vector(lat, rows=y), 1)) < 1e-8
    with pytest.raises(ValueError):
        finite.finite_entropy_profile(lat, None, cut_position=3)


def test_overlap_profile_at_zero_perturbation_is_norm_profile():
    lat = peps.sample_disordered(4, 3, 2, 2, 2)
    same = peps.perturb_lattice(lat, 0.0, 9)
    a = finite.finite_entropy_profile(lat, 8)
    b = finite.finite_entropy_profile(lat, 8, other=same)
    assert np.max(np.abs(np.array(a) - np.array(b))) < 1e-12


def test_single_column_profile():
    lat = peps.sample_disordered(1, 3, 2, 2, 0)
    assert finite.finite_entropy_profile(lat, 4) == [0.0, 0.0, 0.0]


def test_truncation_bounds_entropy():
    lat = peps.sample_disordered(6, 4, 2, 2, 3)
    chi = 4
    prof = finite.finite_entropy_profile(lat, chi)
    assert max(prof) <= np.log(chi) + 1e-12
    state = finite.contract_rows(finite.lattice_rows(lat), chi)
    assert max(t.shape[2] for t in state.tensors) <= chi
    assert state.discarded[-1] > 0


def test_schmidt_values_are_normalised():
    lat = peps.sample_disordered(4, 2, 2, 2, 4)
    state = finite.contract_rows(finite.lattice_rows(lat), None)
    s = finite.schmidt_values(state.tensors, 2)
    assert abs(np.sum(s ** 2) - 1) < 1e-12
    with pytest.raises(ValueError):
        finite.schmidt_values(state.tensors, 0)


def test_first_row_must_be_sliced():
    lat = peps.sample_disordered(2, 2, 2, 2, 0)
    rows = finite.lattice_rows(lat)
    with pytest.raises(Exception):
        finite.contract_rows(rows[1:], None)


def test_periodic_lattices_are_rejected():
    lat = peps.sample_disordered(3, 2, 2, 2, 0, boundary=peps.PERIODIC)
    with pytest.raises(ValueError):
        finite.finite_norm(lat)


@pytest.mark.parametrize("site", [(0, 0), (1, 1), (2, 0), (1, 2)])
def test_single_site_rdm_matches_dense(site):
    lat = peps.sample_disordered(3, 3, 2, 2, 7)
    rho = finite.finite_reduced_density_matrix(lat, site)
    ref = peps.dense_reduced_density_matrix(lat, [site])
    assert np.max(np.abs(rho - ref)) < 1e-9
