import numpy as np
import pytest
from hypothesis import given, strategies as st

from pepslab import peps
from pepslab import stabilizer as sb
from pepslab import stabilizer_peps as sp


def _dense_profile(spec, region):
    """Boundary entropies (units of log p) from dense site tensors."""
    p, k_D, k_d = spec.p, spec.k_D, spec.k_d
    D, d = p ** k_D, p ** k_d
    n_site = 4 * k_D + k_d
    tensors = {}
    for y in range(spec.Ly):
        for x in range(spec.Lx):
            key = (spec.seed,) if spec.ensemble == sp.CLEAN else (spec.seed, x, y)
            v = sb.random_stabilizer_state(n_site, p, key).to_dense()
            tensors[(x, y)] = peps.PepsTensor(v.reshape(d, D, D, D, D))
    lat = peps.PepsLattice(spec.Lx, spec.Ly, tensors, peps.PERIODIC)
    out = []
    for y in range(1, spec.Ly + 1):
        vec = peps.dense_boundary_vector(lat, rows=y)
        rest = [x for x in range(spec.Lx) if x not in region]
        m = vec.transpose(list(region) + rest).reshape((D * D) ** len(region), -1)
        s = np.linalg.svd(m, compute_uv=False)
        out.append(np.log(np.sum(s > 1e-9 * s[0])) / np.log(p))
    return out


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("ensemble", [sp.DISORDERED, sp.CLEAN])
def test_profile_matches_dense_contraction(seed, ensemble):
    spec = sp.StabilizerPepsSpec(2, 1, 1, 3, 2, ensemble, seed)
    prof = sp.layer_profile(spec, [0])
    if prof.resamples:
        pytest.skip("first draw annihilated the network")
    assert np.allclose(prof.entropies, _dense_profile(spec, [0]), atol=1e-9)


def test_doubled_site_size():
    T = sb.random_stabilizer_state(4 * 2 + 1, 3, 0)
    dt = sp.doubled_site(T, 1)
    assert dt is sb.ZERO or dt.n_qudits == 16


def test_spec_validation():
    with pytest.raises(ValueError):
        sp.StabilizerPepsSpec(4, 1, 1, 4, 2)
    with pytest.raises(ValueError):
        sp.StabilizerPepsSpec(3, 1, 1, 1, 2)
    with pytest.raises(ValueError):
        sp.StabilizerPepsSpec(3, 1, 1, 4, 2, ensemble="other")
    with pytest.raises(ValueError):
        sp.layer_profile(sp.StabilizerPepsSpec(3, 1, 1, 4, 2), [5])


def test_trivial_bonds_give_zero_entropy():
    prof = sp.layer_profile(sp.StabilizerPepsSpec(3, 0, 1, 4, 3))
    assert prof.entropies == [0.0, 0.0, 0.0]


def test_profile_is_deterministic():
    spec = sp.StabilizerPepsSpec(5, 2, 1, 6, 4, sp.DISORDERED, 3)
    assert sp.layer_profile(spec).entropies == sp.layer_profile(spec).entropies


def test_cut_count():
    spec = sp.StabilizerPepsSpec(3, 1, 1, 6, 2)
    assert sp.layer_profile(spec).n_cuts == 2
    assert sp.layer_profile(spec, [0, 2]).n_cuts == 4
    assert sp.layer_profile(spec, range(6)).n_cuts == 0


@given(st.integers(0, 10 ** 6), st.sampled_from([2, 3, 5]), st.integers(1, 2))
def test_entropy_bounds_and_purity(seed, p, k_D):
    Lx, Ly = 6, 4
    spec = sp.StabilizerPepsSpec(p, k_D, 1, Lx, Ly, sp.DISORDERED, seed)
    region = [0, 1, 2]
    S = sp.layer_profile(spec, region).entropies
    S_c = sp.layer_profile(spec, [3, 4, 5]).entropies
    # the boundary state is pure, so complementary regions agree
    assert S == S_c
    w = 2 * k_D
    for y, s in enumerate(S, start=1):
        assert s == round(s)
        assert 0 <= s <= w * len(region)
        # min cut through the horizontal bonds at both domain-wall ends
        assert s <= 2 * w * y
