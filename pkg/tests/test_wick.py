from math import factorial, log

import numpy as np
import pytest

from pepslab import replica as rp
from pepslab.wick import wick_oracle_mc


def test_scalar_network_is_exact():
    # D = d = 1: every moment reduces to E|T|^{4Q} = (2Q)!
    P = rp.ReplicaParams(2, 1, 1, 1, 1, 1, region=(0,))
    est = wick_oracle_mc(P, 1000, 0)
    assert abs(est.log_z_0 - log(factorial(4))) < 1e-12
    assert abs(est.log_ratio) < 1e-12
    assert est.z_0_err < 1e-12 * est.z_0
    assert abs(est.log_z_0 - rp.exact_partition(P, rp.VARIANT_0).log_z) < 1e-12


def test_deterministic_and_batch_independent_seeding():
    P = rp.ReplicaParams(2, 1, 2, 2, 2, 1, region=(0,))
    a = wick_oracle_mc(P, 4000, 3, batch=1000)
    b = wick_oracle_mc(P, 4000, 3, batch=1000)
    assert a == b
    assert a.z_a_err > 0 and a.log_ratio_err > 0


def test_agrees_with_exact_partition_on_small_lattice():
    P = rp.ReplicaParams(2, 1, 2, 2, 2, 1, region=(0,))
    est = wick_oracle_mc(P, 20000, 1)
    for val, err, variant in ((est.z_a, est.z_a_err, rp.VARIANT_A),
                              (est.z_0, est.z_0_err, rp.VARIANT_0)):
        exact = np.exp(rp.exact_partition(P, variant).log_z)
        assert abs(val - exact) < 4 * err


def test_input_validation():
    with pytest.raises(ValueError):
        wick_oracle_mc(rp.ReplicaParams(2, 1, 2.5, 2, 1, 1), 10, 0)
    with pytest.raises(ValueError):
        wick_oracle_mc(rp.ReplicaParams(2, 1, 2, 2, 1, 1, bulk_field=False), 10, 0)
    with pytest.raises(ValueError):
        wick_oracle_mc(rp.ReplicaParams(2, 1, 4, 4, 4, 3), 10, 0)
