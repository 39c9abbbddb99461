import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from polyadic.circuit import Circuit, bind, cnot, cz, h, preset, rz, sx, zz
from polyadic.simulator import (MAX_QUBITS, ShotCounts, distribution, evolve, probabilities,
                                sample, statevector, tv_distance)
from strategies import angles, const_circuits

# frozen values from the dense Kronecker oracle in tests/oracles.py
XOR_W, XOR_T = [0.3, -0.7], [0.1, 0.2, 0.3, 0.4]
XOR_DIST = [0.0005018564449135873, 0.0011890045298813877, 0.19331541441899033, 0.8049937246062123]
IRIS_W, IRIS_T = [0.3, -0.7, 1.1, 2.0], [0.1, 0.2, 0.3, 0.4, -1, -2, 0.5, 0.25]
IRIS_DIST = [0.18322195404165714, 0.28780137272326484, 0.28272082813828237, 0.2462558450967906]
SKIN_W, SKIN_T = [0.3, -0.7, 1.1], [0.1, 0.2, 0.3, 0.4, -1, -2]
SKIN_DIST = [0.014602190394401865, 0.011625496537610107, 0.047576635902637186, 0.004385813693459968,
             0.29236314110584805, 0.14342100914703237, 0.3906541894239405, 0.09537152379506655]


@pytest.mark.parametrize("name, w, t, expected", [
    ("xor2q", XOR_W, XOR_T, XOR_DIST),
    ("iris2q", IRIS_W, IRIS_T, IRIS_DIST),
    ("skin3q", SKIN_W, SKIN_T, SKIN_DIST),
])
def test_presets_match_frozen_oracle(name, w, t, expected):
    bound = bind(preset(name), w, t)
    np.testing.assert_allclose(distribution(bound).probabilities, expected, atol=1e-12)
    np.testing.assert_allclose(oracles.distribution(bound), expected, atol=1e-12)


def test_empty_two_qubit():
    np.testing.assert_allclose(statevector(Circuit(2)).amplitudes, [1, 0, 0, 0])


def test_empty_one_qubit_distribution():
    assert distribution(Circuit(1)).as_dict() == {"0": 1.0, "1": 0.0}


def test_sx_half():
    d = distribution(Circuit(1, (sx(0),)))
    assert d["0"] == pytest.approx(0.5) and d["1"] == pytest.approx(0.5)


def test_cz_after_init_has_no_effect():
    a = distribution(Circuit(2, (sx(0), cz(0, 1))))
    b = distribution(Circuit(2, (sx(0),)))
    np.testing.assert_allclose(a.probabilities, b.probabilities, atol=1e-15)


def test_bit_order_qubit0_leftmost():
    # flipping qubit 0 puts all mass on "10"
    d = distribution(Circuit(2, (sx(0), sx(0))))
    assert d["10"] == pytest.approx(1.0)


def test_extended_gates():
    assert distribution(Circuit(1, (h(0),)))["0"] == pytest.approx(0.5)
    bell = distribution(Circuit(2, (sx(0), cnot(0, 1))))
    assert bell.as_dict() == pytest.approx({"00": 0.5, "01": 0.0, "10": 0.0, "11": 0.5})


@given(const_circuits(min_width=2, max_width=3, max_gates=12), angles, angles)
def test_zz_identity_for_cz(pre, a, b):
    gates = pre.gates + (sx(0), rz(0, a), sx(1), rz(1, b))
    with_cz = Circuit(pre.width, gates + (cz(0, 1), sx(0), sx(1)))
    with_zz = Circuit(pre.width, gates + (rz(0, -math.pi / 2), rz(1, -math.pi / 2), zz(0, 1),
                                          sx(0), sx(1)))
    assert tv_distance(distribution(with_cz), distribution(with_zz)) < 1e-12


@given(const_circuits(max_gates=25))
def test_amplitudes_match_dense_oracle(c):
    np.testing.assert_allclose(statevector(c).amplitudes, oracles.amplitudes(c), atol=1e-12)


@given(const_circuits(max_gates=25))
def test_norm_preserved(c):
    assert np.sum(np.abs(statevector(c).amplitudes) ** 2) == pytest.approx(1.0, abs=1e-12)


@given(const_circuits(max_gates=20), st.integers(0, 3), angles)
def test_trailing_rz_invisible(c, q, phi):
    q %= c.width
    longer = c.with_gates(c.gates + (rz(q, phi),))
    assert tv_distance(distribution(c), distribution(longer)) < 1e-12


@given(const_circuits(min_width=2, max_gates=20), st.data())
def test_trailing_cz_invisible(c, data):
    a = data.draw(st.integers(0, c.width - 1))
    b = data.draw(st.integers(0, c.width - 1).filter(lambda x: x != a))
    longer = c.with_gates(c.gates + (cz(a, b),))
    assert tv_distance(distribution(c), distribution(longer)) < 1e-12


def test_batched_matches_bound():
    c = preset("xor2q")
    rng = np.random.default_rng(0)
    w = rng.uniform(-3, 3, (5, 2))
    t = rng.uniform(-3, 3, 4)
    batch = probabilities(c, w, t)
    for row, wi in zip(batch, w):
        np.testing.assert_allclose(row, distribution(bind(c, wi, t)).probabilities, atol=1e-13)


def test_stacked_params_broadcast():
    c = preset("xor2q")
    rng = np.random.default_rng(1)
    w = rng.uniform(-3, 3, (6, 2))
    thetas = rng.uniform(-3, 3, (3, 1, 4))
    out = probabilities(c, w, thetas)
    assert out.shape == (3, 6, 4)
    np.testing.assert_allclose(out[2], probabilities(c, w, thetas[2, 0]), atol=1e-14)


def test_width_cap():
    with pytest.raises(ValueError, match="cap"):
        evolve(Circuit(MAX_QUBITS + 1))


def test_ten_qubits_supported():
    c = Circuit(10, tuple(sx(q) for q in range(10)))
    assert distribution(c).probabilities.sum() == pytest.approx(1.0)


def test_unbound_rejected():
    with pytest.raises(ValueError, match="bind"):
        distribution(preset("xor2q"))


class TestSample:
    def test_single_outcome(self):
        counts = sample(Circuit(2, (sx(1), sx(1))), 300, seed=4)
        assert counts.counts == {"01": 300}

    def test_binomial_bound(self):
        counts = sample(Circuit(1, (sx(0),)), 10 ** 6, seed=11)
        assert abs(counts["0"] / 10 ** 6 - 0.5) < 0.002

    def test_deterministic(self):
        c = bind(preset("xor2q"), XOR_W, XOR_T)
        assert sample(c, 500, seed=3) == sample(c, 500, seed=3)
        assert sample(c, 500, seed=3) != sample(c, 500, seed=4)

    @given(st.integers(1, 2000), st.integers(0, 2 ** 32 - 1))
    def test_counts_sum_to_shots(self, shots, seed):
        c = bind(preset("xor2q"), XOR_W, XOR_T)
        counts = sample(c, shots, seed)
        assert isinstance(counts, ShotCounts)
        assert sum(counts.counts.values()) == shots

    def test_zero_shots(self):
        with pytest.raises(ValueError):
            sample(Circuit(1), 0)

    def test_tv_shrinks_like_inverse_sqrt(self):
        c = bind(preset("iris2q"), IRIS_W, IRIS_T)
        exact = distribution(c)
        tv = {}
        for n in (100, 10_000, 1_000_000):
            tv[n] = np.mean([tv_distance(sample(c, n, s).frequencies(), exact) for s in range(20)])
        # each factor 100 in shots should cut TV by about 10
        assert tv[10_000] < tv[100] / 5
        assert tv[1_000_000] < tv[10_000] / 5
        assert tv[1_000_000] < 0.005
