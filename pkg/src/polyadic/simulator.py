"""
Dense statevector simulation, exact outcome distributions and shot sampling.

Bit order: amplitude index ``b`` reads as a bitstring whose leftmost
character is qubit 0, i.e. qubit 0 is the most significant bit.

Every gate is applied as an O(2^N) update on a batch of statevectors, so a
symbolic circuit can be evaluated for many feature vectors (or parameter
vectors) in one pass. Randomness comes from ``numpy.random.default_rng``
(PCG64) seeded by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Const, Input

MAX_QUBITS = 16

_R2 = 1 / np.sqrt(2)
# zz = exp(-i pi/4 Z(x)Z); fixed by Cz == Rz(-pi/2) (x) Rz(-pi/2) . zz up to global phase
_ZZ_EVEN = np.exp(-0.25j * np.pi)
_ZZ_ODD = np.exp(0.25j * np.pi)


@dataclass(frozen=True)
class StateVector:
    width: int
    amplitudes: np.ndarray

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class Distribution:
    width: int
    probabilities: np.ndarray

    def __getitem__(self, bitstring: str) -> float:
        return float(self.probabilities[bitstring_index(bitstring, self.width)])

    def as_dict(self) -> dict[str, float]:
        return {bitstring(i, self.width): float(p) for i, p in enumerate(self.probabilities)}


@dataclass(frozen=True)
class ShotCounts:
    width: int
    shots: int
    counts: dict = field(default_factory=dict)

    def __getitem__(self, bitstring: str) -> int:
        return self.counts.get(bitstring, 0)

    def frequencies(self) -> np.ndarray:
        freq = np.zeros(2 ** self.width)
        for s, c in self.counts.items():
            freq[bitstring_index(s, self.width)] = c
        return freq / self.shots


def bitstring(index: int, width: int) -> str:
    return format(index, f"0{width}b")


def bitstring_index(s: str, width: int) -> int:
    if len(s) != width or set(s) - {"0", "1"}:
        raise ValueError(f"{s!r} is not a {width}-bit string")
    return int(s, 2)


def _pair_index(nb: int, n: int, qubits, values) -> tuple:
    """Slice selecting the amplitudes where ``qubits`` hold ``values``."""
    index = [slice(None)] * (nb + n)
    for q, v in zip(qubits, values):
        index[nb + q] = v
    return tuple(index)


def _is_box(gates, i: int) -> bool:
    if i + 2 >= len(gates):
        return False
    a, b, c = gates[i:i + 3]
    return (a.kind == "sx" and b.kind == "rz" and c.kind == "sx"
            and a.qubits == b.qubits == c.qubits)


def _resolve(angle, inputs, params):
    if isinstance(angle, Const):
        return angle.value
    if isinstance(angle, Input):
        return inputs[..., angle.index]
    return params[..., angle.index]


def _plan(gates) -> list:
    """Group sx Rz sx runs on one qubit into single "box" steps."""
    steps, i = [], 0
    while i < len(gates):
        if _is_box(gates, i):
            steps.append(("box", gates[i].qubits, gates[i + 1].angle))
            i += 3
        else:
            steps.append((gates[i].kind, gates[i].qubits, gates[i].angle))
            i += 1
    return steps


def _run(circuit: Circuit, inputs, params):
    """Amplitudes up to a global phase, plus that phase.

    Circuits made only of boxes and Cz have real amplitudes once the factor
    -i of every box is pulled out, so they are simulated in real arithmetic.
    """
    n = circuit.width
    if n > MAX_QUBITS:
        raise ValueError(f"width {n} exceeds the simulator cap of {MAX_QUBITS} qubits")
    inputs = np.zeros((1, 0)) if inputs is None else np.atleast_2d(np.asarray(inputs, dtype=float))
    params = np.zeros(0) if params is None else np.asarray(params, dtype=float)
    if inputs.shape[-1] != circuit.num_inputs:
        raise ValueError(f"expected {circuit.num_inputs} input angles, got {inputs.shape[-1]}")
    if params.shape[-1] != circuit.num_params:
        raise ValueError(f"expected {circuit.num_params} model parameters, got {params.shape[-1]}")
    batch = np.broadcast_shapes(inputs.shape[:-1], params.shape[:-1])
    batch = batch or (1,)
    nb = len(batch)
    steps = _plan(circuit.gates)
    real = all(kind in ("box", "cz") for kind, _, _ in steps)
    state = np.zeros(batch + (2 ** n,), dtype=float if real else complex)
    state[..., 0] = 1.0
    phase = 1.0 + 0j
    # view with one axis per qubit; slicing it gives views, not copies
    psi = state.reshape(batch + (2,) * n)
    lead = (slice(None),) * nb
    for kind, qubits, angle in steps:
        q = qubits[0]
        s0 = lead + (slice(None),) * q + (0,)
        s1 = lead + (slice(None),) * q + (1,)
        if kind == "box":
            # sx Rz(phi) sx == -i [[sin(phi/2), cos(phi/2)], [cos(phi/2), -sin(phi/2)]]
            phi = np.asarray(_resolve(angle, inputs, params))
            s, c = np.sin(0.5 * phi), np.cos(0.5 * phi)
            if s.ndim:
                s = s.reshape(s.shape + (1,) * (n - 1))
                c = c.reshape(s.shape)
            a0 = psi[s0].copy()
            a1 = psi[s1]
            psi[s0] = s * a0 + c * a1
            psi[s1] = c * a0 - s * a1
            phase *= -1j
        elif kind == "rz":
            phi = np.asarray(_resolve(angle, inputs, params))
            e = np.exp(-0.5j * phi)
            if e.ndim:
                e = e.reshape(e.shape + (1,) * (n - 1))
            psi[s0] *= e
            psi[s1] *= np.conj(e)
        elif kind == "sx" or kind == "h":
            a0 = psi[s0].copy()
            a1 = psi[s1]
            if kind == "sx":
                psi[s0] = _R2 * (a0 - 1j * a1)
                psi[s1] = _R2 * (a1 - 1j * a0)
            else:
                psi[s0] = _R2 * (a0 + a1)
                psi[s1] = _R2 * (a0 - a1)
        elif kind == "cz":
            psi[_pair_index(nb, n, qubits, (1, 1))] *= -1
        elif kind == "cnot":
            i10, i11 = _pair_index(nb, n, qubits, (1, 0)), _pair_index(nb, n, qubits, (1, 1))
            tmp = psi[i10].copy()
            psi[i10] = psi[i11]
            psi[i11] = tmp
        elif kind == "zz":
            for bits_ab in ((0, 0), (1, 1)):
                psi[_pair_index(nb, n, qubits, bits_ab)] *= _ZZ_EVEN
            for bits_ab in ((0, 1), (1, 0)):
                psi[_pair_index(nb, n, qubits, bits_ab)] *= _ZZ_ODD
        else:  # pragma: no cover - Gate validates kinds
            raise ValueError(f"unknown gate kind {kind!r}")
    return state, phase


def evolve(circuit: Circuit, inputs=None, params=None) -> np.ndarray:
    """Run ``circuit`` from |0...0> for a batch of angle bindings.

    ``inputs`` has shape (B, d) and ``params`` shape (p,), (B, p) or any shape
    broadcasting against the input batch. Returns amplitudes of shape (B, 2^N).
    A fully bound circuit with no arrays given returns shape (1, 2^N).
    """
    state, phase = _run(circuit, inputs, params)
    return state * phase


def _require_bound(circuit: Circuit):
    if not circuit.is_bound:
        raise ValueError("circuit has unbound input/parameter slots; call bind() first")


def statevector(bound: Circuit) -> StateVector:
    _require_bound(bound)
    return StateVector(bound.width, evolve(bound)[0])


def distribution(bound: Circuit) -> Distribution:
    return Distribution(bound.width, statevector(bound).probabilities())


def probabilities(circuit: Circuit, inputs=None, params=None) -> np.ndarray:
    """Outcome probabilities for a batch of bindings, shape (B, 2^N)."""
    state, _ = _run(circuit, inputs, params)
    if np.isrealobj(state):
        return state * state
    return state.real ** 2 + state.imag ** 2


def sample_indices(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Per-row outcome counts by inverse-CDF sampling; ``probs`` is (B, K), result (B, K) ints."""
    if shots < 1:
        raise ValueError(f"number of shots must be >= 1, got {shots}")
    probs = np.atleast_2d(probs)
    rows, k = probs.shape
    cdf = np.cumsum(probs, axis=1)
    cdf /= cdf[:, -1:]
    counts = np.zeros((rows, k), dtype=np.int64)
    chunk = max(1, 2_000_000 // (shots * k))
    for start in range(0, rows, chunk):
        c = cdf[start:start + chunk]
        u = rng.random((len(c), shots))
        outcome = (u[:, :, None] >= c[:, None, :-1]).sum(axis=2)
        offsets = (np.arange(len(c)) * k)[:, None]
        counts[start:start + chunk] = np.bincount(
            (outcome + offsets).ravel(), minlength=len(c) * k).reshape(len(c), k)
    return counts


def sample(bound: Circuit, shots: int, seed=None) -> ShotCounts:
    """Draw ``shots`` measurement outcomes; identical seeds give identical counts."""
    if shots < 1:
        raise ValueError(f"number of shots must be >= 1, got {shots}")
    dist = distribution(bound)
    counts = sample_indices(dist.probabilities, shots, np.random.default_rng(seed))[0]
    return ShotCounts(bound.width, shots,
                      {bitstring(i, bound.width): int(c) for i, c in enumerate(counts) if c})


def tv_distance(p, q) -> float:
    p = p.probabilities if isinstance(p, Distribution) else np.asarray(p)
    q = q.probabilities if isinstance(q, Distribution) else np.asarray(q)
    return 0.5 * float(np.abs(p - q).sum())
