"""
Translation of bound {sx, Rz, Cz} circuits to other native two-qubit gates.

- ``cz``: unchanged.
- ``zz``: ``Cz(i, j) -> Rz(i, -pi/2) Rz(j, -pi/2) ZZ(i, j)``.
- ``cnot``: ``Cz(i, j) -> H(t) CNOT(c, t) H(t)`` and every H is absorbed into
  the neighbouring one-qubit runs on t, so no pulse is added. With this
  package's conventions (sx = Rx(pi/2), Rz(p) = diag(e^{-ip/2}, e^{ip/2}))
  the absorption identities, in time order, are::

      H  [sx Rz(p) sx]  H   ==  sx Rz(pi - p) sx
         [sx Rz(p) sx]  H   ==  sx Rz(p + pi/2) sx Rz(pi)
      H  [sx Rz(p) sx]      ==  Rz(pi) sx Rz(p + pi/2) sx

  Runs that are not a single phi-box are re-decomposed numerically with the
  same number of sx gates.

The CNOT target of each Cz is chosen greedily left to right: the higher
qubit when both neighbouring runs on it can absorb an H, otherwise the lower.
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .circuit import Circuit, Const, cnot, rz, sx, zz
from .passes import decompose, optimize, qubit_segments, segment_unitary, sx_needed, wrap_angle
from .simulator import Distribution, distribution


class TargetGateSet(str, Enum):
    CZ = "cz"
    CNOT = "cnot"
    ZZ = "zz"


class TranslationError(ValueError):
    pass


_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_SX_INV = np.array([[1 - 1j, 1 + 1j], [1 + 1j, 1 - 1j]]) / 2


def simulate_extended(bound: Circuit) -> Distribution:
    """Outcome distribution of a bound circuit that may contain h, cnot and zz."""
    return distribution(bound)


def _is_phi_box(run) -> bool:
    return (len(run) == 3 and run[0].kind == "sx" and run[1].kind == "rz"
            and run[2].kind == "sx")


def _absorb(run, q, before: bool, after: bool):
    """Gates equal to ``H^after . run . H^before`` with as many sx as ``run``."""
    if not (before or after):
        return list(run)
    if _is_phi_box(run):
        p = run[1].angle.value
        if before and after:
            return [sx(q), rz(q, wrap_angle(math.pi - p)), sx(q)]
        if after:
            return [sx(q), rz(q, wrap_angle(p + math.pi / 2)), sx(q), rz(q, math.pi)]
        return [rz(q, math.pi), sx(q), rz(q, wrap_angle(p + math.pi / 2)), sx(q)]
    u = segment_unitary(run)
    if after:
        u = _H @ u
    if before:
        u = u @ _H
    return _resynthesize(u, q, sum(g.kind == "sx" for g in run))


def _resynthesize(u: np.ndarray, q: int, n_sx: int):
    """Gates equal to ``u`` using exactly ``n_sx`` sx (possible whenever n_sx >= 2)."""
    if n_sx < 2:
        return decompose(u, q)
    extra = n_sx - 2
    # u = D . SX^extra, so the extra sx come first in time
    return [sx(q)] * extra + decompose(u @ np.linalg.matrix_power(_SX_INV, extra), q,
                                       force_two=True)


def _can_absorb(run, before: bool, after: bool) -> bool:
    if not (before or after):
        return True
    n_sx = sum(g.kind == "sx" for g in run)
    if n_sx >= 2:
        return True
    u = segment_unitary(run)
    if after:
        u = _H @ u
    if before:
        u = u @ _H
    return sx_needed(u) == n_sx


def _to_cnot(circuit: Circuit) -> Circuit:
    gates = list(circuit.gates)
    segs = qubit_segments(gates, circuit.width)
    runs = {q: [[gates[i] for i in seg] for seg in s] for q, s in segs.items()}
    # h_start[q][k] / h_end[q][k]: an H sits at the start / end of run k on qubit q
    h_start = {q: [False] * len(s) for q, s in runs.items()}
    h_end = {q: [False] * len(s) for q, s in runs.items()}
    position = {q: 0 for q in runs}
    plan = []
    for g in gates:
        if g.kind != "cz":
            continue
        a, b = g.qubits
        for t in (b, a):
            k = position[t]
            if (_can_absorb(runs[t][k], h_start[t][k], True)
                    and _can_absorb(runs[t][k + 1], True, h_end[t][k + 1])):
                h_end[t][k] = True
                h_start[t][k + 1] = True
                plan.append((a + b - t, t))
                break
        else:
            raise TranslationError(
                f"cannot absorb the Hadamard gates around {g}: neither qubit has "
                "enough sx gates next to it (run passes.optimize or use maximal-form input)")
        position[a] += 1
        position[b] += 1

    new_runs = {q: [_absorb(run, q, h_start[q][k], h_end[q][k]) for k, run in enumerate(rs)]
                for q, rs in runs.items()}
    out = []
    position = {q: 0 for q in runs}
    for control, target in plan:
        for q in sorted((control, target)):
            out.extend(new_runs[q][position[q]])
            position[q] += 1
        out.append(cnot(control, target))
    for q in sorted(runs):
        out.extend(new_runs[q][position[q]])
    return circuit.with_gates(out)


def _to_zz(circuit: Circuit) -> Circuit:
    out = []
    for g in circuit.gates:
        if g.kind == "cz":
            i, j = g.qubits
            out += [rz(i, -math.pi / 2), rz(j, -math.pi / 2), zz(i, j)]
        else:
            out.append(g)
    return circuit.with_gates(out)


def translate(bound: Circuit, target, normalize: bool = False) -> Circuit:
    """Rewrite a bound native circuit for ``target`` ('cz', 'cnot' or 'zz').

    Pulse counts are preserved. ``normalize`` runs :func:`passes.optimize`
    first, which may itself remove pulses.
    """
    target = TargetGateSet(target)
    if not bound.is_native:
        raise TranslationError("translation input must use only sx, rz and cz gates")
    if not all(isinstance(g.angle, Const) for g in bound.gates if g.kind == "rz"):
        raise TranslationError("translation needs a bound circuit; call bind() first")
    if normalize:
        bound, _ = optimize(bound)
    if target is TargetGateSet.CZ:
        return bound
    if target is TargetGateSet.ZZ:
        return _to_zz(bound)
    return _to_cnot(bound)
