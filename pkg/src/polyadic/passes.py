"""
Peephole optimization of {sx, Rz, Cz} circuits.

Rules (all preserve the measured outcome distribution):

- ``remove_initial``: Rz on a qubit still in |0>, Cz touching a qubit still in |0>
- ``remove_final``: Rz with nothing after it, Cz with nothing after it on either qubit
- ``cancel_double_cz``: Cz . Cz on the same pair with nothing in between
- ``merge_rz``: adjacent constant Rz on one qubit become one Rz
- ``commute_rz``: an Rz just before a Cz on its qubit moves past the Cz (both diagonal)
- ``resynthesize``: a constant single-qubit segment using more sx than its unitary
  needs is replaced by the shortest ``Rz sx Rz sx Rz`` form

``optimize`` runs them to a fixpoint. Symbolic Rz slots are never merged or
resynthesized, only moved or deleted by the structural rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, Const, Gate, PulseCount, pulse_count, rz, sx
from .simulator import probabilities

ZERO_ANGLE_TOL = 1e-12
# tolerance on |U00|^2 when deciding how many sx a segment needs
SHAPE_TOL = 1e-12

_TWO_PI = 2 * math.pi


def wrap_angle(angle: float) -> float:
    """Reduce to (-pi, pi]."""
    a = math.remainder(angle, _TWO_PI)
    return math.pi if a <= -math.pi else a


def _is_zero_angle(angle: float) -> bool:
    return abs(math.remainder(angle, _TWO_PI)) < ZERO_ANGLE_TOL


def _require_native(circuit: Circuit):
    if not circuit.is_native:
        raise ValueError("optimization passes accept only sx, rz and cz gates")


# --- structural rules -------------------------------------------------------
# Each _rule returns (new gate list, number of applications).

def _remove_initial(gates):
    touched, out, n = set(), [], 0
    for g in gates:
        if g.kind == "rz" and g.qubits[0] not in touched:
            n += 1
        elif g.kind == "cz" and not touched.issuperset(g.qubits):
            n += 1
        else:
            touched.update(g.qubits)
            out.append(g)
    return out, n


def _remove_final(gates):
    later, out, n = set(), [], 0
    for g in reversed(gates):
        if g.kind == "rz" and g.qubits[0] not in later:
            n += 1
        elif g.kind == "cz" and later.isdisjoint(g.qubits):
            n += 1
        else:
            later.update(g.qubits)
            out.append(g)
    out.reverse()
    return out, n


def _cancel_double_cz(gates):
    out, n = [], 0
    last = {}
    for g in gates:
        if g.kind == "cz":
            a, b = g.qubits
            i = last.get(a)
            if i is not None and i == last.get(b) and out[i] == g:
                out[i] = None
                n += 1
                # restore per-qubit pointers to the gates preceding the cancelled Cz
                for q in (a, b):
                    last[q] = next((j for j in range(i - 1, -1, -1)
                                    if out[j] is not None and q in out[j].qubits), None)
                continue
        out.append(g)
        for q in g.qubits:
            last[q] = len(out) - 1
    return [g for g in out if g is not None], n


def _merge_rz(gates):
    out, n = [], 0
    last = {}
    for g in gates:
        if g.kind == "rz" and isinstance(g.angle, Const):
            q = g.qubits[0]
            i = last.get(q)
            if i is not None and out[i].kind == "rz" and isinstance(out[i].angle, Const):
                out[i] = rz(q, wrap_angle(out[i].angle.value + g.angle.value))
                n += 1
                continue
        out.append(g)
        for q in g.qubits:
            last[q] = len(out) - 1
    return out, n


def _drop_zero_rz(gates):
    out = [g for g in gates
           if not (g.kind == "rz" and isinstance(g.angle, Const) and _is_zero_angle(g.angle.value))]
    return out, len(gates) - len(out)


def _commute_rz(gates):
    gates = list(gates)
    n = 0
    i = 0
    while i < len(gates):
        g = gates[i]
        if g.kind == "rz":
            q = g.qubits[0]
            j = next((k for k in range(i + 1, len(gates)) if q in gates[k].qubits), None)
            if j is not None and gates[j].kind == "cz":
                del gates[i]
                gates.insert(j, g)
                n += 1
                continue
        i += 1
    return gates, n


# --- single-qubit segments ----------------------------------------------------

_SX = np.array([[1, -1j], [-1j, 1]]) / np.sqrt(2)


def _rz_matrix(phi):
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def segment_unitary(gates) -> np.ndarray:
    """2x2 unitary of a time-ordered run of constant one-qubit gates."""
    u = np.eye(2, dtype=complex)
    for g in gates:
        m = _SX if g.kind == "sx" else _rz_matrix(g.angle.value)
        u = m @ u
    return u


def sx_needed(u: np.ndarray) -> int:
    """Fewest sx pulses that realize ``u`` up to global phase: 0, 1 or 2."""
    p00 = abs(u[0, 0]) ** 2
    if abs(1 - p00) < SHAPE_TOL:
        return 0
    if abs(p00 - 0.5) < SHAPE_TOL:
        return 1
    return 2


def decompose(u: np.ndarray, qubit: int = 0, force_two: bool = False) -> list[Gate]:
    """Time-ordered ``Rz sx Rz sx Rz`` gates equal to ``u`` up to global phase.

    Uses the Euler form ``u ~ Rz(a) Ry(b) Rz(c)`` together with
    ``sx Rz(x) sx ~ Ry(pi - x) Rz(pi)`` and, for b = pi/2,
    ``Ry(pi/2) = Rz(pi/2) sx Rz(-pi/2)``. At b = pi the split between a and c
    is free and c is set to pi, which drops the leading Rz. Zero angles are
    dropped; fewer sx are used when ``u`` allows it unless ``force_two`` is set.
    """
    m00, m10 = abs(u[0, 0]), abs(u[1, 0])
    b = 2 * math.atan2(m10, m00)
    need = 2 if force_two else sx_needed(u)
    v = u / np.sqrt(complex(np.linalg.det(u)))
    if m00 < 1e-12:
        # b = pi: only a - c is defined; choose c = pi so the first Rz vanishes
        a, c = 2 * np.angle(v[1, 0]) + math.pi, math.pi
    else:
        a = np.angle(v[1, 0]) - np.angle(v[0, 0])
        c = -np.angle(v[1, 0]) - np.angle(v[0, 0])
    if need == 0:
        seq = [("rz", a + c)]
    elif need == 1:
        seq = [("rz", c - math.pi / 2), ("sx", None), ("rz", a + math.pi / 2)]
    else:
        seq = [("rz", c - math.pi), ("sx", None), ("rz", math.pi - b), ("sx", None), ("rz", a)]
    out = []
    for kind, angle in seq:
        if kind == "sx":
            out.append(sx(qubit))
        elif not _is_zero_angle(angle):
            out.append(rz(qubit, wrap_angle(angle)))
    return out


def qubit_segments(gates, width: int) -> dict[int, list[list[int]]]:
    """Per qubit, the gate indices of each one-qubit run delimited by two-qubit gates.

    Qubit q has (number of two-qubit gates on q) + 1 segments, possibly empty.
    """
    segs = {q: [[]] for q in range(width)}
    for i, g in enumerate(gates):
        if len(g.qubits) == 2:
            for q in g.qubits:
                segs[q].append([])
        else:
            segs[g.qubits[0]][-1].append(i)
    return segs


def _resynthesize(gates, width):
    gates = list(gates)
    replace: dict[int, list[Gate]] = {}
    drop: set[int] = set()
    n = 0
    for q, segs in qubit_segments(gates, width).items():
        for seg in segs:
            run = [gates[i] for i in seg]
            if not run or not all(g.is_const for g in run):
                continue
            have = sum(g.kind == "sx" for g in run)
            u = segment_unitary(run)
            if have <= sx_needed(u):
                continue
            replace[seg[0]] = decompose(u, q)
            drop.update(seg[1:])
            n += 1
    out = []
    for i, g in enumerate(gates):
        if i in replace:
            out.extend(replace[i])
        elif i not in drop:
            out.append(g)
    return out, n


def maximal_form_violations(circuit: Circuit) -> list[tuple[int, int, str]]:
    """Segments exceeding the maximal-form gate counts, as (qubit, segment, reason).

    Before a qubit's first Cz at most ``sx Rz sx``; between or after Cz gates at
    most two sx and two Rz.
    """
    bad = []
    gates = list(circuit.gates)
    for q, segs in qubit_segments(gates, circuit.width).items():
        for k, seg in enumerate(segs):
            kinds = [gates[i].kind for i in seg]
            n_sx, n_rz = kinds.count("sx"), kinds.count("rz")
            if k == 0:
                if n_sx > 2 or n_rz > 1 or (n_rz and kinds not in (["sx", "rz", "sx"],)):
                    bad.append((q, k, f"initial segment {kinds}"))
            elif n_sx > 2 or n_rz > 2:
                bad.append((q, k, f"segment {kinds}"))
    return bad


# --- public passes ------------------------------------------------------------

def _apply(rule, circuit: Circuit) -> Circuit:
    _require_native(circuit)
    gates, _ = rule(list(circuit.gates))
    return circuit.with_gates(gates)


def remove_initial(circuit: Circuit) -> Circuit:
    return _apply(_remove_initial, circuit)


def remove_final(circuit: Circuit) -> Circuit:
    return _apply(_remove_final, circuit)


def cancel_double_cz(circuit: Circuit) -> Circuit:
    return _apply(_cancel_double_cz, circuit)


def merge_rz(circuit: Circuit) -> Circuit:
    return _apply(_merge_rz, circuit)


def drop_zero_rz(circuit: Circuit) -> Circuit:
    return _apply(_drop_zero_rz, circuit)


def commute_rz(circuit: Circuit) -> Circuit:
    return _apply(_commute_rz, circuit)


def resynthesize(circuit: Circuit) -> Circuit:
    _require_native(circuit)
    gates, _ = _resynthesize(circuit.gates, circuit.width)
    return circuit.with_gates(gates)


@dataclass
class RewriteReport:
    applications: dict = field(default_factory=dict)
    before: PulseCount = PulseCount(0, 0)
    after: PulseCount = PulseCount(0, 0)
    # symbolic segments that exceed the maximal form and could not be resynthesized
    unresolved: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "applications": dict(self.applications),
            "pulses_before": {"one_qubit": self.before.one_qubit_pulses,
                              "two_qubit": self.before.two_qubit_pulses},
            "pulses_after": {"one_qubit": self.after.one_qubit_pulses,
                             "two_qubit": self.after.two_qubit_pulses},
            "unresolved": [list(u) for u in self.unresolved],
        }


_PIPELINE = (
    ("remove_initial", _remove_initial),
    ("remove_final", _remove_final),
    ("cancel_double_cz", _cancel_double_cz),
    ("merge_rz", _merge_rz),
    ("drop_zero_rz", _drop_zero_rz),
    ("commute_rz", _commute_rz),
)


def optimize(circuit: Circuit, max_rounds: int = 1000) -> tuple[Circuit, RewriteReport]:
    """Apply every rule until nothing changes."""
    _require_native(circuit)
    report = RewriteReport(applications={name: 0 for name, _ in _PIPELINE} | {"resynthesize": 0},
                           before=pulse_count(circuit))
    gates = list(circuit.gates)
    for _ in range(max_rounds):
        changed = False
        for name, rule in _PIPELINE:
            gates, n = rule(gates)
            report.applications[name] += n
            changed |= n > 0
        gates, n = _resynthesize(gates, circuit.width)
        report.applications["resynthesize"] += n
        changed |= n > 0
        if not changed:
            break
    else:  # pragma: no cover - every rule strictly shrinks or shifts gates right
        raise RuntimeError("optimize did not reach a fixpoint")
    out = circuit.with_gates(gates)
    report.after = pulse_count(out)
    report.unresolved = [v for v in maximal_form_violations(out)
                         if not all(gates[i].is_const
                                    for i in qubit_segments(gates, out.width)[v[0]][v[1]])]
    return out, report


@dataclass
class Equivalence:
    equivalent: bool
    trials: int
    max_tv: float
    counterexample: tuple | None = None

    def __bool__(self):
        return self.equivalent


def verify_equivalence(a: Circuit, b: Circuit, trials: int = 100, seed=None,
                       tol: float = 1e-9) -> Equivalence:
    """Compare outcome distributions of two circuits under random (w, t) bindings."""
    if (a.width, a.num_inputs, a.num_params) != (b.width, b.num_inputs, b.num_params):
        raise ValueError(
            f"shape mismatch: (width, inputs, params) {(a.width, a.num_inputs, a.num_params)} "
            f"vs {(b.width, b.num_inputs, b.num_params)}")
    rng = np.random.default_rng(seed)
    inputs = rng.uniform(-np.pi, np.pi, (trials, a.num_inputs))
    params = rng.uniform(-np.pi, np.pi, (trials, a.num_params))
    tv = 0.5 * np.abs(probabilities(a, inputs, params) - probabilities(b, inputs, params)).sum(axis=1)
    bad = np.flatnonzero(tv > tol)
    if bad.size:
        i = bad[0]
        return Equivalence(False, trials, float(tv.max()), (inputs[i].tolist(), params[i].tolist()))
    return Equivalence(True, trials, float(tv.max()) if trials else 0.0)
