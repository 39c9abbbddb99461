"""
Parametric circuit representation over the {sx, Rz, Cz} gate set.

Angles are symbolic slots: ``Const`` (a fixed angle in radians), ``Input``
(an encoded feature, written ``w<k>`` in text form) or ``Param`` (a trainable
model parameter, written ``t<k>``). ``bind`` resolves every slot to ``Const``.

The extended gates ``h``, ``cnot`` and ``zz`` only appear in the output of
gate-set translation; the classifier circuits themselves never use them.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np


@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"constant angle must be finite, got {self.value!r}")


@dataclass(frozen=True)
class Input:
    index: int


@dataclass(frozen=True)
class Param:
    index: int


AngleExpr = Union[Const, Input, Param]

ONE_QUBIT = frozenset({"sx", "rz", "h"})
TWO_QUBIT = frozenset({"cz", "cnot", "zz"})
NATIVE = frozenset({"sx", "rz", "cz"})
# symmetric two-qubit gates get canonical operand order
SYMMETRIC = frozenset({"cz", "zz"})


def as_angle(angle) -> AngleExpr:
    if isinstance(angle, (Const, Input, Param)):
        return angle
    return Const(float(angle))


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple
    angle: AngleExpr | None = None

    def __post_init__(self):
        if self.kind in ONE_QUBIT:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on one qubit, got {self.qubits}")
        elif self.kind in TWO_QUBIT:
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"{self.kind} needs two distinct qubits, got {self.qubits}")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if any(q < 0 for q in self.qubits):
            raise ValueError(f"negative qubit index in {self.qubits}")
        if (self.kind == "rz") != (self.angle is not None):
            raise ValueError("exactly the rz gate carries an angle")

    @property
    def is_const(self) -> bool:
        return self.angle is None or isinstance(self.angle, Const)

    def __str__(self):
        return format_gate(self)


def sx(q: int) -> Gate:
    return Gate("sx", (q,))


def rz(q: int, angle) -> Gate:
    return Gate("rz", (q,), as_angle(angle))


def cz(a: int, b: int) -> Gate:
    return Gate("cz", (min(a, b), max(a, b)))


def h(q: int) -> Gate:
    return Gate("h", (q,))


def cnot(control: int, target: int) -> Gate:
    return Gate("cnot", (control, target))


def zz(a: int, b: int) -> Gate:
    return Gate("zz", (min(a, b), max(a, b)))


def _slot_count(indices: set, declared: int | None, what: str) -> int:
    used = max(indices) + 1 if indices else 0
    if declared is None:
        missing = sorted(set(range(used)) - indices)
        if missing:
            raise ValueError(f"{what} indices must be dense, missing {missing}")
        return used
    if declared < used:
        raise ValueError(f"declared {declared} {what} slots but index {used - 1} is used")
    return declared


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list on ``width`` qubits, measured on all qubits at the end.

    ``num_inputs`` and ``num_params`` default to one past the largest slot
    index, which must then be dense. Passing them explicitly allows unused
    slots, which is how optimization keeps the binding interface of a circuit
    whose gates on some slot were removed.
    """

    width: int
    gates: tuple = ()
    num_inputs: int | None = None
    num_params: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.width < 1:
            raise ValueError(f"circuit width must be >= 1, got {self.width}")
        inputs, params = set(), set()
        for g in self.gates:
            if not isinstance(g, Gate):
                raise TypeError(f"expected Gate, got {type(g).__name__}")
            if max(g.qubits) >= self.width:
                raise ValueError(f"gate {g} addresses a qubit outside width {self.width}")
            if isinstance(g.angle, Input):
                inputs.add(g.angle.index)
            elif isinstance(g.angle, Param):
                params.add(g.angle.index)
        object.__setattr__(self, "num_inputs", _slot_count(inputs, self.num_inputs, "input"))
        object.__setattr__(self, "num_params", _slot_count(params, self.num_params, "parameter"))

    def __len__(self):
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    @property
    def is_bound(self) -> bool:
        return all(g.is_const for g in self.gates)

    @property
    def is_native(self) -> bool:
        return all(g.kind in NATIVE for g in self.gates)

    def with_gates(self, gates: Iterable[Gate]) -> "Circuit":
        """Same width and slot counts, new gates."""
        return Circuit(self.width, tuple(gates), self.num_inputs, self.num_params)

    def to_text(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class PulseCount:
    one_qubit_pulses: int
    two_qubit_pulses: int

    def __iter__(self):
        return iter((self.one_qubit_pulses, self.two_qubit_pulses))


def compact_gate(qubit: int, angle) -> list[Gate]:
    """The phi-box ``sx . Rz(angle) . sx``, the parametric unit of every preset."""
    return [sx(qubit), rz(qubit, angle), sx(qubit)]


def pulse_count(circuit: Circuit) -> PulseCount:
    """Tally 1-qubit pulses (sx, and h if present) and 2-qubit pulses; Rz is free."""
    one = sum(g.kind in ("sx", "h") for g in circuit.gates)
    two = sum(g.kind in TWO_QUBIT for g in circuit.gates)
    return PulseCount(one, two)


def bind(circuit: Circuit, inputs: Sequence[float] = (), params: Sequence[float] = ()) -> Circuit:
    inputs = np.asarray(inputs, dtype=float).ravel()
    params = np.asarray(params, dtype=float).ravel()
    if len(inputs) != circuit.num_inputs:
        raise ValueError(f"expected {circuit.num_inputs} input angles, got {len(inputs)}")
    if len(params) != circuit.num_params:
        raise ValueError(f"expected {circuit.num_params} model parameters, got {len(params)}")
    gates = []
    for g in circuit.gates:
        if isinstance(g.angle, Input):
            g = Gate(g.kind, g.qubits, Const(float(inputs[g.angle.index])))
        elif isinstance(g.angle, Param):
            g = Gate(g.kind, g.qubits, Const(float(params[g.angle.index])))
        gates.append(g)
    return Circuit(circuit.width, tuple(gates), 0, 0)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def _layered(width: int, layers: Sequence[Sequence[AngleExpr | None]],
             entanglers: Sequence[Sequence[tuple[int, int]]]) -> Circuit:
    """Alternate a column of phi-boxes with a column of Cz gates.

    ``layers[k][q]`` is the angle of qubit q's box in column k (None for no box);
    ``entanglers[k]`` lists the Cz pairs placed after column k.
    """
    gates: list[Gate] = []
    for k, column in enumerate(layers):
        for q, angle in enumerate(column):
            if angle is not None:
                gates.extend(compact_gate(q, angle))
        if k < len(entanglers):
            gates.extend(cz(a, b) for a, b in entanglers[k])
    return Circuit(width, tuple(gates))


def _iris2q() -> Circuit:
    w, t = Input, Param
    layers = [
        (w(0), w(1)), (t(0), t(1)), (w(2), w(3)), (t(2), t(3)),
        (w(0), w(1)), (t(4), t(5)), (w(2), w(3)), (t(6), t(7)),
    ]
    return _layered(2, layers, [[(0, 1)]] * 7)


def _xor2q() -> Circuit:
    w, t = Input, Param
    layers = [(w(0), w(1)), (t(0), t(1)), (t(2), t(3))]
    return _layered(2, layers, [[(0, 1)]] * 2)


def _skin3q() -> Circuit:
    w, t = Input, Param
    layers = [
        (w(0), w(1), w(2)),
        (t(0), None, t(1)),
        (t(2), t(3), None),
        (None, t(4), t(5)),
    ]
    return _layered(3, layers, [[(0, 2)], [(0, 1)], [(1, 2)]])


def _synth2q() -> Circuit:
    w, t = Input, Param
    layers = [
        (w(0), w(1)), (t(0), t(1)), (w(0), w(1)), (t(2), t(3)), (t(4), t(5)),
        (w(0), w(1)), (t(6), t(7)), (w(0), w(1)), (t(8), t(9)), (t(10), t(11)),
    ]
    return _layered(2, layers, [[(0, 1)]] * 9)


PRESETS = {
    "iris2q": _iris2q,
    "xor2q": _xor2q,
    "skin3q": _skin3q,
    "synth2q": _synth2q,
}


def preset(name: str) -> Circuit:
    """Build one of the experiment circuits: iris2q, xor2q, skin3q or synth2q."""
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------

# One statement per line: "QUBITS N" first, an optional "SLOTS d p" declaring
# slot counts, then "SX q", "RZ q <angle|wK|tK>", "CZ a b" (and "H q",
# "CNOT c t", "ZZ a b" for translated circuits). "#" starts a comment.
_KEYWORDS = {"sx": "SX", "rz": "RZ", "cz": "CZ", "h": "H", "cnot": "CNOT", "zz": "ZZ"}
_KINDS = {v: k for k, v in _KEYWORDS.items()}
_SLOT = re.compile(r"^([wt])(\d+)$")


def format_angle(angle: AngleExpr) -> str:
    if isinstance(angle, Input):
        return f"w{angle.index}"
    if isinstance(angle, Param):
        return f"t{angle.index}"
    return repr(float(angle.value))


def parse_angle(token: str) -> AngleExpr:
    m = _SLOT.match(token)
    if m:
        return Input(int(m[2])) if m[1] == "w" else Param(int(m[2]))
    return Const(float(token))


def format_gate(g: Gate) -> str:
    parts = [_KEYWORDS[g.kind], *map(str, g.qubits)]
    if g.angle is not None:
        parts.append(format_angle(g.angle))
    return " ".join(parts)


def _implied_counts(circuit: Circuit) -> tuple[int, int]:
    ins = [g.angle.index for g in circuit.gates if isinstance(g.angle, Input)]
    pars = [g.angle.index for g in circuit.gates if isinstance(g.angle, Param)]
    return (max(ins) + 1 if ins else 0), (max(pars) + 1 if pars else 0)


def to_text(circuit: Circuit) -> str:
    lines = [f"QUBITS {circuit.width}"]
    n_in, n_par = _implied_counts(circuit)
    dense = (len({g.angle.index for g in circuit.gates if isinstance(g.angle, Input)}) == n_in
             and len({g.angle.index for g in circuit.gates if isinstance(g.angle, Param)}) == n_par)
    if not dense or (circuit.num_inputs, circuit.num_params) != (n_in, n_par):
        lines.append(f"SLOTS {circuit.num_inputs} {circuit.num_params}")
    lines.extend(format_gate(g) for g in circuit.gates)
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Circuit:
    width = None
    slots = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        head = tokens[0].upper()
        try:
            if head == "QUBITS":
                if width is not None:
                    raise ValueError("duplicate QUBITS header")
                (width,) = map(int, tokens[1:])
                continue
            if head == "SLOTS":
                if slots is not None:
                    raise ValueError("duplicate SLOTS line")
                slots = tuple(map(int, tokens[1:]))
                if len(slots) != 2 or min(slots) < 0:
                    raise ValueError("SLOTS takes two non-negative counts (inputs, parameters)")
                continue
            if width is None:
                raise ValueError("missing QUBITS header before first gate")
            kind = _KINDS.get(head)
            if kind is None:
                raise ValueError(f"unknown gate {tokens[0]!r}")
            if kind == "rz":
                if len(tokens) != 3:
                    raise ValueError("RZ takes a qubit and an angle")
                gates.append(rz(int(tokens[1]), parse_angle(tokens[2])))
            elif kind in ONE_QUBIT:
                (q,) = map(int, tokens[1:])
                gates.append(Gate(kind, (q,)))
            else:
                a, b = map(int, tokens[1:])
                gates.append({"cz": cz, "zz": zz, "cnot": cnot}[kind](a, b))
            if max(gates[-1].qubits) >= width:
                raise ValueError(f"qubit index out of range for {width} qubits")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if width is None:
        raise ValueError("circuit text has no QUBITS header")
    return Circuit(width, tuple(gates), *(slots or (None, None)))
