"""Gate-level circuits: an ordered gate list over a fixed qubit register,
plus the CNOT-pair folding used for noise amplification.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .paulis import PauliString

GATE_KINDS = ("x", "h", "ry", "rz", "cnot", "pauli_rot")


@dataclass(frozen=True)
class GateOp:
    """One gate.

    kind "pauli_rot" with generator P and angle a applies exp(a * kappa)
    with kappa = -i P (P phase-free), i.e. exp(-i a P).  The rotation gates
    follow the standard half-angle convention: ry(t) = exp(-i t Y / 2),
    rz(t) = exp(-i t Z / 2).
    """

    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None
    generator: PauliString | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "pauli_rot":
            if self.generator is None or self.angle is None:
                raise ValueError("pauli_rot needs generator and angle")
            if self.generator.phase != 1:
                raise ValueError("pauli_rot generator must be phase-free")
        if self.kind in ("ry", "rz") and self.angle is None:
            raise ValueError(f"{self.kind} needs an angle")
        if self.kind == "cnot" and (len(self.qubits) != 2
                                    or self.qubits[0] == self.qubits[1]):
            raise ValueError("cnot needs two distinct qubits")


def gate_x(q: int) -> GateOp:
    return GateOp("x", (q,))


def gate_h(q: int) -> GateOp:
    return GateOp("h", (q,))


def gate_ry(q: int, angle: float) -> GateOp:
    return GateOp("ry", (q,), angle=angle)


def gate_rz(q: int, angle: float) -> GateOp:
    return GateOp("rz", (q,), angle=angle)


def gate_cnot(control: int, target: int) -> GateOp:
    return GateOp("cnot", (control, target))


def pauli_rotation(generator: PauliString, angle: float) -> GateOp:
    return GateOp("pauli_rot", generator.support, angle=angle,
                  generator=generator.bare())


@dataclass
class Circuit:
    """Ordered gate list; ops are applied first-to-last."""

    n_qubits: int
    ops: list[GateOp] = field(default_factory=list)

    def __post_init__(self):
        for op in self.ops:
            self._check(op)

    def _check(self, op: GateOp):
        if any(q < 0 or q >= self.n_qubits for q in op.qubits):
            raise IndexError(f"gate {op.kind} on qubits {op.qubits} outside "
                             f"register of size {self.n_qubits}")
        if op.generator is not None and op.generator.n_qubits != self.n_qubits:
            raise IndexError("pauli_rot generator size mismatch")

    def append(self, op: GateOp) -> "Circuit":
        self._check(op)
        self.ops.append(op)
        return self

    def extend(self, ops) -> "Circuit":
        for op in ops:
            self.append(op)
        return self

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits of different sizes")
        return Circuit(self.n_qubits, list(self.ops) + list(other.ops))

    def __len__(self) -> int:
        return len(self.ops)

    @property
    def cnot_count(self) -> int:
        return sum(1 for op in self.ops if op.kind == "cnot")


def reference_circuit(bits: str) -> Circuit:
    """X gates preparing the given bitstring from |0...0>."""
    c = Circuit(len(bits))
    for q, b in enumerate(bits):
        if b == "1":
            c.append(gate_x(q))
    return c


def fold_cnots(circuit: Circuit, n_pairs: int) -> Circuit:
    """Replace every CNOT by 2*n_pairs + 1 identical CNOTs.

    Noiseless semantics are unchanged (CNOT is an involution); under
    per-gate noise this scales the CNOT error by the fold factor.
    """
    if n_pairs < 0:
        raise ValueError("n_pairs must be nonnegative")
    out = Circuit(circuit.n_qubits)
    for op in circuit.ops:
        out.append(op)
        if op.kind == "cnot":
            for _ in range(n_pairs):
                out.append(op)
                out.append(op)
    return out
