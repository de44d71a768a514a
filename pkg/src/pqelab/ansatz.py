"""Parameterized trial-state factories.

Every ansatz is a product of exponentiated anti-Hermitian Pauli generators
kappa = -i P acting after reference preparation.  A parameter value t maps to
exp((t/2) kappa), the usual rotation-gate half-angle convention, so the
one-qubit ansatz is exactly RY(t) and the energy is 2*pi-periodic in every
parameter.

Each generator P carries one Y at the largest index of its support and X on
the rest, which maps the reference to a single computational basis state:
exp(a kappa)|ref> = cos(a)|ref> + sin(a)*sign*|target>.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from .circuits import (Circuit, gate_cnot, gate_h, gate_ry, gate_rz,
                       reference_circuit)
from .paulis import PauliString


@dataclass(frozen=True)
class AnsatzOp:
    """One generator with its reference-image bookkeeping."""

    generator: PauliString      # phase-free Pauli part of kappa = -i * generator
    target_state: str           # basis state reached from the reference
    sign: int                   # kappa|ref> = sign |target>

    @staticmethod
    def from_generator(generator: PauliString, reference: str) -> "AnsatzOp":
        amp, target = generator.apply_to_bits(reference)
        amp = -1j * amp  # kappa = -i P
        if abs(amp.imag) > 1e-12 or abs(abs(amp.real) - 1.0) > 1e-12:
            raise ValueError(
                f"generator {generator.letters} does not map {reference} to a "
                "single basis state with real amplitude")
        if target == reference:
            raise ValueError(f"generator {generator.letters} fixes the reference")
        return AnsatzOp(generator.bare(), target, 1 if amp.real > 0 else -1)


@dataclass(frozen=True)
class Ansatz:
    n_qubits: int
    reference: str
    ops: tuple[AnsatzOp, ...]

    def __post_init__(self):
        targets = [op.target_state for op in self.ops]
        if len(set(targets)) != len(targets):
            raise ValueError("ansatz operators must reach distinct target states")

    @property
    def n_params(self) -> int:
        return len(self.ops)

    def compile(self, theta, shift_index: int | None = None,
                shift_angle: float = 0.0) -> Circuit:
        """Reference preparation followed by each exp((theta_mu/2) kappa_mu).

        A shift exp(shift_angle * kappa_mu) may be inserted between the
        reference and the product, which is what the residual evaluation
        formulas measure.
        """
        if len(theta) != len(self.ops):
            raise ValueError(
                f"expected {len(self.ops)} parameters, got {len(theta)}")
        circ = reference_circuit(self.reference)
        if shift_index is not None:
            gen = self.ops[shift_index].generator
            circ.extend(generator_exponential_gates(gen, shift_angle))
        for op, t in zip(self.ops, theta):
            circ.extend(generator_exponential_gates(op.generator, 0.5 * t))
        return circ

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "reference": self.reference,
            "ops": [{"generator": op.generator.letters,
                     "target": op.target_state,
                     "sign": op.sign} for op in self.ops],
        }


def generator_exponential_gates(generator: PauliString, a: float):
    """Gate sequence for exp(a * kappa) = exp(-i a P).

    Weight-1 generators need no CNOTs; a weight-w generator uses the basis
    change + CNOT ladder + RZ + inverse construction, 2(w-1) CNOTs.
    """
    support = generator.support
    if not support:
        return []
    if len(support) == 1:
        q = support[0]
        letter = generator.letters[q]
        if letter == "Y":
            return [gate_ry(q, 2.0 * a)]
        if letter == "Z":
            return [gate_rz(q, 2.0 * a)]
        # X rotation via Hadamard conjugation of RZ
        return [gate_h(q), gate_rz(q, 2.0 * a), gate_h(q)]
    pre, post = [], []
    for q in support:
        letter = generator.letters[q]
        if letter == "X":
            pre.append(gate_h(q))
            post.append(gate_h(q))
        elif letter == "Y":
            # S^dagger then H maps Y to Z; undone by H then S
            pre.extend([gate_rz(q, -0.5 * math.pi), gate_h(q)])
            post.extend([gate_h(q), gate_rz(q, 0.5 * math.pi)])
    ladder = [gate_cnot(a_, b_) for a_, b_ in zip(support, support[1:])]
    last = support[-1]
    gates = list(pre) + ladder + [gate_rz(last, 2.0 * a)] + ladder[::-1]
    gates += post
    return gates


def h2_ansatz() -> Ansatz:
    """The one-qubit trial state: a single Y generator, so that a parameter
    t prepares cos(t/2)|0> + sin(t/2)|1> = RY(t)|0>."""
    op = AnsatzOp.from_generator(PauliString("Y"), "0")
    return Ansatz(1, "0", (op,))


def _combinatorial_supports(n_qubits: int, parity_filter: bool):
    subs = []
    for r in range(1, n_qubits + 1):
        if parity_filter and r % 2 == 1:
            continue
        subs.extend(itertools.combinations(range(n_qubits), r))
    # blocks of increasing largest index; lexicographic support within a block
    subs.sort(key=lambda sub: (max(sub), sub))
    return subs


def combinatorial_ansatz(n_qubits: int, parity_filter: bool = False,
                         reference: str | None = None) -> Ansatz:
    """One generator per nonempty qubit subset: Y on the largest index of
    the subset, X on the rest.  With parity_filter only even-size subsets
    are kept, which preserves the Hamming-weight parity of the reference."""
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    ref = "0" * n_qubits if reference is None else reference
    ops = []
    for sub in _combinatorial_supports(n_qubits, parity_filter):
        letters = ["I"] * n_qubits
        for q in sub[:-1]:
            letters[q] = "X"
        letters[max(sub)] = "Y"
        ops.append(AnsatzOp.from_generator(PauliString("".join(letters)), ref))
    return Ansatz(n_qubits, ref, tuple(ops))


def truncate(ansatz: Ansatz, keep) -> Ansatz:
    """Restrict to the selected operators, preserving order.

    keep is either a predicate over AnsatzOp or an iterable of indices.
    """
    if callable(keep):
        selected = [op for op in ansatz.ops if keep(op)]
    else:
        idx = sorted(set(keep))
        if any(i < 0 or i >= len(ansatz.ops) for i in idx):
            raise IndexError("truncation index out of range")
        selected = [ansatz.ops[i] for i in idx]
    if not selected:
        raise ValueError("truncation would leave no operators")
    return Ansatz(ansatz.n_qubits, ansatz.reference, tuple(selected))
