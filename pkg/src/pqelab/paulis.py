"""Exact Pauli-string algebra: products, commutation checks, weighted sums,
and greedy qubitwise-commuting measurement grouping.

Qubit 0 is the leftmost letter of a string and the leftmost bit of a
bitstring, everywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

LETTERS = "IXYZ"

# single-qubit products: _MUL[a][b] = (phase, letter) for a*b
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "X"): (-1j, "Z"),
    ("Y", "Z"): (1j, "X"), ("Z", "Y"): (-1j, "X"),
    ("Z", "X"): (1j, "Y"), ("X", "Z"): (-1j, "Y"),
}

_DENSE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

_PHASE_TEXT = {1 + 0j: "+1", -1 + 0j: "-1", 1j: "+i", -1j: "-i"}
_TEXT_PHASE = {v: k for k, v in _PHASE_TEXT.items()}


class PauliSizeError(ValueError):
    """Raised when two operators of different qubit counts are combined."""


@dataclass(frozen=True)
class PauliString:
    """A phased tensor product of single-qubit Pauli operators.

    The phase is one of +1, -1, +i, -i and is tracked separately from any
    observable coefficient so that Hermitian sums can keep real coefficients.
    """

    letters: str
    phase: complex = 1 + 0j

    def __post_init__(self):
        if any(c not in LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if self.phase not in (1, -1, 1j, -1j):
            raise ValueError(f"phase must be a fourth root of unity, got {self.phase}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @staticmethod
    def identity(n_qubits: int) -> "PauliString":
        return PauliString("I" * n_qubits)

    @staticmethod
    def single(n_qubits: int, qubit: int, letter: str) -> "PauliString":
        s = ["I"] * n_qubits
        s[qubit] = letter
        return PauliString("".join(s))

    @staticmethod
    def from_text(text: str) -> "PauliString":
        """Parse the text form "+1 XZIY" (phase token, space, letters)."""
        phase_txt, _, letters = text.strip().partition(" ")
        if phase_txt not in _TEXT_PHASE:
            raise ValueError(f"bad phase token {phase_txt!r} in {text!r}")
        return PauliString(letters.strip(), _TEXT_PHASE[phase_txt])

    def text(self) -> str:
        return f"{_PHASE_TEXT[self.phase]} {self.letters}"

    def __str__(self) -> str:
        return self.text()

    def multiply(self, other: "PauliString") -> "PauliString":
        """Group product with exact accumulated phase."""
        if self.n_qubits != other.n_qubits:
            raise PauliSizeError(
                f"size mismatch: {self.n_qubits} vs {other.n_qubits}")
        phase = self.phase * other.phase
        out = []
        for a, b in zip(self.letters, other.letters):
            p, c = _MUL[(a, b)]
            phase *= p
            out.append(c)
        return PauliString("".join(out), phase)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return self.multiply(other)

    def commutes(self, other: "PauliString") -> bool:
        """True iff the strings commute as operators: an even number of
        positions carries differing non-identity letters."""
        if self.n_qubits != other.n_qubits:
            raise PauliSizeError(
                f"size mismatch: {self.n_qubits} vs {other.n_qubits}")
        clashes = sum(
            1 for a, b in zip(self.letters, other.letters)
            if a != "I" and b != "I" and a != b)
        return clashes % 2 == 0

    def qubitwise_commutes(self, other: "PauliString") -> bool:
        """True iff at every qubit the letters agree or one is identity."""
        if self.n_qubits != other.n_qubits:
            raise PauliSizeError(
                f"size mismatch: {self.n_qubits} vs {other.n_qubits}")
        return all(
            a == "I" or b == "I" or a == b
            for a, b in zip(self.letters, other.letters))

    def is_identity(self) -> bool:
        return set(self.letters) <= {"I"}

    @property
    def weight(self) -> int:
        return sum(1 for c in self.letters if c != "I")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    def bare(self) -> "PauliString":
        """The same letters with phase +1."""
        return PauliString(self.letters) if self.phase != 1 else self

    def dense(self) -> np.ndarray:
        """Dense matrix representation (small n only)."""
        mats = [_DENSE[c] for c in self.letters]
        return self.phase * reduce(np.kron, mats, np.eye(1, dtype=complex))

    def apply_to_bits(self, bits: str) -> tuple[complex, str]:
        """Action on a computational basis state: P|bits> = phase |bits'>."""
        amp = self.phase
        out = []
        for c, b in zip(self.letters, bits):
            if c == "I":
                out.append(b)
            elif c == "X":
                out.append("1" if b == "0" else "0")
            elif c == "Y":
                amp *= 1j if b == "0" else -1j
                out.append("1" if b == "0" else "0")
            else:  # Z
                amp *= -1 if b == "1" else 1
                out.append(b)
        return amp, "".join(out)


def multiply(a: PauliString, b: PauliString) -> PauliString:
    return a.multiply(b)


def commutes(a: PauliString, b: PauliString) -> bool:
    return a.commutes(b)


def qubitwise_commutes(a: PauliString, b: PauliString) -> bool:
    return a.qubitwise_commutes(b)


class ObservableSum:
    """A real-weighted sum of phase-free Pauli strings.

    Terms are canonicalized on construction: phases are folded into the
    coefficients (which must stay real, the Hermiticity assertion),
    duplicate strings are merged and zero coefficients dropped.
    """

    __slots__ = ("n_qubits", "terms")

    def __init__(self, n_qubits: int, terms):
        merged: dict[str, float] = {}
        for coeff, string in terms:
            if string.n_qubits != n_qubits:
                raise PauliSizeError(
                    f"term on {string.n_qubits} qubits in a {n_qubits}-qubit sum")
            c = coeff * string.phase
            if abs(c.imag if isinstance(c, complex) else 0.0) > 1e-12:
                raise ValueError(
                    f"non-Hermitian term: coefficient {c} for {string.letters}")
            merged[string.letters] = merged.get(string.letters, 0.0) + float(
                c.real if isinstance(c, complex) else c)
        self.n_qubits = n_qubits
        self.terms: list[tuple[float, PauliString]] = [
            (c, PauliString(s)) for s, c in sorted(merged.items()) if c != 0.0]

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __add__(self, other: "ObservableSum") -> "ObservableSum":
        if other.n_qubits != self.n_qubits:
            raise PauliSizeError("size mismatch in sum")
        return ObservableSum(self.n_qubits, list(self.terms) + list(other.terms))

    def scaled(self, factor: float) -> "ObservableSum":
        return ObservableSum(self.n_qubits, [(c * factor, s) for c, s in self.terms])

    def plus_constant(self, value: float) -> "ObservableSum":
        return ObservableSum(
            self.n_qubits,
            list(self.terms) + [(value, PauliString.identity(self.n_qubits))])

    @property
    def constant(self) -> float:
        """Coefficient of the identity string (0.0 if absent)."""
        for c, s in self.terms:
            if s.is_identity():
                return c
        return 0.0

    def without_identity(self) -> "ObservableSum":
        return ObservableSum(
            self.n_qubits, [(c, s) for c, s in self.terms if not s.is_identity()])

    def dense(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, s in self.terms:
            out += c * s.dense()
        return out

    def diagonal_element(self, bits: str) -> float:
        """<bits|O|bits>: only all-{I,Z} terms contribute."""
        val = 0.0
        for c, s in self.terms:
            if set(s.letters) <= {"I", "Z"}:
                sign = 1
                for ch, b in zip(s.letters, bits):
                    if ch == "Z" and b == "1":
                        sign = -sign
                val += c * sign
        return val

    def commutes_with(self, p: PauliString) -> bool:
        return all(s.commutes(p) for _, s in self.terms)

    def text(self) -> str:
        return "; ".join(f"{c:+.12g} {s.letters}" for c, s in self.terms)

    def __repr__(self) -> str:
        return f"ObservableSum({self.n_qubits}, [{self.text()}])"


def group_for_measurement(obs: ObservableSum) -> list[ObservableSum]:
    """Partition the terms into qubitwise-commuting sets.

    Greedy first-fit over terms in the canonical (sorted-letters) order;
    deterministic, and reproduces the natural all-Z / all-XX split for the
    spin-chain Hamiltonians used here.
    """
    groups: list[list[tuple[float, PauliString]]] = []
    for coeff, string in obs.terms:
        for g in groups:
            if all(string.qubitwise_commutes(s) for _, s in g):
                g.append((coeff, string))
                break
        else:
            groups.append([(coeff, string)])
    return [ObservableSum(obs.n_qubits, g) for g in groups]
