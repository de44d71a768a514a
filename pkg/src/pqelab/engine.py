"""Dense statevector simulation with exact expectation values, shot sampling
and synthetic noise.

Noise model: depolarizing channels attached to the gates of the state
preparation circuit (probability p1 per single-qubit gate, p2 per CNOT) and
per-qubit readout confusion applied to the final bit distribution.
Measurement-basis rotations are treated as ideal.

Two noisy-sampling engines are provided and agree in distribution:

* "channel"    - evolves the density matrix through the exact depolarizing
                 channels and draws all shots from the resulting Born
                 distribution in one multinomial.  O(4^n) memory.
* "trajectory" - Monte-Carlo channel unraveling: every shot carries its own
                 stochastic Pauli insertions after noisy gates.  O(2^n)
                 memory per trajectory, far slower; kept for cross-checks
                 and as the scalable fallback.

Bitstring convention: qubit 0 is the leftmost bit, i.e. the most significant
bit of the statevector index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, GateOp
from .paulis import ObservableSum, PauliString

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=complex)

CHANNEL_MAX_QUBITS = 10  # density matrix above this is unreasonable


class SimulationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# noise description
# ---------------------------------------------------------------------------

@dataclass
class NoiseSpec:
    """Depolarizing strengths plus per-qubit readout confusion.

    readout entries are 2x2 column-stochastic matrices mapping true state to
    observed state; a single matrix is broadcast to every qubit.
    """

    p1: float = 0.0
    p2: float = 0.0
    readout: object = None  # None | (2,2) array-like | list of (2,2)

    def __post_init__(self):
        if not (0.0 <= self.p1 <= 1.0 and 0.0 <= self.p2 <= 1.0):
            raise ValueError("depolarizing probabilities must be in [0, 1]")
        if self.readout is not None:
            arr = np.asarray(self.readout, dtype=float)
            if arr.ndim == 2:
                arr = arr[None, :, :]
            if arr.ndim != 3 or arr.shape[1:] != (2, 2) or np.any(arr < -1e-12):
                raise ValueError("readout confusion must be 2x2 nonnegative")
            if np.max(np.abs(arr.sum(axis=1) - 1.0)) > 1e-9:
                raise ValueError("readout confusion columns must sum to 1")

    @property
    def has_gate_noise(self) -> bool:
        return self.p1 > 0.0 or self.p2 > 0.0

    def readout_matrices(self, n_qubits: int) -> list[np.ndarray] | None:
        """Per-qubit confusion matrices; a single matrix is broadcast."""
        if self.readout is None:
            return None
        arr = np.asarray(self.readout, dtype=float)
        if arr.ndim == 2:
            return [arr] * n_qubits
        if arr.shape[0] != n_qubits:
            raise ValueError("need one readout matrix per qubit")
        return [arr[i] for i in range(arr.shape[0])]


@dataclass
class ShotTable:
    """Raw measurement record: bitstring -> count."""

    n_qubits: int
    counts: dict[str, int] = field(default_factory=dict)

    @property
    def total_shots(self) -> int:
        return sum(self.counts.values())

    def frequencies(self) -> np.ndarray:
        """Empirical distribution as a dense vector over all bitstrings."""
        total = self.total_shots
        vec = np.zeros(2 ** self.n_qubits)
        for bits, c in self.counts.items():
            vec[int(bits, 2)] = c / total
        return vec

    def to_json_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "counts": dict(sorted(self.counts.items()))}

    @staticmethod
    def from_json_dict(d: dict) -> "ShotTable":
        return ShotTable(int(d["n_qubits"]), {k: int(v) for k, v in d["counts"].items()})


def bits_of_index(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b")


def index_of_bits(bits: str) -> int:
    return int(bits, 2)


# ---------------------------------------------------------------------------
# gate kernels on (..., 2^n) arrays, gates acting on the last axis
# ---------------------------------------------------------------------------

def _apply_matrix_1q(arr, mat, q, n):
    lead = arr.shape[:-1]
    a = arr.reshape(-1, 2, 2 ** (n - q - 1))
    return np.matmul(mat, a).reshape(lead + (2 ** n,))

def _apply_x(arr, q, n):
    return arr[..., _x_perm(q, n)]

def _rz_diagonal(q, n, angle):
    idx = np.arange(2 ** n)
    bit = (idx >> (n - 1 - q)) & 1
    ph = np.exp(1j * angle / 2.0)
    return np.where(bit == 1, ph, np.conj(ph))

def _apply_rz(arr, q, n, angle, conj=False):
    d = _rz_diagonal(q, n, angle)
    if conj:
        d = np.conj(d)
    return arr * d

_PERM_CACHE: dict[tuple, np.ndarray] = {}


def _cnot_perm(control, target, n):
    key = ("cnot", control, target, n)
    perm = _PERM_CACHE.get(key)
    if perm is None:
        idx = np.arange(2 ** n)
        cbit = (idx >> (n - 1 - control)) & 1
        perm = idx ^ (cbit << (n - 1 - target))
        _PERM_CACHE[key] = perm
    return perm


def _x_perm(q, n):
    key = ("x", q, n)
    perm = _PERM_CACHE.get(key)
    if perm is None:
        perm = np.arange(2 ** n) ^ (1 << (n - 1 - q))
        _PERM_CACHE[key] = perm
    return perm


def _apply_cnot(arr, control, target, n):
    return arr[..., _cnot_perm(control, target, n)]


def _pauli_perm_phase(string: PauliString, n: int):
    """P|b> = phase(b)|b ^ flip>; returns arrays st (Pv)[i] = amp[i] v[i^flip]."""
    idx = np.arange(2 ** n)
    flip = 0
    phase = np.full(2 ** n, string.phase, dtype=complex)
    for q, c in enumerate(string.letters):
        bit = (idx >> (n - 1 - q)) & 1
        if c == "X":
            flip |= 1 << (n - 1 - q)
        elif c == "Y":
            flip |= 1 << (n - 1 - q)
            phase = phase * np.where(bit == 1, -1j, 1j)
        elif c == "Z":
            phase = phase * np.where(bit == 1, -1.0, 1.0)
    src = idx ^ flip
    return src, phase[src]


def apply_pauli(arr: np.ndarray, string: PauliString) -> np.ndarray:
    """Apply a Pauli string to statevector(s) along the last axis."""
    n = string.n_qubits
    src, amp = _pauli_perm_phase(string, n)
    return amp * arr[..., src]


def _apply_gate(arr, op: GateOp, n, conj=False):
    """Apply one gate (or its complex conjugate) along the last axis."""
    if op.kind == "x":
        return _apply_x(arr, op.qubits[0], n)
    if op.kind == "h":
        return _apply_matrix_1q(arr, _H, op.qubits[0], n)
    if op.kind == "ry":
        t = op.angle
        mat = np.array([[np.cos(t / 2), -np.sin(t / 2)],
                        [np.sin(t / 2), np.cos(t / 2)]], dtype=complex)
        return _apply_matrix_1q(arr, mat, op.qubits[0], n)
    if op.kind == "rz":
        return _apply_rz(arr, op.qubits[0], n, op.angle, conj=conj)
    if op.kind == "cnot":
        return _apply_cnot(arr, op.qubits[0], op.qubits[1], n)
    if op.kind == "pauli_rot":
        a = op.angle
        pv = apply_pauli(arr, op.generator)
        if conj:
            # conj(exp(-iaP)) = cos(a) + i sin(a) conj(P); conj(P) = (-1)^#Y P
            s = 1j * (-1.0) ** op.generator.letters.count("Y")
        else:
            s = -1j
        return np.cos(a) * arr + s * np.sin(a) * pv
    raise ValueError(op.kind)


# ---------------------------------------------------------------------------
# exact runs
# ---------------------------------------------------------------------------

def run_exact(circuit: Circuit) -> np.ndarray:
    """Statevector after applying the circuit to |0...0>."""
    n = circuit.n_qubits
    psi = np.zeros(2 ** n, dtype=complex)
    psi[0] = 1.0
    for op in circuit.ops:
        psi = _apply_gate(psi, op, n)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-12:
        raise SimulationError(f"statevector norm drifted to {norm}")
    return psi


def expectation_state(psi: np.ndarray, obs: ObservableSum) -> float:
    val = 0.0 + 0.0j
    for coeff, string in obs.terms:
        val += coeff * np.vdot(psi, apply_pauli(psi, string))
    if abs(val.imag) > 1e-10:
        raise SimulationError(f"imaginary expectation residue {val.imag}")
    return float(val.real)


def expectation(circuit: Circuit, obs: ObservableSum) -> float:
    """Exact <psi|O|psi> for the circuit's output state."""
    if obs.n_qubits != circuit.n_qubits:
        raise ValueError("observable size mismatch")
    return expectation_state(run_exact(circuit), obs)


# ---------------------------------------------------------------------------
# density-matrix channel evolution
# ---------------------------------------------------------------------------

def _density_perm_flat(kind, qubits, n):
    key = ("dflat", kind) + tuple(qubits) + (n,)
    flat = _PERM_CACHE.get(key)
    if flat is None:
        perm = _x_perm(qubits[0], n) if kind == "x" \
            else _cnot_perm(qubits[0], qubits[1], n)
        dim = 2 ** n
        flat = (perm[:, None] * dim + perm[None, :]).ravel()
        _PERM_CACHE[key] = flat
    return flat


def _mat_on_density(rho, mat, q, n):
    # rho -> U rho U^dag for a 1-qubit U, two batched matmuls
    post = 2 ** (n - q - 1)
    dim = 2 ** n
    tmp = np.matmul(mat, rho.reshape(-1, 2, post * dim))       # ket index
    out = np.matmul(np.conj(mat), tmp.reshape(-1, 2, post))    # bra index
    return out.reshape(dim, dim)


def _gate_matrix_1q(op) -> np.ndarray:
    if op.kind == "x":
        return _X
    if op.kind == "h":
        return _H
    if op.kind == "ry":
        t = op.angle
        return np.array([[np.cos(t / 2), -np.sin(t / 2)],
                         [np.sin(t / 2), np.cos(t / 2)]], dtype=complex)
    if op.kind == "rz":
        t = op.angle
        return np.diag([np.exp(-1j * t / 2), np.exp(1j * t / 2)])
    raise ValueError(op.kind)


def _gate_on_density(rho, op, n):
    # rho -> G rho G^dagger; permutation and diagonal gates in one step
    if op.kind == "cnot":
        dim = 2 ** n
        flat = _density_perm_flat(op.kind, op.qubits, n)
        return rho.ravel()[flat].reshape(dim, dim)
    if op.kind == "rz":
        d = _rz_diagonal(op.qubits[0], n, op.angle)
        return rho * np.outer(d, np.conj(d))
    if op.kind in ("x", "h", "ry"):
        return _mat_on_density(rho, _gate_matrix_1q(op), op.qubits[0], n)
    rho = _apply_gate(rho.T, op, n).T
    return _apply_gate(rho, op, n, conj=True)


def _fused_program(ops, n, fuse: bool):
    """Gate list with runs of single-qubit gates merged per qubit.

    Only valid when no per-gate single-qubit noise is attached; CNOTs and
    Pauli rotations act as fences for their qubits.
    """
    if not fuse:
        return list(ops)
    out: list = []
    pending: dict[int, np.ndarray] = {}
    slot: dict[int, int] = {}

    def flush(q):
        mat = pending.pop(q, None)
        if mat is not None:
            out[slot.pop(q)] = ("u1q", q, mat)

    for op in ops:
        if op.kind in ("x", "h", "ry", "rz"):
            q = op.qubits[0]
            mat = _gate_matrix_1q(op)
            if q in pending:
                pending[q] = mat @ pending[q]
            else:
                pending[q] = mat
                slot[q] = len(out)
                out.append(None)  # placeholder keeps ordering
        else:
            for q in op.qubits:
                flush(q)
            out.append(op)
    for q in list(pending):
        flush(q)
    return [o for o in out if o is not None]


def _program_step_density(rho, step, n):
    if isinstance(step, tuple):
        _, q, mat = step
        return _mat_on_density(rho, mat, q, n)
    return _gate_on_density(rho, step, n)


def _program_step_state(arr, step, n):
    if isinstance(step, tuple):
        _, q, mat = step
        return _apply_matrix_1q(arr, mat, q, n)
    return _apply_gate(arr, step, n)


def _sector_selectors(qubits, n):
    """Flattened index blocks grouping the register by bit values on
    `qubits`: one (2^(n-k))^2 index array per bit pattern."""
    key = ("sel",) + tuple(qubits) + (n,)
    sel = _PERM_CACHE.get(key)
    if sel is None:
        k = len(qubits)
        dim = 2 ** n
        idx = np.arange(dim)
        code = np.zeros(dim, dtype=int)
        for q in qubits:
            code = (code << 1) | ((idx >> (n - 1 - q)) & 1)
        sel = []
        for v in range(2 ** k):
            rows = idx[code == v]
            sel.append((rows[:, None] * dim + rows[None, :]).ravel())
        _PERM_CACHE[key] = sel
    return sel


def _depolarize(rho, qubits, p, n):
    """Uniform depolarizing on the given qubit set (size 1 or 2):
    a (1 - w) identity + w fully-mixed-on-the-set mixture."""
    if p <= 0.0:
        return rho
    k = len(qubits)
    frac = p * 4 ** k / (4 ** k - 1)  # mixture weight of the fully-mixed part
    sel = _sector_selectors(tuple(qubits), n)
    flat = rho.ravel()
    traced = flat[sel[0]].copy()
    for d in range(1, 2 ** k):
        traced += flat[sel[d]]
    traced *= frac / (2 ** k)
    out = (1.0 - frac) * flat
    for d in range(2 ** k):
        out[sel[d]] += traced
    return out.reshape(rho.shape)


def evolve_density(circuit: Circuit, noise: NoiseSpec | None) -> np.ndarray:
    """Density matrix after the circuit with depolarizing noise per gate.

    Runs of identical consecutive CNOTs (as produced by noise folding)
    collapse exactly: the pair depolarizing channel commutes with pair-local
    unitaries, so m repetitions equal one net CNOT (m odd) or none (m even)
    followed by a single channel of compounded strength.
    """
    n = circuit.n_qubits
    if n > CHANNEL_MAX_QUBITS:
        raise SimulationError(
            f"density evolution capped at {CHANNEL_MAX_QUBITS} qubits")
    dim = 2 ** n
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    p1 = noise.p1 if noise else 0.0
    p2 = noise.p2 if noise else 0.0
    program = _fused_program(circuit.ops, n, fuse=(p1 == 0.0))
    i = 0
    while i < len(program):
        step = program[i]
        if isinstance(step, tuple):
            rho = _program_step_density(rho, step, n)
            i += 1
            continue
        if step.kind == "cnot":
            m = 1
            while (i + m < len(program)
                   and not isinstance(program[i + m], tuple)
                   and program[i + m].kind == "cnot"
                   and program[i + m].qubits == step.qubits):
                m += 1
            if m % 2 == 1:
                rho = _gate_on_density(rho, step, n)
            if p2 > 0.0:
                w = p2 * 16.0 / 15.0
                w_eff = 1.0 - (1.0 - w) ** m
                rho = _depolarize(rho, step.qubits, w_eff * 15.0 / 16.0, n)
            i += m
            continue
        rho = _gate_on_density(rho, step, n)
        if p1 > 0.0:
            if step.kind == "pauli_rot":
                for q in step.qubits:
                    rho = _depolarize(rho, (q,), p1, n)
            else:
                rho = _depolarize(rho, step.qubits, p1, n)
        i += 1
    return rho


def apply_readout_confusion(probs: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    n = len(mats)
    out = probs
    for q, m in enumerate(mats):
        a = out.reshape(2 ** q, 2, -1)
        out = np.einsum("ab,ibj->iaj", m, a).reshape(-1)
    return out


def born_distributions(circuit: Circuit, rotation_sets,
                       noise: NoiseSpec | None) -> list[np.ndarray]:
    """Exact outcome distributions of the noisy circuit followed by each of
    several ideal basis-rotation settings; the state-preparation evolution
    is shared across settings."""
    n = circuit.n_qubits
    mats = noise.readout_matrices(n) if noise is not None else None
    out = []
    if noise is not None and noise.has_gate_noise:
        rho = evolve_density(circuit, noise)
        for rotations in rotation_sets:
            r = rho
            if rotations is not None:
                for op in rotations.ops:
                    r = _gate_on_density(r, op, n)
            probs = np.real(np.diag(r)).copy()
            out.append(probs)
    else:
        psi = np.zeros(2 ** n, dtype=complex)
        psi[0] = 1.0
        for step in _fused_program(circuit.ops, n, fuse=True):
            psi = _program_step_state(psi, step, n)
        for rotations in rotation_sets:
            p = psi
            if rotations is not None:
                for op in rotations.ops:
                    p = _apply_gate(p, op, n)
            out.append(np.abs(p) ** 2)
    final = []
    for probs in out:
        if mats is not None:
            probs = apply_readout_confusion(probs, mats)
        probs = np.clip(probs, 0.0, None)
        final.append(probs / probs.sum())
    return final


def born_distribution(circuit: Circuit, rotations: Circuit | None,
                      noise: NoiseSpec | None) -> np.ndarray:
    """Exact outcome distribution of the noisy circuit followed by ideal
    basis rotations and readout confusion."""
    return born_distributions(circuit, [rotations], noise)[0]


# ---------------------------------------------------------------------------
# trajectory (Monte-Carlo unraveling) engine
# ---------------------------------------------------------------------------

_PAULI_1Q = ("X", "Y", "Z")


def _insert_random_paulis(batch, qubits, p, n, rng):
    """Per-trajectory random non-identity Pauli on `qubits` with prob p."""
    t = batch.shape[0]
    hit = rng.random(t) < p
    if not np.any(hit):
        return batch
    rows = np.nonzero(hit)[0]
    k = len(qubits)
    n_ops = 4 ** k - 1
    choice = rng.integers(0, n_ops, size=len(rows)) + 1  # skip identity
    for code in np.unique(choice):
        sel = rows[choice == code]
        letters = ["I"] * n
        c = int(code)
        for j, q in enumerate(reversed(qubits)):
            letters[q] = "IXYZ"[(c >> (2 * j)) & 3]
        string = PauliString("".join(letters))
        batch[sel] = apply_pauli(batch[sel], string)
    return batch


def sample_trajectories(circuit: Circuit, rotations: Circuit | None, shots: int,
                        noise: NoiseSpec | None, rng: np.random.Generator,
                        batch_size: int = 4096) -> ShotTable:
    """Shot sampling with per-shot stochastic Pauli insertion."""
    n = circuit.n_qubits
    counts: dict[str, int] = {}
    p1 = noise.p1 if noise else 0.0
    p2 = noise.p2 if noise else 0.0
    mats = noise.readout_matrices(n) if noise else None
    done = 0
    while done < shots:
        t = min(batch_size, shots - done)
        batch = np.zeros((t, 2 ** n), dtype=complex)
        batch[:, 0] = 1.0
        for op in circuit.ops:
            batch = _apply_gate(batch, op, n)
            if op.kind == "cnot" and p2 > 0.0:
                batch = _insert_random_paulis(batch, op.qubits, p2, n, rng)
            elif op.kind != "cnot" and p1 > 0.0:
                for q in op.qubits:
                    batch = _insert_random_paulis(batch, (q,), p1, n, rng)
        if rotations is not None:
            for op in rotations.ops:
                batch = _apply_gate(batch, op, n)
        probs = np.abs(batch) ** 2
        probs /= probs.sum(axis=1, keepdims=True)
        cdf = np.cumsum(probs, axis=1)
        draws = rng.random((t, 1))
        outcomes = (draws > cdf).sum(axis=1)
        if mats is not None:
            outcomes = _confuse_outcomes(outcomes, mats, n, rng)
        for o in outcomes:
            b = bits_of_index(int(o), n)
            counts[b] = counts.get(b, 0) + 1
        done += t
    return ShotTable(n, counts)


def _confuse_outcomes(outcomes, mats, n, rng):
    out = np.array(outcomes)
    for q, m in enumerate(mats):
        bit = (out >> (n - 1 - q)) & 1
        p_flip = np.where(bit == 1, m[0, 1], m[1, 0])
        flip = rng.random(len(out)) < p_flip
        out = np.where(flip, out ^ (1 << (n - 1 - q)), out)
    return out


# ---------------------------------------------------------------------------
# public sampling entry point
# ---------------------------------------------------------------------------

def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample(circuit: Circuit, basis_rotations: Circuit | None, shots: int,
           noise: NoiseSpec | None = None, seed=0,
           method: str = "auto") -> ShotTable:
    """Draw shots from the Born distribution of the noisy circuit followed
    by ideal basis rotations and readout confusion.

    Deterministic for a fixed seed.  method "channel" computes the exact
    noisy distribution and draws one multinomial; "trajectory" unravels the
    noise per shot.  "auto" uses the channel engine whenever the register
    fits, which is distribution-identical and much faster.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = _as_rng(seed)
    if method == "auto":
        method = "channel" if circuit.n_qubits <= CHANNEL_MAX_QUBITS else "trajectory"
    if method == "trajectory":
        return sample_trajectories(circuit, basis_rotations, shots, noise, rng)
    if method != "channel":
        raise ValueError(f"unknown sampling method {method!r}")
    probs = born_distribution(circuit, basis_rotations, noise)
    return _draw(probs, shots, circuit.n_qubits, rng)


def _draw(probs: np.ndarray, shots: int, n: int,
          rng: np.random.Generator) -> ShotTable:
    draw = rng.multinomial(shots, probs)
    counts = {bits_of_index(i, n): int(c) for i, c in enumerate(draw) if c > 0}
    return ShotTable(n, counts)


def sample_settings(circuit: Circuit, rotation_sets, shots: int,
                    noise: NoiseSpec | None = None, seed=0,
                    method: str = "auto") -> list[ShotTable]:
    """sample() over several basis-rotation settings of one circuit, sharing
    the state-preparation evolution.  Channel engine only."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = _as_rng(seed)
    if method == "auto":
        method = "channel" if circuit.n_qubits <= CHANNEL_MAX_QUBITS else "trajectory"
    if method == "trajectory":
        return [sample_trajectories(circuit, r, shots, noise, rng)
                for r in rotation_sets]
    probs_list = born_distributions(circuit, rotation_sets, noise)
    return [_draw(p, shots, circuit.n_qubits, rng) for p in probs_list]
