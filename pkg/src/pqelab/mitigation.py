"""Error-mitigation pipeline pieces.

* readout calibration (prepare-and-measure confusion matrix) and constrained
  least-squares unfolding onto the probability simplex,
* the CNOT-staircase measurement transform that turns adjacent XX pairs into
  single-qubit X observables,
* symmetry postselection of shot tables,
* qubit tapering, both the standard Clifford sector reduction and the
  prefix-parity custom scheme for parity-symmetric chains,
* zero-noise extrapolation (linear, and exponential with numeric guards).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, gate_cnot, reference_circuit
from .engine import ShotTable, apply_pauli, bits_of_index
from .paulis import ObservableSum, PauliString

log = logging.getLogger(__name__)


class MitigationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# readout calibration and unfolding
# ---------------------------------------------------------------------------

@dataclass
class CalibrationMatrix:
    """Column-stochastic map from true to observed bitstring probabilities."""

    n_qubits: int
    matrix: np.ndarray
    shots_per_column: int

    def __post_init__(self):
        dim = 2 ** self.n_qubits
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.shape != (dim, dim):
            raise ValueError("calibration matrix has wrong shape")
        if np.any(self.matrix < -1e-12):
            raise ValueError("calibration matrix entries must be nonnegative")
        if np.max(np.abs(self.matrix.sum(axis=0) - 1.0)) > 1e-9:
            raise ValueError("calibration matrix columns must sum to 1")

    def to_json_dict(self) -> dict:
        return {"n_qubits": self.n_qubits,
                "shots_per_column": self.shots_per_column,
                "matrix": self.matrix.tolist()}

    # factorizations reused across the many unfoldings per calibration
    def _factors(self):
        if not hasattr(self, "_cached_factors"):
            a = self.matrix
            cond = np.linalg.cond(a)
            if cond > 1e12:
                self._cached_factors = (None, None, None, cond)
            else:
                ata = a.T @ a
                lip = float(np.linalg.norm(a, 2) ** 2)
                self._cached_factors = (np.linalg.pinv(a), ata, lip, cond)
        return self._cached_factors


def calibrate_readout(sampler, n_qubits: int, shots: int,
                      magnification: int = 1) -> CalibrationMatrix:
    """Prepare every bitstring with X gates and record what is observed.

    magnification multiplies the shots spent per column, shrinking the
    column standard error by its square root.
    """
    if magnification < 1:
        raise ValueError("magnification must be >= 1")
    dim = 2 ** n_qubits
    col_shots = shots * magnification
    mat = np.zeros((dim, dim))
    for col in range(dim):
        bits = bits_of_index(col, n_qubits)
        table = sampler.run(reference_circuit(bits), None, col_shots)
        mat[:, col] = table.frequencies()
    return CalibrationMatrix(n_qubits, mat, col_shots)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {p : p >= 0, sum p = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0][-1]
    tau = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def unfold_counts(raw: ShotTable, cal: CalibrationMatrix,
                  max_iter: int = 2000, tol: float = 1e-11) -> np.ndarray:
    """Least-squares estimate of the true distribution given observed counts,
    constrained to the probability simplex.

    The plain inverse solution already sums to one (the calibration columns
    do); when it is also nonnegative it is the constrained optimum and is
    returned directly.  Otherwise an accelerated projected-gradient descent
    onto the simplex runs to a deterministic fixed point.  A singular
    calibration matrix is reported and the raw frequencies are returned
    unchanged.
    """
    if raw.n_qubits != cal.n_qubits:
        raise MitigationError("shot table and calibration size mismatch")
    f = raw.frequencies()
    pinv, ata, lip, cond = cal._factors()
    if pinv is None:
        log.warning("singular readout calibration matrix (cond %.3g); "
                    "returning raw frequencies", cond)
        return f
    p0 = pinv @ f
    if np.min(p0) >= -1e-12:
        p0 = np.clip(p0, 0.0, None)
        return p0 / p0.sum()
    atf = cal.matrix.T @ f
    p = _project_simplex(p0)
    y = p
    t_acc = 1.0
    for _ in range(max_iter):
        grad = ata @ y - atf
        p_new = _project_simplex(y - grad / lip)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
        y = p_new + ((t_acc - 1.0) / t_new) * (p_new - p)
        if np.max(np.abs(p_new - p)) < tol:
            return p_new
        p, t_acc = p_new, t_new
    return p


# ---------------------------------------------------------------------------
# CNOT conjugation machinery and the measurement staircase
# ---------------------------------------------------------------------------

def _conjugate_by_cnot(p: PauliString, control: int, target: int) -> PauliString:
    """C P C for a single CNOT, phase exact."""
    n = p.n_qubits
    base = {
        ("c", "X"): [(control, "X"), (target, "X")],
        ("c", "Y"): [(control, "Y"), (target, "X")],
        ("c", "Z"): [(control, "Z")],
        ("t", "X"): [(target, "X")],
        ("t", "Y"): [(control, "Z"), (target, "Y")],
        ("t", "Z"): [(control, "Z"), (target, "Z")],
    }
    out = PauliString.identity(n)
    rest = list(p.letters)
    for role, q in (("c", control), ("t", target)):
        letter = rest[q]
        if letter != "I":
            rest[q] = "I"
            for pos, new_letter in base[(role, letter)]:
                out = out * PauliString.single(n, pos, new_letter)
    out = out * PauliString("".join(rest))
    return PauliString(out.letters, out.phase * p.phase)


@dataclass(frozen=True)
class StaircaseMap:
    """Operator map induced by appending the staircase before measurement."""

    n_qubits: int
    cnots: tuple[tuple[int, int], ...]

    def transform_string(self, p: PauliString) -> PauliString:
        out = p
        for c, t in self.cnots:
            out = _conjugate_by_cnot(out, c, t)
        return out


def staircase_transform(n_qubits: int) -> tuple[Circuit, StaircaseMap]:
    """CNOT chain (qubit i controls qubit i+1) appended before measurement.

    Measuring the mapped operator on the transformed circuit reproduces the
    original expectation value; every adjacent X_i X_{i+1} maps to a
    single-qubit X and the all-Z parity string maps to Z on the last qubit,
    so the whole XX group can be measured simultaneously with the parity.
    """
    if n_qubits < 2:
        raise ValueError("staircase needs at least two qubits")
    pairs = tuple((i, i + 1) for i in range(n_qubits - 1))
    circ = Circuit(n_qubits, [gate_cnot(c, t) for c, t in pairs])
    return circ, StaircaseMap(n_qubits, pairs)


# ---------------------------------------------------------------------------
# postselection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParityRule:
    """Keep bitstrings whose (-1)^(sum of bits on mask) equals sector."""

    mask: tuple[int, ...]
    sector: int = 1

    def allows(self, bits: str) -> bool:
        parity = sum(int(bits[q]) for q in self.mask) % 2
        return (1 if parity == 0 else -1) == self.sector

    @staticmethod
    def from_string(p: PauliString, sector: int) -> "ParityRule":
        if any(c not in "IZ" for c in p.letters):
            raise MitigationError(
                "parity rule must be an all-{I,Z} string in the measured basis")
        return ParityRule(p.support, sector)


def postselect(counts: ShotTable, rule: ParityRule) -> tuple[ShotTable, float]:
    """Discard shots violating the symmetry; returns the kept table and the
    discarded fraction."""
    kept = {b: c for b, c in counts.counts.items() if rule.allows(b)}
    total = counts.total_shots
    kept_shots = sum(kept.values())
    if kept_shots == 0:
        raise MitigationError("postselection discarded every shot")
    return ShotTable(counts.n_qubits, kept), 1.0 - kept_shots / total


def postselect_probs(probs: np.ndarray, rule: ParityRule,
                     n_qubits: int) -> tuple[np.ndarray, float]:
    """Probability-vector variant used after readout unfolding."""
    idx = np.arange(len(probs))
    parity = np.zeros(len(probs), dtype=int)
    for q in rule.mask:
        parity ^= (idx >> (n_qubits - 1 - q)) & 1
    allowed = (1 - 2 * parity) == rule.sector
    kept_mass = float(probs[allowed].sum())
    if kept_mass <= 0.0:
        raise MitigationError("postselection removed all probability mass")
    out = np.where(allowed, probs, 0.0) / kept_mass
    return out, 1.0 - kept_mass


# ---------------------------------------------------------------------------
# qubit tapering
# ---------------------------------------------------------------------------

@dataclass
class TaperMap:
    """Reduction of a symmetry sector onto one fewer qubit.

    Provides the bitstring bijection from sector states onto all
    (N-1)-bit strings and the matching operator transform.
    """

    kind: str                     # "standard_z2" | "parity_custom"
    n_qubits_in: int
    sector: int
    removed_qubit: int | None = None
    symmetry: PauliString | None = None
    _w_needed: bool = field(default=False, repr=False)
    _sigma: PauliString | None = field(default=None, repr=False)

    @property
    def n_qubits_out(self) -> int:
        return self.n_qubits_in - 1

    # -- operator transform ------------------------------------------------
    def transform_string(self, p: PauliString) -> tuple[float, PauliString]:
        """Returns (coefficient multiplier, reduced string)."""
        if self.kind == "parity_custom":
            return self._custom_transform(p)
        return self._standard_transform(p)

    def transform(self, obs: ObservableSum) -> ObservableSum:
        terms = []
        for coeff, string in obs.terms:
            mult, reduced = self.transform_string(string)
            terms.append((coeff * mult, reduced))
        return ObservableSum(self.n_qubits_out, terms)

    def _standard_transform(self, p: PauliString) -> tuple[float, PauliString]:
        s = self.symmetry
        if not p.commutes(s):
            raise MitigationError(
                f"{p.letters} does not commute with the symmetry {s.letters}")
        sigma = self._sigma
        if p.commutes(sigma):
            out = p
        else:
            out = p * sigma * s
            out = PauliString(out.letters, -out.phase)
        if self._w_needed:
            q = self.removed_qubit
            letters = list(out.letters)
            phase = out.phase
            if letters[q] == "X":
                letters[q] = "Z"
            elif letters[q] == "Z":
                letters[q] = "X"
            elif letters[q] == "Y":
                phase = -phase
            out = PauliString("".join(letters), phase)
        q = self.removed_qubit
        letter = out.letters[q]
        phase = out.phase
        if letter == "Z":
            phase *= self.sector
        elif letter != "I":
            raise MitigationError(
                f"transformed string {out.letters} is not I/Z on the tapered qubit")
        reduced = out.letters[:q] + out.letters[q + 1:]
        if abs(phase.imag) > 1e-12:
            raise MitigationError("tapering produced a non-Hermitian term")
        return float(phase.real), PauliString(reduced)

    def _custom_transform(self, p: PauliString) -> tuple[float, PauliString]:
        n = self.n_qubits_in
        m = n - 1
        x_mask = np.array([1 if c in "XY" else 0 for c in p.letters])
        z_mask = np.array([1 if c in "ZY" else 0 for c in p.letters])
        if int(x_mask.sum()) % 2 != 0:
            raise MitigationError(
                f"{p.letters} does not commute with the chain parity")
        # flips in prefix-parity coordinates
        fx = np.cumsum(x_mask)[:m] % 2
        # diagonal phases: b = R c with b0=c0, bi=c(i-1)^ci, b(n-1)=c(n-2)
        r = np.zeros((n, m), dtype=int)
        r[0, 0] = 1
        for i in range(1, n - 1):
            r[i, i - 1] = 1
            r[i, i] = 1
        r[n - 1, n - 2] = 1
        fz = (r.T @ z_mask) % 2
        reduced = PauliString("".join(
            "Y" if (a and b) else "X" if a else "Z" if b else "I"
            for a, b in zip(fx, fz)))
        # fix the constant phase by matching action on one sector state
        b0 = "0" * n
        amp_old, _ = p.apply_to_bits(b0)
        amp_new, _ = reduced.apply_to_bits(self.map_bitstring(b0))
        mult = amp_old / amp_new
        if abs(mult.imag) > 1e-12:
            raise MitigationError("custom tapering produced a non-Hermitian term")
        return float(mult.real), reduced

    # -- state map -----------------------------------------------------------
    def map_bitstring(self, bits: str) -> str:
        if len(bits) != self.n_qubits_in:
            raise ValueError("bitstring length mismatch")
        if self.kind == "parity_custom":
            if sum(map(int, bits)) % 2 != (0 if self.sector == 1 else 1):
                raise MitigationError(f"{bits} is not in the tapered sector")
            acc = 0
            out = []
            for b in bits[:-1]:
                acc ^= int(b)
                out.append(str(acc))
            return "".join(out)
        return self._standard_map_bitstring(bits)

    def _standard_map_bitstring(self, bits: str) -> str:
        n = self.n_qubits_in
        dim = 2 ** n
        vec = np.zeros(dim, dtype=complex)
        vec[int(bits, 2)] = 1.0
        svec = apply_pauli(vec, self.symmetry)
        eig = svec[int(bits, 2)].real
        if round(eig) != self.sector:
            raise MitigationError(f"{bits} is not in the {self.sector:+d} sector")
        out = (apply_pauli(vec, self._sigma) + svec) / np.sqrt(2.0)
        if self._w_needed:
            q = self.removed_qubit
            a = out.reshape(2 ** q, 2, -1)
            h = np.array([[1, 1], [1, -1]]) / np.sqrt(2.0)
            out = np.einsum("ab,ibj->iaj", h, a).reshape(-1)
        hits = np.nonzero(np.abs(out) > 1e-9)[0]
        if len(hits) != 1:
            raise MitigationError("sector state did not map to a basis state")
        full = bits_of_index(int(hits[0]), n)
        q = self.removed_qubit
        return full[:q] + full[q + 1:]

    def bitstring_map(self) -> dict[str, str]:
        """Full sector -> reduced-register bijection (small n only)."""
        n = self.n_qubits_in
        out = {}
        for i in range(2 ** n):
            bits = bits_of_index(i, n)
            try:
                out[bits] = self.map_bitstring(bits)
            except MitigationError:
                continue
        values = list(out.values())
        if len(set(values)) != 2 ** self.n_qubits_out or len(values) != 2 ** self.n_qubits_out:
            raise MitigationError("sector map is not a bijection")
        return out


def taper_standard(obs: ObservableSum, symmetry: PauliString, qubit: int,
                   sector: int = 1) -> tuple[ObservableSum, TaperMap]:
    """Standard single-symmetry tapering: conjugate so the symmetry becomes a
    single Pauli on the chosen qubit, pin that qubit to the sector eigenvalue
    and drop it."""
    if sector not in (1, -1):
        raise ValueError("sector must be +1 or -1")
    if symmetry.phase != 1:
        raise ValueError("symmetry string must carry phase +1")
    if not obs.commutes_with(symmetry):
        raise MitigationError("symmetry does not commute with the observable")
    letter = symmetry.letters[qubit]
    if letter == "I":
        raise MitigationError(
            f"symmetry acts trivially on qubit {qubit}; choose another qubit")
    if letter in ("Z", "Y"):
        sigma = PauliString.single(obs.n_qubits, qubit, "X")
        w_needed = True
    else:  # X: conjugating partner is Z, already lands on Z
        sigma = PauliString.single(obs.n_qubits, qubit, "Z")
        w_needed = False
    tmap = TaperMap("standard_z2", obs.n_qubits, sector, removed_qubit=qubit,
                    symmetry=symmetry, _w_needed=w_needed, _sigma=sigma)
    return tmap.transform(obs), tmap


def taper_parity_custom(obs: ObservableSum) -> tuple[ObservableSum, TaperMap]:
    """Prefix-parity tapering for chains whose symmetry is the all-Z parity.

    Sector states map by c_i = b_0 xor ... xor b_i (i < N-1); every adjacent
    X_i X_{i+1} becomes X_i and the transformed chain Hamiltonian acts on
    single qubits or adjacent pairs only.
    """
    n = obs.n_qubits
    if n < 2:
        raise ValueError("custom tapering needs at least two qubits")
    parity = PauliString("Z" * n)
    if not obs.commutes_with(parity):
        raise MitigationError("observable does not commute with the chain parity")
    tmap = TaperMap("parity_custom", n, sector=1, symmetry=parity)
    return tmap.transform(obs), tmap


# ---------------------------------------------------------------------------
# zero-noise extrapolation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtrapolationPolicy:
    kind: str = "none"                       # none | linear | exponential
    scale_points: tuple[float, ...] = (1.0, 3.0)
    min_high_noise_mag: float = 1e-4
    max_ratio: float = 2500.0

    def __post_init__(self):
        if self.kind not in ("none", "linear", "exponential"):
            raise ValueError(f"unknown extrapolation kind {self.kind!r}")
        pts = self.scale_points
        if len(pts) < 1 or pts[0] != 1.0 or any(
                b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("scale points must be strictly increasing from 1")
        if self.kind != "none" and len(pts) != 2:
            raise ValueError("two-point extrapolation requires exactly 2 scales")


@dataclass
class GuardReport:
    applied: bool
    method: str
    reasons: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"applied": self.applied, "method": self.method,
                "reasons": list(self.reasons)}


def extrapolate(measurements, policy: ExtrapolationPolicy) -> tuple[float, GuardReport]:
    """Zero-error estimate from per-scale expectation values.

    measurements: sequence of (scale, value) pairs, one per policy scale
    point.  Exponential extrapolation is applied only when all guards pass;
    otherwise the low-noise value is returned and the failure is flagged
    (guard failures are data, not errors).
    """
    pairs = sorted((float(s), float(v)) for s, v in measurements)
    scales = tuple(s for s, _ in pairs)
    if policy.kind == "none":
        if scales[0] != 1.0:
            raise ValueError("need a measurement at the unscaled noise point")
        return pairs[0][1], GuardReport(False, "none")
    if scales != tuple(policy.scale_points):
        raise ValueError(
            f"expected one value per scale point {policy.scale_points}, got {scales}")
    (s1, e1), (s2, e2) = pairs
    if policy.kind == "linear":
        value = (s2 * e1 - s1 * e2) / (s2 - s1)
        return value, GuardReport(True, "linear")
    reasons = []
    if e1 == 0.0 or e2 == 0.0 or np.sign(e1) != np.sign(e2):
        reasons.append("sign flip")
    if abs(e2) > abs(e1):
        reasons.append("magnitude increased with noise")
    if abs(e2) < policy.min_high_noise_mag:
        reasons.append(f"high-noise magnitude below {policy.min_high_noise_mag}")
    if abs(e2) > 0.0 and abs(e1 / e2) > policy.max_ratio:
        reasons.append(f"ratio above {policy.max_ratio}")
    if reasons:
        return e1, GuardReport(False, "exponential", reasons)
    lam = e1 * (e1 / e2) ** (s1 / (s2 - s1))
    return float(lam), GuardReport(True, "exponential")
