"""The two studied model Hamiltonians and their exact-diagonalization oracles.

* A two-level hydrogen-molecule model: the symmetric two-determinant CI
  problem encoded on one qubit, with matrix elements read from a bundled
  dataset (R, h00, h11, h01, enuc per geometry).
* The open transverse-field Ising chain H = -h sum_i Z_i + J sum_i X_i X_{i+1}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .paulis import ObservableSum, PauliString

H2_DATA_RESOURCE = "h2_sto6g.csv"

# sanity envelope for the bundled 0.4-6.0 A dataset; guards corrupt data.
# The Z prefactor reaches -1.39 at the most compressed geometry, so the
# lower bound is set below that rather than at the loose -1.0 guess.
H01_RANGE = (0.15, 0.36)
DZ_RANGE = (-1.45, 0.01)


@dataclass(frozen=True)
class H2Record:
    """Two-determinant CI data for one geometry (lengths in Angstrom,
    energies in Hartree)."""

    bond_length: float
    h00: float
    h11: float
    h01: float
    enuc: float

    def validate(self) -> "H2Record":
        dz = 0.5 * (self.h00 - self.h11)
        if not (H01_RANGE[0] <= self.h01 <= H01_RANGE[1]):
            raise ValueError(
                f"h01={self.h01} at R={self.bond_length} outside sanity envelope")
        if not (DZ_RANGE[0] <= dz <= DZ_RANGE[1]):
            raise ValueError(
                f"(h00-h11)/2={dz} at R={self.bond_length} outside sanity envelope")
        return self

    @property
    def fci_ground(self) -> float:
        half = 0.5 * (self.h00 - self.h11)
        return 0.5 * (self.h00 + self.h11) + self.enuc - np.hypot(self.h01, half)

    @property
    def fci_excited(self) -> float:
        half = 0.5 * (self.h00 - self.h11)
        return 0.5 * (self.h00 + self.h11) + self.enuc + np.hypot(self.h01, half)


def load_h2_dataset(path=None) -> list[H2Record]:
    """Load and validate the bundled (or a user-provided) H2 CSV dataset."""
    if path is None:
        ref = resources.files("pqelab").joinpath("data").joinpath(H2_DATA_RESOURCE)
        text = ref.read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    records = []
    reader = csv.DictReader(text.strip().splitlines())
    required = {"R", "h00", "h11", "h01", "enuc"}
    if reader.fieldnames is None or not required <= set(reader.fieldnames):
        raise ValueError(f"H2 dataset must have columns {sorted(required)}")
    for row in reader:
        rec = H2Record(float(row["R"]), float(row["h00"]), float(row["h11"]),
                       float(row["h01"]), float(row["enuc"]))
        records.append(rec.validate())
    if not records:
        raise ValueError("H2 dataset is empty")
    return sorted(records, key=lambda r: r.bond_length)


def build_h2_observable(rec: H2Record) -> tuple[ObservableSum, float]:
    """One-qubit observable h01*X + ((h00-h11)/2)*Z and the constant offset
    (h00+h11)/2 + enuc."""
    obs = ObservableSum(1, [
        (rec.h01, PauliString("X")),
        (0.5 * (rec.h00 - rec.h11), PauliString("Z")),
    ])
    const = 0.5 * (rec.h00 + rec.h11) + rec.enuc
    return obs, const


@dataclass(frozen=True)
class TfimSpec:
    n_sites: int
    h: float = 1.0
    j: float = 1.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("need at least one site")


def build_tfim(spec: TfimSpec) -> ObservableSum:
    """Open-chain transverse-field Ising Hamiltonian:
    -h sum Z_i + J sum_{i<N-1} X_i X_{i+1}."""
    n = spec.n_sites
    terms = [(-spec.h, PauliString.single(n, i, "Z")) for i in range(n)]
    for i in range(n - 1):
        s = ["I"] * n
        s[i] = "X"
        s[i + 1] = "X"
        terms.append((spec.j, PauliString("".join(s))))
    return ObservableSum(n, terms)


def tfim_field_only_energy(spec: TfimSpec) -> float:
    """Ground energy of the J=0 chain (all spins aligned with the field)."""
    return -abs(spec.h) * spec.n_sites


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    ground_energy: float
    first_excited_energy: float
    correlation_energy: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "ground_energy": float(self.ground_energy),
            "first_excited_energy": float(self.first_excited_energy),
            "correlation_energy": (None if self.correlation_energy is None
                                   else float(self.correlation_energy)),
        }


def exact_diagonalize(obs: ObservableSum,
                      reference_energy: float | None = None) -> SpectrumReport:
    """Full spectrum of the dense matrix, ascending.

    When a reference (uncorrelated) energy is supplied the correlation energy
    E_exact - E_ref is recorded; it is negative by convention.
    """
    if obs.n_qubits > 20:
        raise ValueError("diagonalization capped at 20 qubits")
    evals = np.linalg.eigvalsh(obs.dense())
    corr = None if reference_energy is None else float(evals[0] - reference_energy)
    return SpectrumReport(
        eigenvalues=evals,
        ground_energy=float(evals[0]),
        first_excited_energy=float(evals[1]) if len(evals) > 1 else float(evals[0]),
        correlation_energy=corr,
    )


def ground_state(obs: ObservableSum) -> np.ndarray:
    evals, evecs = np.linalg.eigh(obs.dense())
    return evecs[:, 0]


@dataclass(frozen=True)
class CorrelationObservable:
    axis: str
    site_i: int
    site_j: int
    observable: ObservableSum


def correlation_observables(n: int) -> list[CorrelationObservable]:
    """All spin-spin alignment observables sigma_i sigma_j for
    sigma in {X, Y, Z} and i < j: 3 * n(n-1)/2 of them."""
    if n < 2:
        raise ValueError("need at least two sites")
    out = []
    for axis in "XYZ":
        for i in range(n):
            for j in range(i + 1, n):
                s = ["I"] * n
                s[i] = axis
                s[j] = axis
                out.append(CorrelationObservable(
                    axis, i, j, ObservableSum(n, [(1.0, PauliString("".join(s)))])))
    return out


def max_reference_overlap(obs: ObservableSum, degeneracy_tol: float = 1e-9) -> float:
    """Largest |<basis state|ground state>|^2.

    For a degenerate ground level the squared projection onto the whole
    degenerate subspace is maximized instead.
    """
    evals, evecs = np.linalg.eigh(obs.dense())
    sel = np.abs(evals - evals[0]) <= degeneracy_tol
    block = evecs[:, sel]
    weights = np.sum(np.abs(block) ** 2, axis=1)
    return float(np.max(weights))
