"""Energy-evaluation backends.

A backend is bound to one observable and answers energy(circuit).  The exact
backend evaluates expectation values on the statevector; the shot backend
plans qubitwise-commuting measurement settings, samples them (optionally
through synthetic noise), and runs the configured mitigation pipeline:
readout unfolding, symmetry postselection (with the staircase transform when
the group needs it), and per-term zero-noise extrapolation over folded
circuits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, gate_h, gate_rz, fold_cnots
from .engine import NoiseSpec, ShotTable, expectation, sample, sample_settings
from .mitigation import (CalibrationMatrix, ExtrapolationPolicy, GuardReport,
                         ParityRule, extrapolate, postselect_probs,
                         staircase_transform, unfold_counts)
from .paulis import ObservableSum, PauliString, group_for_measurement

log = logging.getLogger(__name__)


class ExactBackend:
    """Noise-free expectation values; also exposes the exact spectrum for
    fixed-point classification."""

    def __init__(self, observable: ObservableSum):
        self.observable = observable
        self._spectrum = None

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None and self.observable.n_qubits <= 12:
            self._spectrum = np.linalg.eigvalsh(self.observable.dense())
        return self._spectrum

    def energy(self, circuit: Circuit) -> float:
        return expectation(circuit, self.observable)


@dataclass
class Sampler:
    """Shot source with a bound noise model and random stream."""

    noise: NoiseSpec | None = None
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    method: str = "auto"

    def run(self, circuit: Circuit, rotations: Circuit | None,
            shots: int) -> ShotTable:
        return sample(circuit, rotations, shots, noise=self.noise,
                      seed=self.rng, method=self.method)

    def run_settings(self, circuit: Circuit, rotation_sets,
                     shots: int) -> list[ShotTable]:
        return sample_settings(circuit, rotation_sets, shots,
                               noise=self.noise, seed=self.rng,
                               method=self.method)


@dataclass
class _GroupPlan:
    rotations: Circuit
    measured: list[tuple[float, tuple[int, ...]]]   # (signed coeff, bit mask)
    rule: ParityRule | None
    skipped_postselection: bool = False


def _basis_rotations(n: int, letters: dict[int, str]) -> Circuit:
    circ = Circuit(n)
    for q, letter in sorted(letters.items()):
        if letter == "X":
            circ.append(gate_h(q))
        elif letter == "Y":
            circ.append(gate_rz(q, -0.5 * np.pi))
            circ.append(gate_h(q))
    return circ


def _setting_letters(strings: list[PauliString], n: int) -> dict[int, str] | None:
    """Per-qubit measurement letter for a qubitwise-commuting set, or None
    if the set is not simultaneously measurable."""
    letters: dict[int, str] = {}
    for s in strings:
        for q, c in enumerate(s.letters):
            if c == "I":
                continue
            if letters.setdefault(q, c) != c:
                return None
    return letters


def plan_group(group: ObservableSum, symmetry: PauliString | None,
               sector: int) -> _GroupPlan:
    """Measurement setting for one qubitwise-commuting group.

    With postselection requested, the symmetry is measured alongside the
    group when qubitwise compatible; otherwise the staircase transform is
    tried; otherwise postselection is skipped for the group and logged.
    """
    n = group.n_qubits
    plain = [(c, s) for c, s in group.terms]
    if symmetry is None:
        letters = _setting_letters([s for _, s in plain], n)
        return _GroupPlan(_basis_rotations(n, letters),
                          [(c, s.support) for c, s in plain], None)
    letters = _setting_letters([s for _, s in plain] + [symmetry], n)
    if letters is not None:
        return _GroupPlan(_basis_rotations(n, letters),
                          [(c, s.support) for c, s in plain],
                          ParityRule(symmetry.support, sector))
    stairs, smap = staircase_transform(n)
    mapped = []
    ok = True
    for c, s in plain:
        m = smap.transform_string(s)
        if abs(m.phase.imag) > 1e-12:
            ok = False
            break
        mapped.append((c * m.phase.real, m.bare()))
    mapped_sym = smap.transform_string(symmetry)
    if ok and mapped_sym.phase in (1, -1):
        letters = _setting_letters([s for _, s in mapped] + [mapped_sym.bare()], n)
        if letters is not None:
            rotations = stairs + _basis_rotations(n, letters)
            rule_sector = sector * int(mapped_sym.phase.real)
            return _GroupPlan(rotations,
                              [(c, s.support) for c, s in mapped],
                              ParityRule(mapped_sym.support, rule_sector))
    log.info("postselection not qubitwise measurable for group %s; skipped",
             group.text())
    letters = _setting_letters([s for _, s in plain], n)
    return _GroupPlan(_basis_rotations(n, letters),
                      [(c, s.support) for c, s in plain], None,
                      skipped_postselection=True)


def _bit_expectations(probs: np.ndarray, masks: list[tuple[int, ...]],
                      n: int) -> list[float]:
    idx = np.arange(len(probs))
    out = []
    for mask in masks:
        parity = np.zeros(len(probs), dtype=int)
        for q in mask:
            parity ^= (idx >> (n - 1 - q)) & 1
        out.append(float(np.sum(probs * (1 - 2 * parity))))
    return out


@dataclass
class ShotBackend:
    """Shot-sampled energies with the mitigation pipeline.

    Guard reports and postselection discard fractions are accumulated on the
    instance for inclusion in run records.
    """

    observable: ObservableSum
    sampler: Sampler
    shots: int
    calibration: CalibrationMatrix | None = None
    postselect_symmetry: PauliString | None = None
    sector: int = 1
    extrapolation: ExtrapolationPolicy = field(
        default_factory=lambda: ExtrapolationPolicy("none"))
    guard_log: list[GuardReport] = field(default_factory=list)
    discard_log: list[float] = field(default_factory=list)
    spectrum: np.ndarray | None = None

    def __post_init__(self):
        self._groups = group_for_measurement(self.observable)
        self._plans = [plan_group(g, self.postselect_symmetry, self.sector)
                       for g in self._groups]
        if self.observable.n_qubits <= 12:
            self.spectrum = np.linalg.eigvalsh(self.observable.dense())

    @property
    def scale_points(self) -> tuple[float, ...]:
        if self.extrapolation.kind == "none":
            return (1.0,)
        return self.extrapolation.scale_points

    def _fold(self, circuit: Circuit, scale: float) -> Circuit:
        pairs = int(round((scale - 1.0) / 2.0))
        if abs(2 * pairs + 1 - scale) > 1e-9:
            raise ValueError(f"scale {scale} is not an odd fold factor")
        return fold_cnots(circuit, pairs) if pairs else circuit

    def energy(self, circuit: Circuit) -> float:
        n = self.observable.n_qubits
        per_scale: dict[float, list[list[float]]] = {}
        for scale in self.scale_points:
            # one state-preparation evolution shared by all measurement groups
            tables = self.sampler.run_settings(
                self._fold(circuit, scale),
                [plan.rotations for plan in self._plans], self.shots)
            group_values = []
            for plan, table in zip(self._plans, tables):
                if self.calibration is not None:
                    probs = unfold_counts(table, self.calibration)
                else:
                    probs = table.frequencies()
                if plan.rule is not None:
                    probs, discarded = postselect_probs(probs, plan.rule, n)
                    self.discard_log.append(discarded)
                group_values.append(_bit_expectations(
                    probs, [m for _, m in plan.measured], n))
            per_scale[scale] = group_values
        total = 0.0
        for gi, plan in enumerate(self._plans):
            for k, (coeff, _) in enumerate(plan.measured):
                pairs = [(s, per_scale[s][gi][k]) for s in self.scale_points]
                if self.extrapolation.kind == "none":
                    value = pairs[0][1]
                else:
                    value, report = extrapolate(pairs, self.extrapolation)
                    self.guard_log.append(report)
                total += coeff * value
        return total
