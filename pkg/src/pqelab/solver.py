"""Projective eigensolver core and the variational baseline.

Both solvers share the same quasi-Newton update and Pulay-style subspace
acceleration.  The projective route zeroes the residuals

    r_mu = <Phi_mu| U^dag H U |Phi_0>,

measured through energy evaluations with an extra generator rotation
inserted next to the reference; the variational route descends the
parameter-shift gradient of the energy.  For a one-parameter trial state
the two are the same quantity evaluation for evaluation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import Ansatz

log = logging.getLogger(__name__)

LARGE_PARAMETER_WARN = 100.0


@dataclass
class SolverConfig:
    tolerance: float = 1e-8
    max_iter: int = 100
    diis_depth: int = 6
    wrap_period: bool = True
    residual_formula: str = "reference_shift"   # or "three_point"
    denominator_floor: float = 0.2

    def __post_init__(self):
        if self.residual_formula not in ("reference_shift", "three_point"):
            raise ValueError(f"unknown residual formula {self.residual_formula!r}")
        if self.diis_depth < 1:
            raise ValueError("diis_depth must be >= 1")


@dataclass
class ResidualVector:
    r: np.ndarray
    energy_at_eval: float


@dataclass
class DiisHistory:
    """Bounded store of (parameter vector, error vector) pairs with
    Pulay extrapolation over the parameter vectors."""

    max_depth: int
    thetas: list[np.ndarray] = field(default_factory=list)
    errors: list[np.ndarray] = field(default_factory=list)

    def push(self, theta: np.ndarray, error: np.ndarray):
        self.thetas.append(np.array(theta, dtype=float))
        self.errors.append(np.array(error, dtype=float))
        if len(self.thetas) > self.max_depth:
            self.thetas.pop(0)
            self.errors.pop(0)
        # drop stale entries whose error scale dwarfs the current one; they
        # make the subspace system numerically singular and stall the tail
        norms = [float(np.max(np.abs(e))) for e in self.errors]
        floor = min(n for n in norms if n > 0.0) if any(norms) else 0.0
        if floor > 0.0:
            keep = [i for i, n in enumerate(norms) if n <= 1e3 * floor]
            if len(keep) >= 1 and len(keep) < len(norms):
                self.thetas = [self.thetas[i] for i in keep]
                self.errors = [self.errors[i] for i in keep]

    def extrapolate(self, fallback: np.ndarray) -> np.ndarray:
        m = len(self.thetas)
        if m == 0:
            return fallback
        b = np.empty((m + 1, m + 1))
        for i in range(m):
            for j in range(m):
                b[i, j] = float(self.errors[i] @ self.errors[j])
        # scale-relative ridge: keeps the system solvable as errors shrink
        scale = max(np.max(np.abs(np.diag(b[:m, :m]))), 1e-300)
        b[:m, :m] += 1e-12 * scale * np.eye(m)
        b[m, :m] = b[:m, m] = -1.0
        b[m, m] = 0.0
        rhs = np.zeros(m + 1)
        rhs[m] = -1.0
        try:
            coeff = np.linalg.solve(b, rhs)[:m]
        except np.linalg.LinAlgError:
            return fallback
        out = np.zeros_like(fallback)
        for c, t in zip(coeff, self.thetas):
            out += c * t
        return out


@dataclass
class SolveReport:
    method: str
    converged: bool
    iterations: int
    energies: list[float]            # length iterations + 1, includes theta0
    residual_norms: list[float]      # max-norm per residual evaluation
    parameters: list[list[float]]    # iterate trajectory, includes theta0
    final_energy: float
    final_parameters: list[float]
    target: str | None = None        # "ground"/"excited" by spectral proximity
    nearest_eigenvalue: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "energies": self.energies,
            "residual_norms": self.residual_norms,
            "parameters": self.parameters,
            "final_energy": self.final_energy,
            "final_parameters": self.final_parameters,
            "target": self.target,
            "nearest_eigenvalue": self.nearest_eigenvalue,
        }


def wrap_angles(theta: np.ndarray) -> np.ndarray:
    """Reduce each parameter modulo 2*pi into (-pi, pi]."""
    return math.pi - np.mod(math.pi - np.asarray(theta, dtype=float), 2.0 * math.pi)


def quasi_newton_denominators(ansatz: Ansatz, backend,
                              floor: float = 0.2) -> np.ndarray:
    """Diagonal Jacobian estimates from the Hamiltonian diagonal.

    Under the half-angle parameter convention the residual slope at the
    reference is (<Phi_mu|H|Phi_mu> - <Phi_0|H|Phi_0>) / 2; the magnitude is
    floored to avoid division blowup on near-degenerate targets.
    """
    obs = backend.observable
    e_ref = obs.diagonal_element(ansatz.reference)
    out = []
    for op in ansatz.ops:
        d = 0.5 * (obs.diagonal_element(op.target_state) - e_ref)
        sign = 1.0 if d >= 0 else -1.0
        out.append(sign * max(abs(d), floor))
    return np.array(out)


# ---------------------------------------------------------------------------
# residuals and gradients
# ---------------------------------------------------------------------------

def shifted_energy(ansatz: Ansatz, theta, mu: int, phi: float, backend) -> float:
    """E_mu(phi): energy with an extra exp(phi kappa_mu) inserted next to the
    reference, before the parameterized product."""
    if not 0 <= mu < ansatz.n_params:
        raise IndexError(f"parameter index {mu} out of range")
    circ = ansatz.compile(theta, shift_index=mu, shift_angle=phi)
    return backend.energy(circ)


def residual_reference_shift(ansatz: Ansatz, theta, mu: int, backend) -> float:
    """r_mu = [E_mu(pi/4) - E_mu(-pi/4)] / 2; two energy evaluations."""
    ep = shifted_energy(ansatz, theta, mu, math.pi / 4.0, backend)
    em = shifted_energy(ansatz, theta, mu, -math.pi / 4.0, backend)
    return 0.5 * (ep - em)


def residual_three_point(ansatz: Ansatz, theta, mu: int, backend,
                         base_energy: float | None = None) -> float:
    """r_mu = E_mu(pi/4) - [E_mu(pi/2) + E_mu(0)] / 2.

    E_mu(0) is the plain energy and is shared across mu when provided.
    """
    if base_energy is None:
        base_energy = backend.energy(ansatz.compile(theta))
    e_quarter = shifted_energy(ansatz, theta, mu, math.pi / 4.0, backend)
    e_half = shifted_energy(ansatz, theta, mu, math.pi / 2.0, backend)
    return e_quarter - 0.5 * (e_half + base_energy)


def residual_vector(ansatz: Ansatz, theta, backend, formula: str,
                    base_energy: float) -> ResidualVector:
    if formula == "reference_shift":
        r = [residual_reference_shift(ansatz, theta, mu, backend)
             for mu in range(ansatz.n_params)]
    else:
        r = [residual_three_point(ansatz, theta, mu, backend, base_energy)
             for mu in range(ansatz.n_params)]
    return ResidualVector(np.array(r), base_energy)


def vqe_gradient(ansatz: Ansatz, theta, mu: int, backend) -> float:
    """Parameter-shift gradient [E(theta + pi/2 e_mu) - E(theta - pi/2 e_mu)]/2,
    exact for the half-angle rotation convention used by the ansatz."""
    if not 0 <= mu < ansatz.n_params:
        raise IndexError(f"parameter index {mu} out of range")
    tp = np.array(theta, dtype=float)
    tm = tp.copy()
    tp[mu] += math.pi / 2.0
    tm[mu] -= math.pi / 2.0
    ep = backend.energy(ansatz.compile(tp))
    em = backend.energy(ansatz.compile(tm))
    return 0.5 * (ep - em)


def gradient_vector(ansatz: Ansatz, theta, backend) -> np.ndarray:
    return np.array([vqe_gradient(ansatz, theta, mu, backend)
                     for mu in range(ansatz.n_params)])


# ---------------------------------------------------------------------------
# the shared optimization loop
# ---------------------------------------------------------------------------

def _classify_target(energy: float, backend) -> tuple[str | None, float | None]:
    spectrum = getattr(backend, "spectrum", None)
    if spectrum is None:
        return None, None
    idx = int(np.argmin(np.abs(spectrum - energy)))
    return ("ground" if idx == 0 else "excited"), float(spectrum[idx])


def _solve(ansatz: Ansatz, theta0, backend, cfg: SolverConfig, method: str) -> SolveReport:
    theta = np.array(theta0, dtype=float)
    if len(theta) != ansatz.n_params:
        raise ValueError("theta0 length does not match the ansatz")
    delta = quasi_newton_denominators(ansatz, backend, cfg.denominator_floor)
    history = DiisHistory(cfg.diis_depth)
    energies = [backend.energy(ansatz.compile(theta))]
    residual_norms: list[float] = []
    trajectory = [theta.tolist()]
    converged = False
    for _ in range(cfg.max_iter):
        if method == "pqe":
            err = residual_vector(ansatz, theta, backend, cfg.residual_formula,
                                  energies[-1]).r
        else:
            err = gradient_vector(ansatz, theta, backend)
        residual_norms.append(float(np.max(np.abs(err))))
        if residual_norms[-1] <= cfg.tolerance:
            converged = True
            break
        jacobi = theta - err / delta
        history.push(jacobi, err)
        theta = history.extrapolate(fallback=jacobi)
        if cfg.wrap_period:
            theta = wrap_angles(theta)
        elif np.max(np.abs(theta)) > LARGE_PARAMETER_WARN:
            log.info("subspace extrapolation sent parameters to %.3g",
                     float(np.max(np.abs(theta))))
        trajectory.append(theta.tolist())
        energies.append(backend.energy(ansatz.compile(theta)))
    target, nearest = _classify_target(energies[-1], backend)
    return SolveReport(
        method=method,
        converged=converged,
        iterations=len(energies) - 1,
        energies=[float(e) for e in energies],
        residual_norms=residual_norms,
        parameters=trajectory,
        final_energy=float(energies[-1]),
        final_parameters=[float(t) for t in theta],
        target=target,
        nearest_eigenvalue=nearest,
    )


def pqe_solve(ansatz: Ansatz, theta0, backend, cfg: SolverConfig | None = None) -> SolveReport:
    """Zero the projective residuals by quasi-Newton iteration with subspace
    acceleration.  Non-convergence is reported in the result, not raised."""
    return _solve(ansatz, theta0, backend, cfg or SolverConfig(), "pqe")


def vqe_solve(ansatz: Ansatz, theta0, backend, cfg: SolverConfig | None = None) -> SolveReport:
    """Gradient-descent counterpart with the same update and acceleration
    machinery; stops on the max-norm of the parameter-shift gradient."""
    return _solve(ansatz, theta0, backend, cfg or SolverConfig(), "vqe")


def residual_variance_report(ansatz: Ansatz, theta, backend_factory,
                             n_seeds: int = 50, mu: int = 0) -> dict:
    """Sampling statistics of the two residual formulas at a fixed point.

    backend_factory(seed) must return a fresh sampled backend.  The two
    formulas are formally equivalent; no ordering of their variances is
    asserted anywhere, this report just exposes the comparison.
    """
    two, three = [], []
    for seed in range(n_seeds):
        backend = backend_factory(seed)
        two.append(residual_reference_shift(ansatz, theta, mu, backend))
        backend = backend_factory(10 ** 6 + seed)
        base = backend.energy(ansatz.compile(theta))
        three.append(residual_three_point(ansatz, theta, mu, backend, base))
    return {
        "n_seeds": n_seeds,
        "reference_shift": {"mean": float(np.mean(two)),
                            "variance": float(np.var(two))},
        "three_point": {"mean": float(np.mean(three)),
                        "variance": float(np.var(three))},
    }
