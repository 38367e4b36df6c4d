"""Projective quantum eigensolver on a fixed dUCC ansatz.

Residuals ``r_mu = <Phi_mu| U^dagger H U |Phi_0>`` drive a diagonal
quasi-Newton update ``t <- t + r / Delta`` accelerated by DIIS.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .ansatz import DuccAnsatz, check_metric
from .molecule import MolecularProblem, fci_solve
from .qubit import QubitOperator
from .state import StateVector, expectation

DIIS_ERRORS = ("residual", "update")


@dataclass
class PqeConfig:
    """Micro-iteration settings.

    ``diis_error`` picks the DIIS error vector: ``"update"`` uses the
    quasi-Newton step ``r / Delta``, ``"residual"`` the raw residual.
    """

    omega_r: float = 1e-5
    max_micro: int = 100
    diis_depth: int = 8
    diis_start: int = 2
    diis_error: str = "update"
    noise_sigma: float = 0.0
    rng_seed: int | None = None
    residual_mode: str = "projective"

    def __post_init__(self):
        if self.omega_r <= 0:
            raise ValueError("omega_r must be positive")
        if self.max_micro < 1:
            raise ValueError("max_micro must be at least 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.diis_error not in DIIS_ERRORS:
            raise ValueError(f"diis_error must be one of {DIIS_ERRORS}")
        if self.residual_mode not in ("projective", "expectation"):
            raise ValueError("residual_mode must be 'projective' or 'expectation'")


@dataclass
class ResidualVector:
    values: np.ndarray
    energy: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def __len__(self) -> int:
        return len(self.values)


def _hbar_reference(ansatz: DuccAnsatz, h: QubitOperator, amplitudes=None) -> np.ndarray:
    """``U^dagger H U |Phi_0>`` as a raw vector."""
    psi = ansatz.prepare_vector(amplitudes)
    return ansatz.apply_adjoint(h.sparse() @ psi, amplitudes)


def residual_projective(ansatz: DuccAnsatz, h: QubitOperator, amplitudes=None) -> ResidualVector:
    """All residual elements from one ``U^dagger H U |Phi_0>`` pipeline."""
    excited = ansatz.excited_determinants()
    dets = [d for _, d in excited]
    if len(set(dets)) != len(dets) or ansatz.reference in dets:
        raise ValueError("ansatz metric is not the identity: repeated excited determinants")
    chi = _hbar_reference(ansatz, h, amplitudes)
    if not excited:
        return ResidualVector(np.zeros(0), float(chi[ansatz.reference].real))
    phase = np.array([p for p, _ in excited], dtype=float)
    r = phase * chi[dets]
    if np.max(np.abs(r.imag)) > 1e-10:
        raise ArithmeticError(f"residuals have imaginary parts up to {np.max(np.abs(r.imag)):.2e}")
    return ResidualVector(r.real.copy(), float(chi[ansatz.reference].real))


def residual_via_expectation(ansatz: DuccAnsatz, h: QubitOperator, mu: int,
                             amplitudes=None) -> float:
    """Residual element from three energy expectation values.

    ``r_mu = <Omega_mu|Hbar|Omega_mu> - E_mu / 2 - E_0 / 2`` with
    ``|Omega_mu> = exp(pi/4 kappa_mu)|Phi_0>``; each term is measured on
    ``U`` applied to the corresponding state.
    """
    n = ansatz.num_qubits

    def energy(vec):
        return expectation(StateVector(ansatz.apply_unitary(vec, amplitudes), n), h)

    ref = ansatz.reference_vector()
    omega = ansatz._rotations[mu].apply(ref.copy(), np.pi / 4)
    phase, det = ansatz.excited_determinants()[mu]
    phi_mu = np.zeros_like(ref)
    phi_mu[det] = phase
    return energy(omega) - 0.5 * energy(phi_mu) - 0.5 * energy(ref)


def quasi_newton_step(residual, denominators, amplitudes, labels=None) -> np.ndarray:
    """``t + r / Delta`` elementwise."""
    r = np.asarray(getattr(residual, "values", residual), dtype=float)
    d = np.asarray(denominators, dtype=float)
    t = np.asarray(amplitudes, dtype=float)
    small = np.flatnonzero(np.abs(d) < 1e-8)
    if small.size:
        k = int(small[0])
        name = labels[k] if labels is not None else f"index {k}"
        raise ZeroDivisionError(f"vanishing denominator {d[k]:.2e} for excitation {name} "
                                "(degenerate orbitals)")
    return t + r / d


def diis_extrapolate(history, fallback=None) -> np.ndarray:
    """Pulay extrapolation over ``[(amplitudes, error), ...]``.

    Solves the bordered system ``[[B, -1], [-1, 0]] [c, l] = [0, -1]`` with
    ``B_ij = e_i . e_j``.  A singular system returns ``fallback`` (default the
    newest amplitudes).
    """
    if len(history) < 2:
        raise ValueError("DIIS needs at least two history entries")
    ts = np.array([np.asarray(t, float) for t, _ in history])
    es = np.array([np.asarray(e, float) for _, e in history])
    fallback = ts[-1] if fallback is None else np.asarray(fallback, float)
    m = len(history)
    B = -np.ones((m + 1, m + 1))
    B[:m, :m] = es @ es.T
    B[m, m] = 0.0
    scale = np.max(np.abs(np.diag(B[:m, :m])))
    if not np.isfinite(scale) or scale == 0.0:
        return fallback.copy()
    B[:m, :m] /= scale
    rhs = np.zeros(m + 1)
    rhs[m] = -1.0
    if np.linalg.cond(B) > 1e14:
        return fallback.copy()
    c = np.linalg.solve(B, rhs)[:m]
    return c @ ts


def inject_noise(vector, sigma: float, seed=None) -> np.ndarray:
    """Add independent ``N(0, sigma^2)`` draws; ``seed`` may be a Generator."""
    v = np.asarray(vector, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return v.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return v + rng.normal(0.0, sigma, size=v.shape)


@dataclass
class PqeIteration:
    iteration: int
    energy: float
    delta_e: float
    n_res: int
    residual_norm: float


@dataclass
class PqeTrace:
    rows: list[PqeIteration] = field(default_factory=list)
    converged: bool = False
    amplitudes: np.ndarray | None = None
    initial_energy: float = float("nan")

    @property
    def energy(self) -> float:
        return self.rows[-1].energy if self.rows else self.initial_energy

    @property
    def n_res(self) -> int:
        return self.rows[-1].n_res if self.rows else 0

    @property
    def residual_norm(self) -> float:
        return self.rows[-1].residual_norm if self.rows else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "energy", "delta_e", "n_res_evals", "residual_norm"])
        for r in self.rows:
            w.writerow([r.iteration, f"{r.energy:.12f}", f"{r.delta_e:.12e}", r.n_res,
                        f"{r.residual_norm:.12e}"])
        return buf.getvalue()


def run_pqe(problem: MolecularProblem, ansatz: DuccAnsatz, config: PqeConfig | None = None,
            h: QubitOperator | None = None, rng: np.random.Generator | None = None) -> PqeTrace:
    """Solve the residual equations; the ansatz amplitudes are updated in place.

    Each iteration evaluates ``r(t)``, optionally adds noise, takes the
    quasi-Newton step and records the energy at the stepped amplitudes with
    ``||r(t)||``.  The loop stops after the first iteration whose residual
    norm is at most ``omega_r``; otherwise DIIS extrapolates over the stepped
    amplitudes to seed the next iteration.
    """
    from .qubit import jordan_wigner_hamiltonian

    config = config or PqeConfig()
    h = jordan_wigner_hamiltonian(problem) if h is None else h
    if check_metric(ansatz) > 1e-10:
        raise ValueError("PQE requires an ansatz with identity metric")
    rng = rng or np.random.default_rng(config.rng_seed)
    denom = problem.mp_denominators(ansatz.operators)
    t = ansatz.amplitudes.copy()
    energy = expectation(ansatz.prepare_state(t), h)
    trace = PqeTrace(initial_energy=energy)
    if len(ansatz) == 0:
        trace.converged = True
        trace.amplitudes = t
        return trace
    history: list[tuple[np.ndarray, np.ndarray]] = []
    for it in range(1, config.max_micro + 1):
        if config.residual_mode == "projective":
            r = residual_projective(ansatz, h, t).values
        else:
            r = np.array([residual_via_expectation(ansatz, h, k, t) for k in range(len(ansatz))])
        r = inject_noise(r, config.noise_sigma, rng)
        norm = float(np.linalg.norm(r))
        t_qn = quasi_newton_step(r, denom, t, ansatz.operators)
        new_energy = expectation(ansatz.prepare_state(t_qn), h)
        trace.rows.append(PqeIteration(it, new_energy, new_energy - energy, it, norm))
        energy = new_energy
        if not (np.isfinite(norm) and np.isfinite(energy)):
            t = t_qn
            break
        if norm <= config.omega_r:
            t = t_qn
            trace.converged = True
            break
        history.append((t_qn, t_qn - t if config.diis_error == "update" else r))
        history = history[-config.diis_depth:]
        if it >= config.diis_start and len(history) >= 2:
            t = diis_extrapolate(history, fallback=t_qn)
        else:
            t = t_qn
    ansatz.set_amplitudes(t)
    trace.amplitudes = t.copy()
    return trace


def gershgorin_radius(ansatz: DuccAnsatz, h: QubitOperator, problem: MolecularProblem,
                      spectrum=None, max_dim: int = 5000) -> tuple[float, bool]:
    """1-norm of ``<Phi_k|Hbar|Phi_0>`` over every non-reference determinant.

    Returns ``(rho, bound_holds)`` where ``bound_holds`` checks that some exact
    eigenvalue lies within ``rho`` of the PQE energy.
    """
    chi = _hbar_reference(ansatz, h)
    if spectrum is None:
        from .molecule import determinant_space
        if len(determinant_space(problem)) > max_dim:
            raise ValueError("determinant basis too large for the Gershgorin check")
        spectrum = fci_solve(problem, roots=None).energies
    e_pqe = chi[ansatz.reference].real
    off = np.abs(chi)
    off[ansatz.reference] = 0.0
    rho = float(off.sum())
    gap = float(np.min(np.abs(np.asarray(spectrum) - e_pqe)))
    return rho, gap <= rho + 1e-10
