"""Variational reference solvers: dUCC-VQE with analytic gradients and ADAPT-VQE."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .ansatz import DuccAnsatz, excitation_rotation
from .molecule import MolecularProblem, apply_excitation_phase, enumerate_pool
from .qubit import FermionExcitation, QubitOperator, jordan_wigner_hamiltonian
from .state import StateVector


@dataclass
class VqeConfig:
    omega_g: float = 1e-5
    adapt_epsilon: float = 1e-3
    max_bfgs_iters: int = 1000
    max_params: int | None = None
    max_macro: int = 200
    noise_sigma: float = 0.0
    rng_seed: int | None = None
    pool_kind: str = "particle-hole-SD"

    def __post_init__(self):
        if self.omega_g <= 0 or self.adapt_epsilon <= 0:
            raise ValueError("thresholds must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


def vqe_energy(ansatz: DuccAnsatz, h: QubitOperator, amplitudes=None) -> float:
    psi = ansatz.prepare_vector(amplitudes)
    return float(np.vdot(psi, h.sparse() @ psi).real)


def energy_and_gradient(ansatz: DuccAnsatz, h: QubitOperator, amplitudes=None):
    """Energy and ``dE/dt`` by a reverse sweep over the ansatz factors.

    With ``psi_k`` the state after factor ``k`` and ``lam_k`` the adjoint of
    the remaining factors applied to ``H U |Phi_0>``,
    ``dE/dt_k = 2 Re <lam_k| kappa_k |psi_k>``.
    """
    t = ansatz.amplitudes if amplitudes is None else np.asarray(amplitudes, float)
    psi = ansatz.prepare_vector(t)
    lam = h.sparse() @ psi
    energy = float(np.vdot(psi, lam).real)
    grad = np.zeros(len(t))
    rots = ansatz._rotations
    for k in range(len(t) - 1, -1, -1):
        rot = rots[k]
        grad[k] = 2.0 * np.vdot(lam, rot.apply_generator(psi)).real
        rot.apply(psi, -t[k])
        rot.apply(lam, -t[k])
    return energy, grad


def vqe_gradient(ansatz: DuccAnsatz, h: QubitOperator, amplitudes=None) -> np.ndarray:
    return energy_and_gradient(ansatz, h, amplitudes)[1]


@dataclass
class VqeIteration:
    iteration: int
    energy: float
    delta_e: float
    n_grad: int
    grad_norm: float


@dataclass
class VqeTrace:
    rows: list[VqeIteration] = field(default_factory=list)
    converged: bool = False
    amplitudes: np.ndarray | None = None
    initial_energy: float = float("nan")
    message: str = ""
    n_grad: int = 0

    @property
    def n_grad_elements(self) -> int:
        """Gradient components evaluated: evaluations times parameter count."""
        return self.n_grad * (len(self.amplitudes) if self.amplitudes is not None else 0)

    @property
    def energy(self) -> float:
        return self.rows[-1].energy if self.rows else self.initial_energy

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "energy", "delta_e", "n_grad_evals", "grad_norm"])
        for r in self.rows:
            w.writerow([r.iteration, f"{r.energy:.12f}", f"{r.delta_e:.12e}", r.n_grad,
                        f"{r.grad_norm:.12e}"])
        return buf.getvalue()


def run_vqe(problem: MolecularProblem, ansatz: DuccAnsatz, config: VqeConfig | None = None,
            h: QubitOperator | None = None, rng: np.random.Generator | None = None) -> VqeTrace:
    """BFGS minimization of the dUCC energy; amplitudes are updated in place.

    Every gradient evaluation is counted, line-search probes included.  The
    stopping test is ``max |g_k| <= omega_g``.  With ``noise_sigma > 0`` each
    gradient component receives an independent Gaussian error.
    """
    config = config or VqeConfig()
    h = jordan_wigner_hamiltonian(problem) if h is None else h
    rng = rng or np.random.default_rng(config.rng_seed)
    t0 = ansatz.amplitudes.copy()
    trace = VqeTrace(initial_energy=vqe_energy(ansatz, h, t0))
    if len(ansatz) == 0:
        trace.converged = True
        trace.amplitudes = t0
        return trace

    cache: dict[bytes, tuple[float, np.ndarray]] = {}
    count = [0]

    def fun(x):
        e, g = energy_and_gradient(ansatz, h, x)
        if config.noise_sigma > 0:
            g = g + rng.normal(0.0, config.noise_sigma, size=g.shape)
        count[0] += 1
        cache[x.tobytes()] = (e, g)
        return e, g

    prev = [trace.initial_energy]
    last = [t0]

    def record(xk):
        e, g = cache.get(xk.tobytes()) or fun(xk)
        trace.rows.append(VqeIteration(len(trace.rows) + 1, e, e - prev[0], count[0],
                                       float(np.linalg.norm(g))))
        prev[0] = e
        last[0] = xk.copy()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = scipy.optimize.minimize(fun, t0, jac=True, method="BFGS", callback=record,
                                      options={"gtol": config.omega_g, "norm": np.inf,
                                               "maxiter": config.max_bfgs_iters})
    x = np.asarray(res.x, float)
    if not np.array_equal(x, last[0]):
        record(x)
    ansatz.set_amplitudes(x)
    trace.amplitudes = x.copy()
    trace.converged = bool(res.success)
    trace.message = str(res.message)
    trace.n_grad = count[0]
    return trace


def adapt_pool_gradients(state: StateVector | np.ndarray, pool, h: QubitOperator) -> np.ndarray:
    """``g_mu = <psi|[H, kappa_mu]|psi> = 2 Re <H psi| kappa_mu psi>`` for each pool operator."""
    psi = np.asarray(getattr(state, "amplitudes", state))
    n = h.num_qubits
    hpsi = h.sparse() @ psi
    return np.array([2.0 * np.vdot(hpsi, excitation_rotation(exc, n).apply_generator(psi)).real
                     for exc in pool])


@dataclass
class AdaptIteration:
    macro_iter: int
    operator: FermionExcitation | None
    n_par: int
    energy: float
    pool_grad_norm: float
    n_grad: int
    n_grad_elements: int


@dataclass
class AdaptTrace:
    rows: list[AdaptIteration] = field(default_factory=list)
    converged: bool = False
    stagnated: bool = False
    ansatz: DuccAnsatz | None = None
    initial_energy: float = float("nan")

    @property
    def energy(self) -> float:
        return self.rows[-1].energy if self.rows else self.initial_energy

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["macro_iter", "operator", "n_par", "energy", "pool_grad_norm",
                    "n_grad_evals", "n_grad_elements"])
        for r in self.rows:
            w.writerow([r.macro_iter, r.operator.label() if r.operator else "", r.n_par,
                        f"{r.energy:.12f}", f"{r.pool_grad_norm:.12e}", r.n_grad,
                        r.n_grad_elements])
        return buf.getvalue()


def run_adapt_vqe(problem: MolecularProblem, config: VqeConfig | None = None,
                  h: QubitOperator | None = None, pool=None) -> AdaptTrace:
    """ADAPT-VQE: grow the ansatz by the largest pool gradient and re-optimize.

    Stops when the pool-gradient norm is at most ``adapt_epsilon``, when
    ``max_params`` operators are present, or (flagged) when the selected
    gradient is below 1e-12.
    """
    config = config or VqeConfig()
    h = jordan_wigner_hamiltonian(problem) if h is None else h
    pool = enumerate_pool(problem, 2, config.pool_kind) if pool is None else list(pool)
    pool = sorted(pool, key=lambda e: _pool_key(problem.reference, e))
    rng = np.random.default_rng(config.rng_seed)
    ansatz = DuccAnsatz.for_problem(problem)
    trace = AdaptTrace(ansatz=ansatz, initial_energy=vqe_energy(ansatz, h))
    n_grad = n_elem = 0
    for macro in range(1, config.max_macro + 1):
        if config.max_params is not None and len(ansatz) >= config.max_params:
            trace.converged = True
            break
        candidates = [e for e in pool if e not in ansatz]
        if not candidates:
            trace.converged = True
            break
        g = adapt_pool_gradients(ansatz.prepare_vector(), candidates, h)
        norm = float(np.linalg.norm(g))
        if norm <= config.adapt_epsilon:
            trace.converged = True
            break
        best = int(np.argmax(np.abs(g)))
        if abs(g[best]) < 1e-12:
            trace.stagnated = True
            break
        ansatz.append(candidates[best])
        vt = run_vqe(problem, ansatz, config, h=h, rng=rng)
        n_grad += vt.n_grad
        n_elem += vt.n_grad_elements
        trace.rows.append(AdaptIteration(macro, candidates[best], len(ansatz), vt.energy, norm,
                                         n_grad, n_elem))
    return trace


def _pool_key(reference, exc):
    hit = apply_excitation_phase(reference, exc)
    return (0, hit[1], exc) if hit is not None else (1, 0, exc)


@dataclass(frozen=True)
class MeasurementCost:
    m_grad: float
    m_res: float

    @property
    def ratio(self) -> float:
        return self.m_res / self.m_grad


def measurement_cost_estimates(h: QubitOperator | float, n_par: int, epsilon: float,
                               epsilon_res: float | None = None) -> MeasurementCost:
    """Shot-count bounds ``4 N L^2 / eps^2`` (gradient) and ``3 N L^2 / eps^2`` (residual).

    ``L`` is the coefficient 1-norm of ``h`` without the identity term, which
    needs no measurement.  A float ``h`` is taken as ``L`` directly.
    """
    if epsilon <= 0 or (epsilon_res is not None and epsilon_res <= 0):
        raise ValueError("epsilon must be positive")
    L = h.one_norm(include_identity=False) if isinstance(h, QubitOperator) else float(h)
    eps_r = epsilon if epsilon_res is None else epsilon_res
    return MeasurementCost(4.0 * n_par * L**2 / epsilon**2, 3.0 * n_par * L**2 / eps_r**2)
