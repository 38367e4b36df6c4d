"""Selected PQE: grow a dUCC ansatz from measurements of a residual state.

Each macro-iteration prepares ``|r~> = U^dagger exp(i dt H) U |Phi_0>``, whose
non-reference amplitudes approximate ``i dt r_mu``; operators whose squared
residuals are collectively too large to discard are added to the ansatz and
the PQE equations are re-solved.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .ansatz import DuccAnsatz, estimate_cnots
from .molecule import Determinant, MolecularProblem, excitation_between
from .pqe import PqeConfig, run_pqe
from .qubit import FermionExcitation, QubitOperator, jordan_wigner_hamiltonian
from .state import StateVector, apply_trotter_evolution, sample_basis

SELECTION_MODES = ("exact", "sampled", "fixed-shots")
INSERTION_ORDERS = ("append", "prepend")


@dataclass
class SpqeConfig:
    """Macro-iteration settings.

    ``insertion`` controls where a selected batch enters the application
    order: ``"append"`` applies it after the existing operators, largest
    residual first; ``"prepend"`` applies it before them, smallest first, so
    that the largest new rotation sits next to the existing ones.
    ``trotter_steps = 0`` replaces the Trotter product by exact evolution.
    """

    omega: float = 1e-1
    dt: float = 0.05
    trotter_steps: int = 1
    mode: str = "exact"
    shots: int = 10**6
    max_macro: int = 50
    max_rank: int | None = None
    insertion: str = "prepend"
    rng_seed: int | None = None
    micro: PqeConfig = field(default_factory=PqeConfig)

    def __post_init__(self):
        if self.omega <= 0 or self.dt <= 0:
            raise ValueError("omega and dt must be positive")
        if self.mode not in SELECTION_MODES:
            raise ValueError(f"mode must be one of {SELECTION_MODES}")
        if self.insertion not in INSERTION_ORDERS:
            raise ValueError(f"insertion must be one of {INSERTION_ORDERS}")
        if self.trotter_steps < 0 or self.shots < 1:
            raise ValueError("trotter_steps must be >= 0 and shots >= 1")


@dataclass
class SelectionTally:
    """Outcome weights ``N_mu`` over determinants and their total ``M``.

    Sampled tallies hold integer counts; exact tallies hold probabilities
    with ``total = 1``.
    """

    counts: dict[Determinant, float]
    total: float

    def __post_init__(self):
        if self.total <= 0:
            raise ValueError("tally total must be positive")

    def probability(self, det: Determinant) -> float:
        return self.counts.get(det, 0) / self.total


def fixed_shot_count(omega: float, dt: float) -> int:
    """``M_Omega = ceil(1 / (dt^2 Omega^2))``."""
    if omega <= 0 or dt <= 0:
        raise ValueError("omega and dt must be positive")
    return math.ceil(round(1.0 / (dt * dt * omega * omega), 9))


def build_residual_state(ansatz: DuccAnsatz, h: QubitOperator, dt: float,
                         steps: int = 1) -> StateVector:
    """``U^dagger exp(+i dt H) U |Phi_0>``; ``steps = 0`` evolves exactly."""
    n = ansatz.num_qubits
    psi = ansatz.prepare_vector()
    if dt != 0:
        if steps == 0:
            psi = scipy.sparse.linalg.expm_multiply(1j * dt * h.sparse(), psi)
        else:
            psi = apply_trotter_evolution(StateVector(psi, n), h, -dt, steps).amplitudes
    return StateVector(ansatz.apply_adjoint(np.array(psi, dtype=complex)), n)


def candidate_excitation(reference: Determinant, det: Determinant,
                         max_rank: int | None = None) -> FermionExcitation | None:
    """Particle-hole operator reaching ``det`` from ``reference`` within the Sz sector."""
    even = int("01" * 32, 2)
    if det == reference or (det & even).bit_count() != (reference & even).bit_count():
        return None
    if (det & ~even).bit_count() != (reference & ~even).bit_count():
        return None
    exc = excitation_between(reference, det)
    if max_rank is not None and exc.rank > max_rank:
        return None
    return exc


def select_operators(tally: SelectionTally, current, omega: float, dt: float,
                     reference: Determinant | None = None,
                     max_rank: int | None = None) -> list[FermionExcitation]:
    """Operators whose squared residuals cannot all be discarded.

    Candidates are sorted by ascending ``|r~_mu|^2`` and discarded while the
    discarded sum over ``dt^2`` stays at or below ``Omega^2``.  Survivors are
    returned in descending ``|r~_mu|^2``, ties broken by ascending determinant
    integer.  The reference and operators already in ``current`` are skipped.
    """
    if isinstance(current, DuccAnsatz):
        reference = current.reference if reference is None else reference
        present = set(current.operators)
    else:
        present = set(current)
    if reference is None:
        raise ValueError("reference determinant required")
    items = []
    for det, count in tally.counts.items():
        exc = candidate_excitation(reference, det, max_rank)
        if exc is None or exc in present or count <= 0:
            continue
        items.append((count / tally.total, det, exc))
    items.sort(key=lambda it: (-it[0], it[1]))
    budget = omega * omega * dt * dt
    discarded = 0.0
    keep = len(items)
    while keep > 0 and discarded + items[keep - 1][0] <= budget:
        discarded += items[keep - 1][0]
        keep -= 1
    return [exc for _, _, exc in items[:keep]]


def exact_tally(state: StateVector, cutoff: float = 1e-30) -> SelectionTally:
    p = state.probabilities()
    hit = np.flatnonzero(p > cutoff)
    return SelectionTally({int(b): float(p[b]) for b in hit}, 1.0)


@dataclass
class SpqeIteration:
    macro_iter: int
    n_added: int
    n_par: int
    n_tplus: int
    energy: float
    residual_norm: float
    n_res: int
    n_cnot: int
    micro_converged: bool


@dataclass
class SpqeTrace:
    rows: list[SpqeIteration] = field(default_factory=list)
    converged: bool = False
    ansatz: DuccAnsatz | None = None
    initial_energy: float = float("nan")
    selections: list[list[FermionExcitation]] = field(default_factory=list)

    @property
    def energy(self) -> float:
        return self.rows[-1].energy if self.rows else self.initial_energy

    @property
    def n_par(self) -> int:
        return len(self.ansatz) if self.ansatz is not None else 0

    @property
    def n_res(self) -> int:
        return self.rows[-1].n_res if self.rows else 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["macro_iter", "n_par", "n_tplus", "energy", "residual_norm",
                    "n_res_cumulative", "n_cnot"])
        for r in self.rows:
            w.writerow([r.macro_iter, r.n_par, r.n_tplus, f"{r.energy:.12f}",
                        f"{r.residual_norm:.12e}", r.n_res, r.n_cnot])
        return buf.getvalue()


def _order_batch(ansatz: DuccAnsatz, batch: list[FermionExcitation], insertion: str) -> DuccAnsatz:
    if insertion == "append":
        ansatz.extend(batch)
        return ansatz
    ops = list(reversed(batch)) + ansatz.operators
    amps = np.concatenate([np.zeros(len(batch)), ansatz.amplitudes])
    return DuccAnsatz(ansatz.num_qubits, ansatz.reference, ops, amps)


def run_spqe(problem: MolecularProblem, config: SpqeConfig | None = None,
             h: QubitOperator | None = None) -> SpqeTrace:
    """Alternate operator selection and PQE micro-solves from an empty ansatz.

    Retained amplitudes are warm-started and new ones start at zero.  The run
    converges when a selection step adds nothing; ``n_res`` counts residual
    elements, i.e. the ansatz size summed over micro-iterations.
    """
    config = config or SpqeConfig()
    h = jordan_wigner_hamiltonian(problem) if h is None else h
    rng = np.random.default_rng(config.rng_seed)
    micro_rng = np.random.default_rng(rng.integers(2**63))
    ansatz = DuccAnsatz.for_problem(problem)
    trace = SpqeTrace(ansatz=ansatz)
    energy = trace.initial_energy = problem.hf_energy()
    shots = (fixed_shot_count(config.omega, config.dt) if config.mode == "fixed-shots"
             else config.shots)
    n_res = 0
    for macro in range(1, config.max_macro + 1):
        state = build_residual_state(ansatz, h, config.dt, config.trotter_steps)
        if config.mode == "exact":
            tally = exact_tally(state)
            batch = select_operators(tally, ansatz, config.omega, config.dt,
                                     max_rank=config.max_rank)
        else:
            tally = SelectionTally(sample_basis(state, shots, rng=rng), shots)
            if config.mode == "sampled":
                batch = select_operators(tally, ansatz, config.omega, config.dt,
                                         max_rank=config.max_rank)
            else:
                # every measured candidate is kept
                batch = select_operators(tally, ansatz, 0.0, config.dt,
                                         max_rank=config.max_rank)
        if not batch:
            trace.converged = True
            break
        trace.selections.append(batch)
        ansatz = _order_batch(ansatz, batch, config.insertion)
        micro = run_pqe(problem, ansatz, config.micro, h=h, rng=micro_rng)
        n_res += sum(len(ansatz) for _ in micro.rows)
        energy = micro.energy
        trace.rows.append(SpqeIteration(
            macro, len(batch), len(ansatz), sum(1 for e in ansatz.operators if e.rank >= 3),
            energy, micro.residual_norm, n_res, estimate_cnots(ansatz), micro.converged))
    trace.ansatz = ansatz
    return trace
