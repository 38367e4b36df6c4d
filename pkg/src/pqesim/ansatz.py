"""Disentangled UCC trial states.

``U(t) = prod_mu exp(t_mu kappa_mu)`` over an ordered operator list.  The list
order is the application order: the first operator acts on the reference
first.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .molecule import Determinant, apply_excitation_phase
from .qubit import FermionExcitation, QubitOperator, jordan_wigner_excitation
from .state import ExcitationRotation, StateVector

_HEADER = "# dUCC ansatz; qubit q = 2*spatial + spin (alpha even), basis index LSB = qubit 0"


@lru_cache(maxsize=8192)
def excitation_rotation(exc: FermionExcitation, num_qubits: int) -> ExcitationRotation:
    return ExcitationRotation(exc, num_qubits)


class DuplicateOperatorError(ValueError):
    pass


class DuccAnsatz:
    """Ordered excitation list with amplitudes over a fixed reference determinant."""

    def __init__(self, num_qubits: int, reference: Determinant,
                 operators: Iterable[FermionExcitation] = (),
                 amplitudes: Sequence[float] | None = None):
        self.num_qubits = num_qubits
        self.reference = reference
        self.operators: list[FermionExcitation] = []
        self._kappas: list[QubitOperator] = []
        self._rotations: list[ExcitationRotation] = []
        self._index: dict[FermionExcitation, int] = {}
        self.amplitudes = np.zeros(0)
        ops = list(operators)
        self.extend(ops)
        if amplitudes is not None:
            self.set_amplitudes(amplitudes)

    @classmethod
    def for_problem(cls, problem, operators=(), amplitudes=None) -> DuccAnsatz:
        return cls(problem.num_qubits, problem.reference, operators, amplitudes)

    def __len__(self) -> int:
        return len(self.operators)

    def __contains__(self, exc: FermionExcitation) -> bool:
        return exc in self._index

    @property
    def num_parameters(self) -> int:
        return len(self.operators)

    @property
    def kappas(self) -> list[QubitOperator]:
        return list(self._kappas)

    def copy(self) -> DuccAnsatz:
        return DuccAnsatz(self.num_qubits, self.reference, self.operators, self.amplitudes.copy())

    def append(self, exc: FermionExcitation, amplitude: float = 0.0):
        self.extend([exc], [amplitude])

    def extend(self, excitations: Iterable[FermionExcitation],
               amplitudes: Sequence[float] | None = None):
        excitations = list(excitations)
        amps = np.zeros(len(excitations)) if amplitudes is None else np.asarray(amplitudes, float)
        if len(amps) != len(excitations):
            raise ValueError("one amplitude per operator required")
        seen = set(self._index)
        for exc in excitations:
            if exc in seen:
                raise DuplicateOperatorError(f"operator {exc} already present in the ansatz")
            seen.add(exc)
        for exc in excitations:
            self._index[exc] = len(self.operators)
            self.operators.append(exc)
            self._kappas.append(jordan_wigner_excitation(exc, self.num_qubits))
            self._rotations.append(excitation_rotation(exc, self.num_qubits))
        self.amplitudes = np.concatenate([self.amplitudes, amps])

    def set_amplitudes(self, amplitudes: Sequence[float]):
        amps = np.array(amplitudes, dtype=float)
        if amps.shape != (len(self.operators),):
            raise ValueError(f"expected {len(self.operators)} amplitudes, got {amps.shape}")
        self.amplitudes = amps

    def apply_unitary(self, vec: np.ndarray, amplitudes=None) -> np.ndarray:
        """In-place ``vec <- U(t) vec``."""
        t = self.amplitudes if amplitudes is None else amplitudes
        for rot, tk in zip(self._rotations, t):
            rot.apply(vec, tk)
        return vec

    def apply_adjoint(self, vec: np.ndarray, amplitudes=None) -> np.ndarray:
        """In-place ``vec <- U(t)^dagger vec``."""
        t = self.amplitudes if amplitudes is None else amplitudes
        for rot, tk in zip(reversed(self._rotations), t[::-1]):
            rot.apply(vec, -tk)
        return vec

    def reference_vector(self) -> np.ndarray:
        vec = np.zeros(1 << self.num_qubits, dtype=complex)
        vec[self.reference] = 1.0
        return vec

    def prepare_vector(self, amplitudes=None) -> np.ndarray:
        return self.apply_unitary(self.reference_vector(), amplitudes)

    def prepare_state(self, amplitudes=None) -> StateVector:
        return StateVector(self.prepare_vector(amplitudes), self.num_qubits)

    def excited_determinants(self) -> list[tuple[int, Determinant]]:
        """``(phase, det)`` with ``kappa_mu |Phi_0> = phase |det>`` per operator."""
        out = []
        for exc in self.operators:
            hit = apply_excitation_phase(self.reference, exc)
            if hit is None:
                raise ValueError(f"operator {exc} does not excite the reference")
            out.append(hit)
        return out

    def to_text(self) -> str:
        lines = [_HEADER, f"# num_qubits={self.num_qubits} reference={self.reference}"]
        for exc, t in zip(self.operators, self.amplitudes):
            lines.append(f"{','.join(map(str, exc.holes))};{','.join(map(str, exc.particles))};{float(t)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> DuccAnsatz:
        n = ref = None
        ops, amps = [], []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("num_qubits="):
                        n = int(tok.split("=")[1])
                    elif tok.startswith("reference="):
                        ref = int(tok.split("=")[1])
                continue
            holes, parts, amp = line.split(";")
            ops.append(FermionExcitation(tuple(int(i) for i in holes.split(",") if i),
                                         tuple(int(a) for a in parts.split(",") if a)))
            amps.append(float(amp))
        if n is None or ref is None:
            raise ValueError("ansatz text lacks the num_qubits/reference header")
        return cls(n, ref, ops, amps)


def prepare_state(ansatz: DuccAnsatz) -> StateVector:
    return ansatz.prepare_state()


def _kappa_on_reference(reference: Determinant, exc: FermionExcitation) -> dict[int, float]:
    out: dict[int, float] = {}
    fwd = apply_excitation_phase(reference, exc)
    if fwd is not None:
        out[fwd[1]] = out.get(fwd[1], 0.0) + fwd[0]
    back = apply_excitation_phase(reference, FermionExcitation(exc.particles, exc.holes))
    if back is not None:
        out[back[1]] = out.get(back[1], 0.0) - back[0]
    return out


def metric_matrix(reference: Determinant, operators: Sequence[FermionExcitation]) -> np.ndarray:
    """``S_ij = <Phi_0| kappa_i^dagger kappa_j |Phi_0>`` from determinant images."""
    images = [_kappa_on_reference(reference, e) for e in operators]
    n = len(images)
    S = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            S[i, j] = S[j, i] = sum(c * images[j].get(d, 0.0) for d, c in images[i].items())
    return S


def check_metric(ansatz: DuccAnsatz | Sequence[FermionExcitation],
                 reference: Determinant | None = None) -> float:
    """Largest deviation of the metric matrix from the identity."""
    if isinstance(ansatz, DuccAnsatz):
        ops, reference = ansatz.operators, ansatz.reference
    else:
        ops = list(ansatz)
        if reference is None:
            raise ValueError("reference determinant required for a bare operator list")
    if not ops:
        return 0.0
    S = metric_matrix(reference, ops)
    return float(np.max(np.abs(S - np.eye(len(ops)))))


def pauli_cnot_count(kappa: QubitOperator) -> int:
    """CNOT staircase cost ``2 (w - 1)`` summed over the strings of one operator."""
    return sum(2 * max(p.weight - 1, 0) for _, p in kappa.terms)


def estimate_cnots(ansatz: DuccAnsatz) -> int:
    return sum(pauli_cnot_count(k) for k in ansatz._kappas)


def ordering_for_fixed_ansatz(pool: Iterable[FermionExcitation],
                              reference: Determinant) -> list[FermionExcitation]:
    """Sort particle-hole operators by the integer of their excited determinant."""
    keyed = []
    for exc in pool:
        hit = apply_excitation_phase(reference, exc)
        if hit is None:
            raise ValueError(f"operator {exc} does not excite the reference")
        keyed.append((hit[1], exc))
    keyed.sort(key=lambda kv: kv[0])
    return [exc for _, exc in keyed]
