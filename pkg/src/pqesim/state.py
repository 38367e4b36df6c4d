"""Dense state-vector engine.

Basis index ``b`` encodes the occupation bitstring with qubit 0 as the least
significant bit.  A Pauli string with masks ``(x, z)`` acts as

    P |b> = i^{|x & z|} (-1)^{|b & z|} |b ^ x>

so every operation below is a permutation of amplitudes with phases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from .qubit import FermionExcitation, PauliString, QubitOperator

MAX_QUBITS = 20

_I_POW = np.array([1, 1j, -1, -1j])


def _parity(idx: np.ndarray, mask: int) -> np.ndarray:
    """``popcount(idx & mask) & 1`` elementwise."""
    return (np.bitwise_count(idx & mask) & 1).astype(np.int64)


@dataclass
class StateVector:
    """Complex amplitudes over ``2**num_qubits`` computational basis states."""

    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.num_qubits > MAX_QUBITS:
            raise ValueError(f"{self.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit ceiling")
        if self.amplitudes.shape != (1 << self.num_qubits,):
            raise ValueError(f"expected {1 << self.num_qubits} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def basis(cls, num_qubits: int, index: int) -> StateVector:
        amps = np.zeros(1 << num_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps, num_qubits)

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy(), self.num_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)


def _check_size(state: StateVector, n: int):
    if state.num_qubits != n:
        raise ValueError(f"size mismatch: state has {state.num_qubits} qubits, operator {n}")


def _indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def pauli_action(vec: np.ndarray, x: int, z: int) -> np.ndarray:
    """Return ``P vec`` for masks ``(x, z)`` on a raw amplitude array."""
    idx = np.arange(len(vec), dtype=np.int64)
    phase = _I_POW[(x & z).bit_count() % 4] * (1 - 2 * _parity(idx, z))
    out = np.empty_like(vec)
    out[idx ^ x] = phase * vec
    return out


def apply_pauli_string(state: StateVector, p: PauliString) -> StateVector:
    _check_size(state, p.num_qubits)
    return StateVector(pauli_action(state.amplitudes, p.x_mask, p.z_mask), state.num_qubits)


def _exp_pauli_inplace(vec: np.ndarray, a: complex, x: int, z: int):
    """``vec <- exp(a P) vec`` for a Pauli string ``P`` (``P**2 = 1``)."""
    if x == 0 and z == 0:
        vec *= np.exp(a)
        return
    pv = pauli_action(vec, x, z)
    vec *= np.cosh(a)
    vec += np.sinh(a) * pv


def apply_exp_kappa(state: StateVector, kappa: QubitOperator, t: float) -> StateVector:
    """Exact ``exp(t kappa)|psi>`` for an anti-Hermitian sum of commuting strings.

    The exponential factorizes into one rotation per Pauli term because the
    terms commute.
    """
    _check_size(state, kappa.num_qubits)
    if not kappa.is_anti_hermitian(1e-12):
        raise ValueError("kappa must be anti-Hermitian (purely imaginary coefficients)")
    if not kappa.terms_commute():
        raise ValueError("kappa terms do not pairwise commute; the product form would not be exact")
    vec = state.amplitudes.copy()
    for (x, z), c in kappa.items():
        _exp_pauli_inplace(vec, t * c, x, z)
    return StateVector(vec, state.num_qubits)


def compile_operator(op: QubitOperator) -> scipy.sparse.csr_matrix:
    """Sparse matrix of ``op``, built by grouping terms with equal ``x_mask``.

    Each group contributes ``diag_x[b] = sum_z c i^{|x&z|} (-1)^{|b&z|}`` on the
    entries ``(b ^ x, b)``.  Hermitian operators with real matrices (every
    real-integral Hamiltonian) are stored as float64.
    """
    n = op.num_qubits
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit ceiling")
    idx = _indices(n)
    groups: dict[int, list[tuple[int, complex]]] = {}
    for (x, z), c in op.items():
        groups.setdefault(x, []).append((z, c))
    rows, cols, vals = [], [], []
    for x, zs in groups.items():
        diag = np.zeros(len(idx), dtype=complex)
        for z, c in zs:
            diag += (c * _I_POW[(x & z).bit_count() % 4]) * (1 - 2 * _parity(idx, z))
        keep = np.abs(diag) > 1e-14
        rows.append((idx ^ x)[keep])
        cols.append(idx[keep])
        vals.append(diag[keep])
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0, dtype=complex)
    if vals.size and np.max(np.abs(vals.imag)) < 1e-14:
        vals = vals.real
    dim = 1 << n
    return scipy.sparse.csr_matrix((vals, (rows.astype(np.int32), cols.astype(np.int32))),
                                   shape=(dim, dim))


def apply_operator(state: StateVector, op: QubitOperator) -> StateVector:
    _check_size(state, op.num_qubits)
    return StateVector(op.sparse() @ state.amplitudes, state.num_qubits)


def expectation(state: StateVector, op: QubitOperator) -> float:
    """``<psi|O|psi>`` for Hermitian ``O``."""
    _check_size(state, op.num_qubits)
    if not op.is_hermitian(1e-12):
        raise ValueError("expectation requires a Hermitian operator")
    psi = state.amplitudes
    val = np.vdot(psi, op.sparse() @ psi)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def overlap(bra: StateVector, ket: StateVector) -> complex:
    """``<bra|ket>``."""
    if bra.num_qubits != ket.num_qubits:
        raise ValueError("size mismatch between bra and ket")
    return complex(np.vdot(bra.amplitudes, ket.amplitudes))


def sample_basis(state: StateVector, shots: int, seed: int | None = None,
                 rng: np.random.Generator | None = None) -> dict[int, int]:
    """Multinomial sample of computational-basis outcomes, ``{index: count}``."""
    if shots < 1:
        raise ValueError("shots must be positive")
    p = state.probabilities()
    total = p.sum()
    if total < 1e-300:
        raise ValueError("cannot sample a zero-norm state")
    rng = np.random.default_rng(seed) if rng is None else rng
    counts = rng.multinomial(shots, p / total)
    hit = np.flatnonzero(counts)
    return {int(b): int(counts[b]) for b in hit}


def trotter_term_order(h: QubitOperator) -> list[tuple[tuple[int, int], complex]]:
    """Terms sorted by descending ``|c|``, ties by ascending ``(x_mask, z_mask)``."""
    return sorted(h.items(), key=lambda kv: (-abs(kv[1]), kv[0]))


def apply_trotter_evolution(state: StateVector, h: QubitOperator, dt: float,
                            steps: int = 1) -> StateVector:
    """First-order Trotter approximation of ``exp(-i dt H)|psi>``.

    Each of the ``steps`` slices applies ``exp(-i (dt/steps) c_l P_l)`` for
    every term, the first term of :func:`trotter_term_order` acting first.
    A negative ``dt`` gives ``exp(+i |dt| H)``.
    """
    _check_size(state, h.num_qubits)
    if not h.is_hermitian(1e-12):
        raise ValueError("time evolution requires a Hermitian operator")
    if steps < 1:
        raise ValueError("steps must be positive")
    vec = state.amplitudes.copy()
    if dt == 0:
        return StateVector(vec, state.num_qubits)
    tau = dt / steps
    order = trotter_term_order(h)
    for _ in range(steps):
        for (x, z), c in order:
            _exp_pauli_inplace(vec, -1j * tau * c.real, x, z)
    return StateVector(vec, state.num_qubits)


class ExcitationRotation:
    """Fast exact ``exp(t kappa)`` for ``kappa = tau - tau^dagger``.

    ``tau`` maps each basis state ``b`` with the holes occupied and particles
    empty to ``s_b |b'>``, so the exponential is a set of independent 2x2
    rotations on the pairs ``(b, b')``:

        psi'[b]  = cos t psi[b]  - s_b sin t psi[b']
        psi'[b'] = cos t psi[b'] + s_b sin t psi[b]

    This agrees with the product of Pauli rotations of the Jordan-Wigner image
    but costs one pass over the pairs.
    """

    __slots__ = ("excitation", "num_qubits", "src", "dst", "sign")

    def __init__(self, exc: FermionExcitation, num_qubits: int):
        if exc.max_index() >= num_qubits:
            raise ValueError(f"excitation {exc} does not fit in {num_qubits} qubits")
        self.excitation = exc
        self.num_qubits = num_qubits
        hmask = sum(1 << i for i in exc.holes)
        pmask = sum(1 << a for a in exc.particles)
        idx = _indices(num_qubits)
        src = idx[(idx & hmask) == hmask]
        src = src[(src & pmask) == 0]
        parity = np.zeros(len(src), dtype=np.int64)
        cur = src.copy()
        for p in exc.holes:
            parity += np.bitwise_count(cur & ((1 << p) - 1)).astype(np.int64)
            cur ^= 1 << p
        for p in reversed(exc.particles):
            parity += np.bitwise_count(cur & ((1 << p) - 1)).astype(np.int64)
            cur |= 1 << p
        self.src = src
        self.dst = cur
        self.sign = (1 - 2 * (parity & 1)).astype(float)

    def apply(self, vec: np.ndarray, t: float) -> np.ndarray:
        """In-place ``vec <- exp(t kappa) vec``; returns ``vec``."""
        if t == 0.0:
            return vec
        c, s = np.cos(t), np.sin(t)
        a, b = vec[self.src], vec[self.dst]
        vec[self.src] = c * a - s * self.sign * b
        vec[self.dst] = c * b + s * self.sign * a
        return vec

    def apply_generator(self, vec: np.ndarray) -> np.ndarray:
        """Return ``kappa vec`` (a new array)."""
        out = np.zeros_like(vec)
        out[self.dst] = self.sign * vec[self.src]
        out[self.src] = -self.sign * vec[self.dst]
        return out
