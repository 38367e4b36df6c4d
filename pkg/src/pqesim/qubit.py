"""Pauli-string algebra and the Jordan-Wigner map for fermionic operators.

Qubit ``q`` holds spin orbital ``q``; spin orbitals are interleaved so that
``q = 2 * spatial + spin`` with alpha spin on even qubits.  A Pauli string is
stored as a pair of bit masks ``(x_mask, z_mask)``: X on bits set only in
``x_mask``, Z on bits set only in ``z_mask``, Y where both are set.

The Jordan-Wigner convention is ``a_p = Z_0 ... Z_{p-1} (X_p + i Y_p) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping

import numpy as np

if TYPE_CHECKING:
    from .molecule import MolecularProblem

PRUNE_TOL = 1e-12

_PHASES = (1, 1j, -1, -1j)

_PAULI_2X2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _popcount(n: int) -> int:
    return bin(n).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    """A tensor product of single-qubit Pauli matrices, without coefficient."""

    x_mask: int
    z_mask: int
    num_qubits: int

    def __post_init__(self):
        if self.num_qubits < 0:
            raise ValueError("num_qubits must be non-negative")
        limit = 1 << self.num_qubits
        if not (0 <= self.x_mask < limit and 0 <= self.z_mask < limit):
            raise ValueError(
                f"masks ({self.x_mask:#x}, {self.z_mask:#x}) do not fit in "
                f"{self.num_qubits} qubits"
            )

    @classmethod
    def identity(cls, num_qubits: int) -> PauliString:
        return cls(0, 0, num_qubits)

    @classmethod
    def from_label(cls, label: str, num_qubits: int) -> PauliString:
        """Parse a sparse label such as ``"X0 Z1 Y3"`` (empty or ``"I"`` is identity)."""
        x = z = 0
        for token in label.split():
            if token == "I":
                continue
            kind, qubit = token[0].upper(), int(token[1:])
            bit = 1 << qubit
            if x & bit or z & bit:
                raise ValueError(f"qubit {qubit} repeated in {label!r}")
            if kind in "XY":
                x |= bit
            if kind in "ZY":
                z |= bit
            if kind not in "XYZ":
                raise ValueError(f"unknown Pauli {kind!r} in {label!r}")
        return cls(x, z, num_qubits)

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    @property
    def support(self) -> tuple[int, ...]:
        m = self.x_mask | self.z_mask
        return tuple(q for q in range(self.num_qubits) if m >> q & 1)

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def commutes_with(self, other: PauliString) -> bool:
        """Symplectic criterion: strings commute iff the symplectic product is even."""
        return (_popcount(self.x_mask & other.z_mask) + _popcount(self.z_mask & other.x_mask)) % 2 == 0

    def label(self) -> str:
        out = []
        for q in range(self.num_qubits):
            x, z = self.x_mask >> q & 1, self.z_mask >> q & 1
            if x and z:
                out.append(f"Y{q}")
            elif x:
                out.append(f"X{q}")
            elif z:
                out.append(f"Z{q}")
        return " ".join(out) or "I"

    def to_matrix(self) -> np.ndarray:
        """Dense matrix with qubit 0 as the least significant bit of the basis index."""
        m = np.ones((1, 1), dtype=complex)
        for q in range(self.num_qubits):
            x, z = self.x_mask >> q & 1, self.z_mask >> q & 1
            single = _PAULI_2X2["Y" if x and z else "X" if x else "Z" if z else "I"]
            m = np.kron(single, m)
        return m

    def __str__(self) -> str:
        return self.label()


def multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, c)`` with ``a * b = phase * c``.

    With ``P = i^{|x&z|} X^x Z^z``, moving ``Z^{z_a}`` past ``X^{x_b}`` costs
    ``(-1)^{|z_a & x_b|}``; the result masks are the XOR of the inputs.
    """
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"qubit count mismatch: {a.num_qubits} vs {b.num_qubits}")
    x = a.x_mask ^ b.x_mask
    z = a.z_mask ^ b.z_mask
    k = (
        _popcount(a.x_mask & a.z_mask)
        + _popcount(b.x_mask & b.z_mask)
        + 2 * _popcount(a.z_mask & b.x_mask)
        - _popcount(x & z)
    ) % 4
    return _PHASES[k], PauliString(x, z, a.num_qubits)


def _mul_masks(xa: int, za: int, xb: int, zb: int) -> tuple[int, int, int]:
    x, z = xa ^ xb, za ^ zb
    k = (_popcount(xa & za) + _popcount(xb & zb) + 2 * _popcount(za & xb) - _popcount(x & z)) % 4
    return x, z, k


class QubitOperator:
    """A linear combination of Pauli strings on a fixed number of qubits.

    Instances are treated as immutable; arithmetic returns new operators with
    like terms combined and coefficients below ``1e-12`` pruned.
    """

    __slots__ = ("num_qubits", "_terms", "_sparse")

    def __init__(self, terms: Iterable[tuple[complex, PauliString]] | Mapping | None = None,
                 num_qubits: int | None = None, *, prune: float = PRUNE_TOL):
        acc: dict[tuple[int, int], complex] = {}
        if isinstance(terms, Mapping):
            items = [(c, p) for p, c in terms.items()]
        else:
            items = list(terms or [])
        n = num_qubits
        for coeff, p in items:
            if n is None:
                n = p.num_qubits
            elif p.num_qubits != n:
                raise ValueError("all terms must act on the same number of qubits")
            key = (p.x_mask, p.z_mask)
            acc[key] = acc.get(key, 0.0) + complex(coeff)
        if n is None:
            raise ValueError("num_qubits required for an empty operator")
        self.num_qubits = n
        self._terms = {k: v for k, v in acc.items() if abs(v) > prune}
        self._sparse = None

    @classmethod
    def _from_dict(cls, terms: dict[tuple[int, int], complex], num_qubits: int,
                   prune: float = PRUNE_TOL) -> QubitOperator:
        op = cls.__new__(cls)
        op.num_qubits = num_qubits
        op._terms = {k: v for k, v in terms.items() if abs(v) > prune}
        op._sparse = None
        return op

    @classmethod
    def identity(cls, num_qubits: int, coeff: complex = 1.0) -> QubitOperator:
        return cls._from_dict({(0, 0): complex(coeff)}, num_qubits)

    @property
    def terms(self) -> list[tuple[complex, PauliString]]:
        """Terms in a deterministic order (ascending ``(x_mask, z_mask)``)."""
        return [(c, PauliString(x, z, self.num_qubits)) for (x, z), c in sorted(self._terms.items())]

    def items(self) -> Iterator[tuple[tuple[int, int], complex]]:
        return iter(sorted(self._terms.items()))

    def coefficient(self, p: PauliString) -> complex:
        return self._terms.get((p.x_mask, p.z_mask), 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self.terms)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g}) {p}" for c, p in self.terms[:8])
        more = f" + ... ({len(self)} terms)" if len(self) > 8 else ""
        return f"QubitOperator({body or '0'}{more})"

    def _check(self, other: QubitOperator):
        if other.num_qubits != self.num_qubits:
            raise ValueError(f"qubit count mismatch: {self.num_qubits} vs {other.num_qubits}")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = QubitOperator.identity(self.num_qubits, other)
        self._check(other)
        acc = dict(self._terms)
        for k, v in other._terms.items():
            acc[k] = acc.get(k, 0.0) + v
        return QubitOperator._from_dict(acc, self.num_qubits)

    __radd__ = __add__

    def __neg__(self):
        return QubitOperator._from_dict({k: -v for k, v in self._terms.items()}, self.num_qubits)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return QubitOperator._from_dict(
                {k: v * other for k, v in self._terms.items()}, self.num_qubits)
        self._check(other)
        acc: dict[tuple[int, int], complex] = {}
        for (xa, za), ca in self._terms.items():
            for (xb, zb), cb in other._terms.items():
                x, z, k = _mul_masks(xa, za, xb, zb)
                acc[(x, z)] = acc.get((x, z), 0.0) + ca * cb * _PHASES[k]
        return QubitOperator._from_dict(acc, self.num_qubits)

    def __rmul__(self, other):
        return self * other

    def adjoint(self) -> QubitOperator:
        return QubitOperator._from_dict(
            {k: v.conjugate() for k, v in self._terms.items()}, self.num_qubits)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def is_anti_hermitian(self, tol: float = 1e-10) -> bool:
        return all(abs(c.real) <= tol for c in self._terms.values())

    def terms_commute(self) -> bool:
        """True when every pair of terms commutes."""
        strings = [p for _, p in self.terms]
        return all(a.commutes_with(b) for i, a in enumerate(strings) for b in strings[i + 1:])

    def one_norm(self, include_identity: bool = True) -> float:
        return float(sum(abs(c) for (x, z), c in self._terms.items()
                         if include_identity or x or z))

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.num_qubits
        m = np.zeros((dim, dim), dtype=complex)
        for c, p in self.terms:
            m += c * p.to_matrix()
        return m

    def sparse(self):
        """Compiled sparse matrix (cached); see :func:`pqesim.state.compile_operator`."""
        if self._sparse is None:
            from .state import compile_operator
            self._sparse = compile_operator(self)
        return self._sparse


@dataclass(frozen=True, order=True)
class FermionExcitation:
    """Particle-hole excitation ``tau = a+_a a+_b ... a_j a_i``.

    ``holes`` are the annihilated spin orbitals ``(i, j, ...)`` and
    ``particles`` the created ones ``(a, b, ...)``, both strictly ascending.
    The pool operator is the anti-Hermitian ``kappa = tau - tau^dagger``.
    """

    holes: tuple[int, ...]
    particles: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(int(i) for i in self.holes))
        object.__setattr__(self, "particles", tuple(int(a) for a in self.particles))
        h, p = self.holes, self.particles
        if len(h) != len(p):
            raise ValueError(f"rank mismatch: holes {h} vs particles {p}")
        if any(x >= y for x, y in zip(h, h[1:])) or any(x >= y for x, y in zip(p, p[1:])):
            raise ValueError(f"indices must be strictly ascending and unique: {h}, {p}")
        if set(h) & set(p):
            raise ValueError(f"holes and particles overlap: {h}, {p}")
        if any(i < 0 for i in h + p):
            raise ValueError("negative orbital index")

    @property
    def rank(self) -> int:
        return len(self.holes)

    def max_index(self) -> int:
        return max(self.holes + self.particles, default=-1)

    def label(self) -> str:
        return f"{','.join(map(str, self.holes))}->{','.join(map(str, self.particles))}"

    def __str__(self) -> str:
        return self.label()


@lru_cache(maxsize=None)
def ladder_operator(p: int, dagger: bool, num_qubits: int) -> QubitOperator:
    """Jordan-Wigner image of ``a_p`` (or ``a+_p`` if ``dagger``)."""
    if not 0 <= p < num_qubits:
        raise ValueError(f"orbital {p} out of range for {num_qubits} qubits")
    chain = (1 << p) - 1
    bit = 1 << p
    # X_p Z_chain with coefficient 1/2, Y_p Z_chain with -+ i/2
    y_coeff = -0.5j if dagger else 0.5j
    return QubitOperator._from_dict(
        {(bit, chain): 0.5, (bit, chain | bit): y_coeff}, num_qubits)


def fermion_product(creators: Iterable[int], annihilators: Iterable[int],
                    num_qubits: int) -> QubitOperator:
    """Image of ``a+_{c0} a+_{c1} ... a_{a0} a_{a1} ...`` (operators in the given order)."""
    op = QubitOperator.identity(num_qubits)
    for p in creators:
        op = op * ladder_operator(p, True, num_qubits)
    for p in annihilators:
        op = op * ladder_operator(p, False, num_qubits)
    return op


@lru_cache(maxsize=4096)
def jordan_wigner_excitation(exc: FermionExcitation, num_qubits: int) -> QubitOperator:
    """Qubit image of ``kappa = tau - tau^dagger`` for a particle-hole excitation.

    For rank ``n`` the result has ``2**(2n-1)`` mutually commuting Pauli
    strings with purely imaginary coefficients.
    """
    if exc.max_index() >= num_qubits:
        raise ValueError(f"excitation {exc} does not fit in {num_qubits} qubits")
    tau = fermion_product(exc.particles, reversed(exc.holes), num_qubits)
    return tau - tau.adjoint()


def jordan_wigner_hamiltonian(problem: MolecularProblem) -> QubitOperator:
    """Qubit Hamiltonian ``sum h_pq a+_p a_q + 1/4 sum v_pqrs a+_p a+_q a_s a_r + E_core``.

    The two-body sum is folded onto ``p < q, r < s`` using the antisymmetry
    of ``v``, which removes the factor 1/4.
    """
    n = problem.num_qubits
    h = problem.spin_h
    v = problem.spin_v
    acc: dict[tuple[int, int], complex] = {(0, 0): complex(problem.core_energy)}

    def add(op: QubitOperator, scale: float):
        for k, c in op._terms.items():
            acc[k] = acc.get(k, 0.0) + scale * c

    for p in range(n):
        for q in range(n):
            if abs(h[p, q]) > 1e-14:
                add(fermion_product((p,), (q,), n), h[p, q])
    pairs = [(p, q) for p in range(n) for q in range(p + 1, n)]
    for p, q in pairs:
        for r, s in pairs:
            coeff = v[p, q, r, s]
            if abs(coeff) > 1e-14:
                add(fermion_product((p, q), (s, r), n), coeff)
    op = QubitOperator._from_dict(acc, n)
    if not op.is_hermitian(1e-12):
        raise ValueError("integrals produced a non-Hermitian qubit Hamiltonian")
    return QubitOperator._from_dict({k: complex(c.real) for k, c in op._terms.items()}, n)
