"""Molecular integrals, determinants, operator pools and the FCI oracle.

Integrals are read from FCIDUMP files (chemists' notation, 1-based indices)
and expanded on demand into spin-orbital quantities using the interleaved
convention ``P = 2 * p + spin`` (alpha even, beta odd).  Determinants are
plain integers whose bit ``P`` is the occupation of spin orbital ``P``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from .qubit import FermionExcitation

Determinant = int

POOL_KINDS = ("particle-hole-SD", "particle-hole-full", "generalized-SD")


class FcidumpError(ValueError):
    """Malformed or inconsistent FCIDUMP input."""


@dataclass(frozen=True, eq=False)
class MolecularProblem:
    """Second-quantized electronic Hamiltonian over ``num_spatial`` orbitals.

    ``h`` holds one-electron integrals and ``eri`` the two-electron integrals
    ``(pq|rs)`` in chemists' notation, both over spatial orbitals.
    """

    num_spatial: int
    num_electrons: int
    ms2: int
    core_energy: float
    h: np.ndarray
    eri: np.ndarray
    orbsym: tuple[int, ...] = ()
    name: str = ""

    def __post_init__(self):
        n = self.num_spatial
        if self.h.shape != (n, n) or self.eri.shape != (n, n, n, n):
            raise ValueError("integral arrays do not match num_spatial")
        if (self.num_electrons + self.ms2) % 2 or abs(self.ms2) > self.num_electrons:
            raise ValueError(f"inconsistent NELEC={self.num_electrons}, MS2={self.ms2}")
        if self.num_electrons > 2 * n:
            raise ValueError("more electrons than spin orbitals")
        if not np.allclose(self.h, self.h.T, atol=1e-12):
            raise ValueError("one-electron integrals are not symmetric")
        g = self.eri
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.allclose(g, g.transpose(perm), atol=1e-12):
                raise ValueError("two-electron integrals lack 8-fold symmetry")
        self.h.setflags(write=False)
        self.eri.setflags(write=False)

    @property
    def num_qubits(self) -> int:
        return 2 * self.num_spatial

    @property
    def num_alpha(self) -> int:
        return (self.num_electrons + self.ms2) // 2

    @property
    def num_beta(self) -> int:
        return (self.num_electrons - self.ms2) // 2

    @cached_property
    def spin_h(self) -> np.ndarray:
        n = self.num_qubits
        sp, sg = np.arange(n) // 2, np.arange(n) % 2
        out = self.h[np.ix_(sp, sp)] * (sg[:, None] == sg[None, :])
        out.setflags(write=False)
        return out

    @cached_property
    def spin_v(self) -> np.ndarray:
        """Antisymmetrized ``<PQ||RS> = <PQ|RS> - <PQ|SR>`` over spin orbitals."""
        n = self.num_qubits
        sp, sg = np.arange(n) // 2, np.arange(n) % 2
        phys = self.eri.transpose(0, 2, 1, 3)  # <pq|rs> = (pr|qs)
        same_pr = sg[:, None, None, None] == sg[None, None, :, None]
        same_qs = sg[None, :, None, None] == sg[None, None, None, :]
        direct = phys[np.ix_(sp, sp, sp, sp)] * (same_pr & same_qs)
        out = direct - direct.transpose(0, 1, 3, 2)
        out.setflags(write=False)
        return out

    @cached_property
    def reference(self) -> Determinant:
        return reference_determinant(self)

    @cached_property
    def orbital_energies(self) -> np.ndarray:
        """Fock diagonal ``eps_P = h_PP + sum_{I occ} <PI||PI>`` per spin orbital.

        The occupied set is the lowest-``h`` Aufbau filling iterated to
        self-consistency, which for canonical RHF integrals reproduces the
        Hartree-Fock orbital energies.
        """
        occ = _occupied(_aufbau(np.diag(self.spin_h), self.num_alpha, self.num_beta))
        for _ in range(10):
            eps = np.diag(self.spin_h) + np.einsum("pipi->p", self.spin_v[:, occ][:, :, :, occ])
            new = _occupied(_aufbau(eps, self.num_alpha, self.num_beta))
            if new == occ:
                break
            occ = new
        eps.setflags(write=False)
        return eps

    def hf_energy(self, det: Determinant | None = None) -> float:
        det = self.reference if det is None else det
        occ = _occupied(det)
        e = self.core_energy + sum(self.spin_h[i, i] for i in occ)
        e += 0.5 * sum(self.spin_v[i, j, i, j] for i in occ for j in occ)
        return float(e)

    def mp_denominator(self, exc: FermionExcitation) -> float:
        """``Delta = sum eps_holes - sum eps_particles``."""
        eps = self.orbital_energies
        return float(sum(eps[i] for i in exc.holes) - sum(eps[a] for a in exc.particles))

    def mp_denominators(self, excitations) -> np.ndarray:
        return np.array([self.mp_denominator(e) for e in excitations])

    def fock_matrix(self, det: Determinant | None = None) -> np.ndarray:
        occ = _occupied(self.reference if det is None else det)
        return self.spin_h + np.einsum("pjqj->pq", self.spin_v[:, occ][:, :, :, occ])


def _occupied(det: int) -> list[int]:
    out, p = [], 0
    while det:
        if det & 1:
            out.append(p)
        det >>= 1
        p += 1
    return out


def _aufbau(eps: np.ndarray, n_alpha: int, n_beta: int, strict: bool = False) -> int:
    det = 0
    for spin, count in ((0, n_alpha), (1, n_beta)):
        orbs = np.arange(spin, len(eps), 2)
        order = orbs[np.argsort(eps[orbs], kind="stable")]
        if strict and 0 < count < len(order):
            last, first = eps[order[count - 1]], eps[order[count]]
            if abs(first - last) < 1e-8:
                raise ValueError(
                    f"degenerate frontier orbitals {order[count - 1]} and {order[count]} "
                    f"(eps = {last:.10f}): Aufbau filling is ambiguous")
        for p in order[:count]:
            det |= 1 << int(p)
    return det


def parse_fcidump(text: str, name: str = "") -> MolecularProblem:
    """Parse FCIDUMP text into a :class:`MolecularProblem`.

    Lines ``v i j k l`` with all indices positive are ``(ij|kl)``; ``v i j 0 0``
    is ``h_ij``; ``v 0 0 0 0`` is the core energy.  Lines ``v i 0 0 0`` (orbital
    energies) are ignored.  Every symmetry image is populated; two lines that
    address the same integral with different values raise :class:`FcidumpError`.
    """
    m = re.search(r"&FCI(.*?)(&END|/)", text, flags=re.S | re.I)
    if not m:
        raise FcidumpError("missing &FCI ... &END header")
    header, body = m.group(1), text[m.end():]
    fields = {}
    for key, val in re.findall(r"([A-Za-z0-9_]+)\s*=\s*([^=]*?)(?=,?\s*[A-Za-z0-9_]+\s*=|\s*$)",
                               header, flags=re.S):
        fields[key.upper()] = val.strip().rstrip(",")
    try:
        norb = int(fields["NORB"])
        nelec = int(fields["NELEC"])
    except (KeyError, ValueError) as exc:
        raise FcidumpError(f"header must declare NORB and NELEC: {exc}") from None
    try:
        ms2 = int(fields.get("MS2", "0"))
        orbsym = tuple(int(x) for x in re.split(r"[,\s]+", fields.get("ORBSYM", "")) if x)
    except ValueError as exc:
        raise FcidumpError(f"malformed header field: {exc}") from None

    h = np.zeros((norb, norb))
    eri = np.zeros((norb,) * 4)
    h_set = np.zeros((norb, norb), dtype=bool)
    eri_set = np.zeros((norb,) * 4, dtype=bool)
    core = None

    def put(arr, mask, idx_list, value, line):
        for idx in idx_list:
            if mask[idx] and abs(arr[idx] - value) > 1e-10:
                raise FcidumpError(f"conflicting duplicate entry: {line.strip()!r}")
        for idx in idx_list:
            arr[idx] = value
            mask[idx] = True

    for line in body.splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise FcidumpError(f"expected 'value i j k l', got {line.strip()!r}")
        try:
            value = float(re.sub(r"[dD]", "E", parts[0]))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError:
            raise FcidumpError(f"unparseable line {line.strip()!r}") from None
        if max(i, j, k, l) > norb or min(i, j, k, l) < 0:
            raise FcidumpError(f"index out of range 1..{norb}: {line.strip()!r}")
        if i == j == k == l == 0:
            if core is not None and abs(core - value) > 1e-10:
                raise FcidumpError("conflicting core energy entries")
            core = value
        elif k == l == 0 and j == 0:
            continue
        elif k == l == 0:
            a, b = i - 1, j - 1
            put(h, h_set, [(a, b), (b, a)], value, line)
        elif min(i, j, k, l) == 0:
            raise FcidumpError(f"partial zero indices: {line.strip()!r}")
        else:
            a, b, c, d = i - 1, j - 1, k - 1, l - 1
            images = {(a, b, c, d), (b, a, c, d), (a, b, d, c), (b, a, d, c),
                      (c, d, a, b), (d, c, a, b), (c, d, b, a), (d, c, b, a)}
            put(eri, eri_set, sorted(images), value, line)
    return MolecularProblem(norb, nelec, ms2, core or 0.0, h, eri, orbsym, name)


def fixture_path(name: str | Path) -> Path:
    """Resolve a bundled fixture name (e.g. ``"h4_1.00"``) or an explicit file path."""
    p = Path(name)
    if p.is_file():
        return p
    bundled = Path(__file__).parent / "data" / f"{p.name.removesuffix('.fcidump')}.fcidump"
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(f"no FCIDUMP file or bundled fixture named {str(name)!r}")


def list_fixtures() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).parent / "data").glob("*.fcidump"))


def read_fcidump(path: str | Path) -> MolecularProblem:
    path = fixture_path(path)
    return parse_fcidump(path.read_text(), name=path.stem)


def reference_determinant(problem: MolecularProblem) -> Determinant:
    """Aufbau filling of the lowest-energy spin orbitals of each spin."""
    eps = problem.orbital_energies
    return _aufbau(np.asarray(eps), problem.num_alpha, problem.num_beta, strict=True)


def occupied(det: Determinant) -> list[int]:
    return _occupied(det)


def apply_excitation_phase(det: Determinant, exc: FermionExcitation) -> tuple[int, Determinant] | None:
    """Apply ``tau = a+_a a+_b ... a_j a_i`` to a determinant.

    Returns ``(phase, new_det)`` or ``None`` if ``tau`` annihilates ``det``.
    """
    for p in exc.holes:
        if not det >> p & 1:
            return None
    sign = 0
    for p in exc.holes:  # a_i acts first
        sign += bin(det & ((1 << p) - 1)).count("1")
        det ^= 1 << p
    for p in reversed(exc.particles):
        if det >> p & 1:
            return None
        sign += bin(det & ((1 << p) - 1)).count("1")
        det |= 1 << p
    return (-1 if sign & 1 else 1), det


def excitation_between(ref: Determinant, det: Determinant) -> FermionExcitation:
    """The unique particle-hole excitation mapping ``ref`` onto ``det``."""
    return FermionExcitation(tuple(_occupied(ref & ~det)), tuple(_occupied(det & ~ref)))


def enumerate_pool(problem: MolecularProblem, max_rank: int | None = None,
                   pool_kind: str = "particle-hole-SD") -> list[FermionExcitation]:
    """Sz-conserving excitation pool in a deterministic order.

    Particle-hole pools are sorted by the integer of the excited determinant;
    ``"particle-hole-SD"`` caps the rank at 2.  The generalized pool holds all
    spin-conserving singles and doubles over disjoint index sets, one operator
    per ``+-kappa`` pair, sorted by ``(rank, holes, particles)``.
    """
    if pool_kind not in POOL_KINDS:
        raise ValueError(f"unknown pool kind {pool_kind!r}; expected one of {POOL_KINDS}")
    if max_rank is None:
        max_rank = 2 if pool_kind != "particle-hole-full" else problem.num_electrons
    if pool_kind != "particle-hole-full":
        max_rank = min(max_rank, 2)
    if max_rank <= 0:
        return []
    n = problem.num_qubits
    if pool_kind == "generalized-SD":
        return _generalized_pool(n, max_rank)

    ref = problem.reference
    occ = _occupied(ref)
    vir = [p for p in range(n) if not ref >> p & 1]
    if max_rank > len(occ):
        raise ValueError(f"max_rank {max_rank} exceeds the number of electrons {len(occ)}")
    pool = []
    for k in range(1, max_rank + 1):
        for holes in itertools.combinations(occ, k):
            nh = sum(p % 2 for p in holes)
            for parts in itertools.combinations(vir, k):
                if sum(p % 2 for p in parts) == nh:
                    pool.append(FermionExcitation(holes, parts))
    pool.sort(key=lambda e: apply_excitation_phase(ref, e)[1])
    return pool


def fragment_local_pool(pool, fragments) -> list[FermionExcitation]:
    """Keep operators whose spin orbitals all belong to one spatial-orbital fragment."""
    frags = [set(f) for f in fragments]
    return [e for e in pool
            if any(all(q // 2 in f for q in e.holes + e.particles) for f in frags)]


def _generalized_pool(n: int, max_rank: int) -> list[FermionExcitation]:
    pool = set()
    for k in range(1, max_rank + 1):
        for ann in itertools.combinations(range(n), k):
            for cre in itertools.combinations([p for p in range(n) if p not in ann], k):
                if sum(p % 2 for p in ann) != sum(p % 2 for p in cre):
                    continue
                pool.add(FermionExcitation(*min((ann, cre), (cre, ann))))
    return sorted(pool, key=lambda e: (e.rank, e.holes, e.particles))


def determinant_space(problem: MolecularProblem) -> list[Determinant]:
    """All determinants with the problem's alpha and beta electron counts, ascending."""
    n = problem.num_spatial
    alphas = [sum(1 << (2 * p) for p in c) for c in itertools.combinations(range(n), problem.num_alpha)]
    betas = [sum(1 << (2 * p + 1) for p in c) for c in itertools.combinations(range(n), problem.num_beta)]
    return sorted(a | b for a in alphas for b in betas)


def determinant_hamiltonian(problem: MolecularProblem, dets: list[Determinant] | None = None):
    """Sparse Hamiltonian in the determinant basis via Slater-Condon rules.

    Independent of the qubit algebra: matrix elements come straight from the
    spin-orbital integrals, with fermionic signs from ladder-operator action.
    Returns ``(matrix, dets)``.
    """
    dets = determinant_space(problem) if dets is None else list(dets)
    index = {d: i for i, d in enumerate(dets)}
    h, v = problem.spin_h, problem.spin_v
    n = problem.num_qubits
    rows, cols, vals = [], [], []
    for col, det in enumerate(dets):
        occ = _occupied(det)
        vir = [p for p in range(n) if not det >> p & 1]
        diag = problem.core_energy + sum(h[i, i] for i in occ)
        diag += 0.5 * sum(v[i, j, i, j] for i in occ for j in occ)
        rows.append(col)
        cols.append(col)
        vals.append(diag)
        for i in occ:
            for a in vir:
                if (a - i) % 2:
                    continue
                new = det ^ (1 << i) ^ (1 << a)
                row = index.get(new)
                if row is None or row <= col:
                    continue
                elem = h[a, i] + sum(v[a, j, i, j] for j in occ)
                if abs(elem) < 1e-14:
                    continue
                sign, _ = apply_excitation_phase(det, FermionExcitation((i,), (a,)))
                rows.append(row)
                cols.append(col)
                vals.append(sign * elem)
        for i, j in itertools.combinations(occ, 2):
            for a, b in itertools.combinations(vir, 2):
                new = det ^ (1 << i) ^ (1 << j) ^ (1 << a) ^ (1 << b)
                row = index.get(new)
                if row is None or row <= col:
                    continue
                elem = v[a, b, i, j]
                if abs(elem) < 1e-14:
                    continue
                sign, _ = apply_excitation_phase(det, FermionExcitation((i, j), (a, b)))
                rows.append(row)
                cols.append(col)
                vals.append(sign * elem)
    dim = len(dets)
    upper = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    diag = scipy.sparse.diags(upper.diagonal())
    return (upper + upper.T - diag).tocsr(), dets


@dataclass
class FciResult:
    energies: np.ndarray
    vectors: np.ndarray
    determinants: list[Determinant] = field(repr=False)

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_vector(self) -> np.ndarray:
        return self.vectors[:, 0]

    def to_qubit_state(self, num_qubits: int, root: int = 0) -> np.ndarray:
        out = np.zeros(1 << num_qubits, dtype=complex)
        out[self.determinants] = self.vectors[:, root]
        return out


def fci_solve(problem: MolecularProblem, roots: int | None = 1, *,
              max_dense_dim: int = 5000, iterative: bool = False) -> FciResult:
    """Exact diagonalization in the Sz-restricted determinant space.

    ``roots=None`` returns the full spectrum (dense mode only).  Dimensions
    above ``max_dense_dim`` need ``iterative=True`` (Lanczos via ARPACK).
    """
    H, dets = determinant_hamiltonian(problem)
    dim = len(dets)
    if dim <= max_dense_dim:
        w, c = scipy.linalg.eigh(H.toarray())
        if roots is not None:
            w, c = w[:roots], c[:, :roots]
    elif not iterative:
        raise ValueError(f"determinant space dimension {dim} exceeds the dense ceiling "
                         f"{max_dense_dim}; enable iterative mode")
    else:
        k = roots or 1
        w, c = scipy.sparse.linalg.eigsh(H, k=k, which="SA", tol=1e-12)
        order = np.argsort(w)
        w, c = w[order], c[:, order]
    for j in range(len(w)):
        res = np.linalg.norm(H @ c[:, j] - w[j] * c[:, j])
        if res > 1e-9:
            raise RuntimeError(f"FCI root {j} residual {res:.2e} above 1e-9")
    return FciResult(np.asarray(w), np.asarray(c), dets)


def reachable_determinants(problem: MolecularProblem) -> list[Determinant]:
    """Determinants connected to the reference through nonzero Hamiltonian couplings."""
    H, dets = determinant_hamiltonian(problem)
    graph = abs(H) > 1e-12
    _, labels = scipy.sparse.csgraph.connected_components(graph, directed=False)
    ref_label = labels[dets.index(problem.reference)]
    return [d for d, lab in zip(dets, labels) if lab == ref_label]


def orbital_fragments(problem: MolecularProblem, tol: float = 1e-10) -> list[list[int]]:
    """Partition spatial orbitals into non-interacting fragments.

    Two orbitals belong to the same fragment when their one-electron or
    exchange-type integrals ``(pq|pq)`` exceed ``tol``.
    """
    n = problem.num_spatial
    exch = np.abs(np.einsum("pqpq->pq", problem.eri))
    adj = (exch > tol) | (np.abs(problem.h) > tol)
    _, labels = scipy.sparse.csgraph.connected_components(
        scipy.sparse.csr_matrix(adj), directed=False)
    groups: dict[int, list[int]] = {}
    for p in range(n):
        groups.setdefault(int(labels[p]), []).append(p)
    return sorted(groups.values())
