"""Regenerate the FCIDUMP fixtures shipped in ``src/pqesim/data``.

Requires pyscf, which is a development-only tool and not a runtime
dependency of the package.  All fixtures are RHF/STO-6G with canonical
orbitals sorted by energy.

    python tools/make_fixtures.py
"""

from __future__ import annotations

import pathlib

import numpy as np
from pyscf import gto, scf
from pyscf.tools import fcidump

DATA = pathlib.Path(__file__).resolve().parents[1] / "src" / "pqesim" / "data"


def chain(n, r, offset=0.0):
    return [("H", (0.0, 0.0, offset + i * r)) for i in range(n)]


def beh2(r):
    return [("Be", (0.0, 0.0, 0.0)), ("H", (0.0, 0.0, r)), ("H", (0.0, 0.0, -r))]


GEOMETRIES = {
    "h2_0.75": chain(2, 0.75),
    "h4_0.75": chain(4, 0.75),
    "h4_1.00": chain(4, 1.00),
    "h4_1.50": chain(4, 1.50),
    "h6_0.50": chain(6, 0.50),
    "h6_1.00": chain(6, 1.00),
    "h6_1.50": chain(6, 1.50),
    "h6_2.00": chain(6, 2.00),
    "beh2_1.00": beh2(1.0),
    "beh2_2.00": beh2(2.0),
    # H4 (r = 1.0) and H2 (r = 0.75) separated by 1000 angstrom
    "h4h2_1000": chain(4, 1.00) + chain(2, 0.75, offset=1003.0),
}


def write(name, atoms):
    mol = gto.M(atom=atoms, basis="sto-6g", unit="angstrom", symmetry=True, verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.conv_tol_grad = 1e-10
    mf.max_cycle = 500
    mf.kernel()
    assert mf.converged, name
    order = np.argsort(mf.mo_energy, kind="stable")
    mf.mo_energy = mf.mo_energy[order]
    mf.mo_coeff = mf.mo_coeff[:, order]
    mf.mo_occ = mf.mo_occ[order]
    nocc = mol.nelectron // 2
    assert mf.mo_energy[nocc - 1] < mf.mo_energy[nocc] - 1e-6, name
    path = DATA / f"{name}.fcidump"
    fcidump.from_scf(mf, str(path), tol=1e-15)
    print(f"{name:12s} E_RHF = {mf.e_tot:.12f}  -> {path.name}")


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    for name, atoms in GEOMETRIES.items():
        write(name, atoms)
