"""Command-line driver for PQE, SPQE, VQE and ADAPT-VQE experiments.

Experiments are described by INI-style key-value files (see README).  Every
run writes a trace CSV and a summary JSON with a provenance block; identical
configs and seeds give byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .ansatz import DuccAnsatz, estimate_cnots, ordering_for_fixed_ansatz
from .molecule import (
    MolecularProblem,
    enumerate_pool,
    fci_solve,
    fixture_path,
    fragment_local_pool,
    orbital_fragments,
    read_fcidump,
)
from .pqe import PqeConfig, run_pqe
from .qubit import jordan_wigner_hamiltonian
from .spqe import SpqeConfig, run_spqe
from .vqe import VqeConfig, run_adapt_vqe, run_vqe

METHODS = ("pqe", "vqe", "spqe", "adapt-vqe", "fci")
SCHEMA_VERSION = 1
FCI_DENSE_LIMIT = 5000


class UserError(Exception):
    """Bad configuration or input; exit status 1."""


class NumericalFailure(Exception):
    """A solver did not converge; exit status 2."""


def _write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_config(path: str | Path) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cfg.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UserError(f"cannot read config {path}: {exc}") from None
    if not cfg.has_section("experiment"):
        raise UserError("config needs an [experiment] section")
    return cfg


def _get(cfg, section, key, conv=str, default=None):
    if not cfg.has_option(section, key):
        return default
    raw = cfg.get(section, key).strip()
    if raw.lower() in ("", "none"):
        return None
    try:
        return conv(raw)
    except ValueError:
        raise UserError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _bool(raw: str) -> bool:
    if raw.lower() in ("1", "true", "yes", "on"):
        return True
    if raw.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _list(raw: str | None, conv=str) -> list:
    if not raw:
        return []
    return [conv(x.strip()) for x in raw.replace("\n", ",").split(",") if x.strip()]


def pqe_config(cfg, seed) -> PqeConfig:
    s = "pqe"
    return PqeConfig(
        omega_r=_get(cfg, s, "omega_r", float, 1e-5),
        max_micro=_get(cfg, s, "max_micro", int, 100),
        diis_depth=_get(cfg, s, "diis_depth", int, 8),
        diis_start=_get(cfg, s, "diis_start", int, 2),
        diis_error=_get(cfg, s, "diis_error", str, "update"),
        noise_sigma=_get(cfg, s, "noise_sigma", float, 0.0),
        residual_mode=_get(cfg, s, "residual_mode", str, "projective"),
        rng_seed=seed,
    )


def vqe_config(cfg, seed) -> VqeConfig:
    s = "vqe"
    return VqeConfig(
        omega_g=_get(cfg, s, "omega_g", float, 1e-5),
        adapt_epsilon=_get(cfg, s, "adapt_epsilon", float, 1e-3),
        max_bfgs_iters=_get(cfg, s, "max_bfgs_iters", int, 1000),
        max_params=_get(cfg, s, "max_params", int, None),
        max_macro=_get(cfg, s, "max_macro", int, 200),
        noise_sigma=_get(cfg, s, "noise_sigma", float, 0.0),
        pool_kind=_get(cfg, "ansatz", "pool", str, "particle-hole-SD"),
        rng_seed=seed,
    )


def spqe_config(cfg, seed) -> SpqeConfig:
    s = "spqe"
    return SpqeConfig(
        omega=_get(cfg, s, "omega", float, 1e-1),
        dt=_get(cfg, s, "dt", float, 0.05),
        trotter_steps=_get(cfg, s, "trotter_steps", int, 1),
        mode=_get(cfg, s, "mode", str, "exact"),
        shots=_get(cfg, s, "shots", int, 10**6),
        max_macro=_get(cfg, s, "max_macro", int, 50),
        max_rank=_get(cfg, s, "max_rank", int, None),
        insertion=_get(cfg, s, "insertion", str, "prepend"),
        rng_seed=seed,
        micro=pqe_config(cfg, None if seed is None else seed + 1),
    )


def fci_energy(problem: MolecularProblem, path: Path, cache_dir: Path | None = None) -> float | None:
    """Ground-state FCI energy, cached beside the fixture (or in ``cache_dir``)."""
    digest = _sha256(path)
    candidates = [path.with_name(path.name + ".fci.json")]
    if cache_dir is not None:
        candidates.append(cache_dir / (path.name + ".fci.json"))
    for c in candidates:
        try:
            data = json.loads(c.read_text())
            if data.get("sha256") == digest:
                return float(data["energy"])
        except (OSError, ValueError, KeyError):
            pass
    try:
        energy = fci_solve(problem, max_dense_dim=FCI_DENSE_LIMIT).ground_energy
    except ValueError:
        return None
    text = json.dumps({"sha256": digest, "energy": energy}, indent=1) + "\n"
    for c in candidates:
        try:
            _write_atomic(c, text)
            break
        except OSError:
            continue
    return energy


def fixed_ansatz(problem: MolecularProblem, cfg) -> DuccAnsatz:
    kind = _get(cfg, "ansatz", "pool", str, "particle-hole-SD")
    max_rank = _get(cfg, "ansatz", "max_rank", int, None)
    if kind == "generalized-SD":
        raise UserError("fixed-ansatz runs need a particle-hole pool")
    pool = enumerate_pool(problem, max_rank, kind)
    if _get(cfg, "ansatz", "fragment_local", _bool, False):
        pool = fragment_local_pool(pool, orbital_fragments(problem))
    return DuccAnsatz.for_problem(problem, ordering_for_fixed_ansatz(pool, problem.reference))


def run_point(cfg, fixture: str, seed: int | None, cache_dir: Path | None = None):
    """Execute one experiment; returns ``(summary, trace_csv, converged)``."""
    method = _get(cfg, "experiment", "method", str)
    if method not in METHODS:
        raise UserError(f"method must be one of {METHODS}, got {method!r}")
    try:
        path = fixture_path(fixture)
    except FileNotFoundError as exc:
        raise UserError(str(exc)) from None
    try:
        problem = read_fcidump(path)
    except ValueError as exc:
        raise UserError(f"{path}: {exc}") from None
    e_fci = fci_energy(problem, path, cache_dir)
    summary = {"method": method, "fixture": _fixture_name(path)}
    provenance = {"schema_version": SCHEMA_VERSION, "pqesim_version": __version__,
                  "fixture_sha256": _sha256(path), "seed": seed,
                  "config": {sec: dict(cfg[sec]) for sec in cfg.sections()}}
    if method == "fci":
        summary.update(energy=e_fci, converged=e_fci is not None)
        summary["provenance"] = provenance
        return summary, f"energy\n{e_fci:.12f}\n", e_fci is not None

    h = jordan_wigner_hamiltonian(problem)
    if method == "pqe":
        conf = pqe_config(cfg, seed)
        ansatz = fixed_ansatz(problem, cfg)
        trace = run_pqe(problem, ansatz, conf, h=h)
        counts = {"n_res": trace.n_res, "n_res_elements": trace.n_res * len(ansatz)}
    elif method == "vqe":
        conf = vqe_config(cfg, seed)
        ansatz = fixed_ansatz(problem, cfg)
        trace = run_vqe(problem, ansatz, conf, h=h)
        counts = {"n_grad": trace.n_grad, "n_grad_elements": trace.n_grad_elements}
    elif method == "spqe":
        conf = spqe_config(cfg, seed)
        trace = run_spqe(problem, conf, h=h)
        ansatz = trace.ansatz
        counts = {"n_res_elements": trace.n_res,
                  "n_tplus": sum(1 for e in ansatz.operators if e.rank >= 3)}
    else:
        conf = vqe_config(cfg, seed)
        trace = run_adapt_vqe(problem, conf, h=h)
        ansatz = trace.ansatz
        counts = {"n_grad": trace.rows[-1].n_grad if trace.rows else 0,
                  "n_grad_elements": trace.rows[-1].n_grad_elements if trace.rows else 0}
    energy = float(trace.energy)
    summary.update(
        energy=energy, fci_energy=e_fci,
        delta_e=None if e_fci is None else energy - e_fci,
        n_par=len(ansatz), n_cnot=estimate_cnots(ansatz), converged=bool(trace.converged),
        **counts)
    provenance["thresholds"] = _plain(asdict(conf))
    summary["provenance"] = provenance
    return summary, trace.to_csv(), bool(trace.converged)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _dump(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _seed(cfg, override):
    return override if override is not None else _get(cfg, "experiment", "seed", int, 0)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    fixture = _get(cfg, "experiment", "fixture", str)
    if not fixture:
        raise UserError("[experiment] fixture is required")
    summary, trace_csv, ok = run_point(cfg, fixture, _seed(cfg, args.seed), out)
    _write_atomic(out / "trace.csv", trace_csv)
    _write_atomic(out / "summary.json", _dump(summary))
    if summary["method"] == "fci":
        print(f"{summary['energy']:.12f}")
    else:
        print(f"E = {summary['energy']:.10f}  N_par = {summary['n_par']}  converged = {ok}")
    if not ok:
        raise NumericalFailure(f"{summary['method']} did not converge")
    return 0


def cmd_fci(args) -> int:
    if args.fixture:
        cfg = configparser.ConfigParser()
        cfg.read_dict({"experiment": {"fixture": args.fixture, "method": "fci"}})
    else:
        if not args.config:
            raise UserError("fci needs --config or --fixture")
        cfg = load_config(args.config)
        cfg.set("experiment", "method", "fci")
    fixture = _get(cfg, "experiment", "fixture", str)
    if not fixture:
        raise UserError("[experiment] fixture is required")
    out = Path(args.out) if args.out else None
    summary, trace_csv, ok = run_point(cfg, fixture, None, out)
    if not ok:
        raise NumericalFailure("FCI space exceeds the dense ceiling")
    if out is not None:
        _write_atomic(out / "summary.json", _dump(summary))
    print(f"{summary['energy']:.12f}")
    return 0


def cmd_scan(args) -> int:
    """Run one experiment per fixture and/or per threshold value."""
    cfg = load_config(args.config)
    out = Path(args.out)
    fixtures = _list(_get(cfg, "scan", "fixtures", str)) or [_get(cfg, "experiment", "fixture", str)]
    values = _list(_get(cfg, "scan", "values", str))
    key = _get(cfg, "scan", "parameter", str)
    if values and (not key or "." not in key):
        raise UserError("[scan] parameter must name section.key, e.g. spqe.omega")
    points = [(f, v) for f in fixtures for v in (values or [None])]
    seed = _seed(cfg, args.seed)

    def one(point):
        fixture, value = point
        local = configparser.ConfigParser()
        local.read_dict(cfg)
        if value is not None:
            sec, opt = key.split(".", 1)
            if not local.has_section(sec):
                local.add_section(sec)
            local.set(sec, opt, value)
        try:
            summary, trace_csv, ok = run_point(local, fixture, seed, out)
            return fixture, value, summary, trace_csv, ok, ""
        except (UserError, ValueError) as exc:
            return fixture, value, None, "", False, f"user: {exc}"
        except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
            return fixture, value, None, "", False, f"numerical: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(one, points))
    header = ["fixture", "value", "energy", "delta_e", "n_par", "n_cnot", "n_evals", "converged",
              "error"]
    lines = [",".join(header)]
    failed = user_errors = 0
    for fixture, value, summary, trace_csv, ok, err in results:
        name = _fixture_name(fixture)
        tag = name + ("" if value is None else f"_{value}")
        if summary is None:
            failed += 1
            user_errors += err.startswith("user")
            lines.append(f"{name},{value or ''},,,,,,False,\"{err}\"")
            continue
        failed += not ok
        _write_atomic(out / tag / "trace.csv", trace_csv)
        _write_atomic(out / tag / "summary.json", _dump(summary))
        n_evals = summary.get("n_res_elements", summary.get("n_grad_elements", ""))
        de = summary.get("delta_e")
        lines.append(",".join(str(x) for x in [
            name, value or "", f"{summary['energy']:.12f}",
            "" if de is None else f"{de:.12e}", summary["n_par"], summary["n_cnot"], n_evals,
            ok, ""]))
    _write_atomic(out / "scan.csv", "\n".join(lines) + "\n")
    print(f"{len(points)} points, {failed} failed")
    if user_errors:
        return 1
    return 2 if failed else 0


def _fixture_name(fixture: str) -> str:
    return Path(fixture).name.removesuffix(".fcidump")


def cmd_noise_study(args) -> int:
    """Ensemble statistics of noisy PQE or VQE runs over seeds."""
    cfg = load_config(args.config)
    out = Path(args.out)
    fixture = _get(cfg, "experiment", "fixture", str)
    method = _get(cfg, "experiment", "method", str, "pqe")
    if method not in ("pqe", "vqe"):
        raise UserError("noise-study supports method = pqe or vqe")
    sigmas = _list(_get(cfg, "noise", "sigmas", str), float)
    size = _get(cfg, "noise", "ensemble", int, 50)
    iters = _get(cfg, "noise", "iterations", int, 30)
    if not sigmas:
        raise UserError("[noise] sigmas is required")
    if size < 2:
        raise UserError("[noise] ensemble must be at least 2")
    try:
        path = fixture_path(fixture)
    except (FileNotFoundError, TypeError) as exc:
        raise UserError(str(exc)) from None
    problem = read_fcidump(path)
    e_fci = fci_energy(problem, path, out)
    if e_fci is None:
        raise UserError("noise studies need an FCI reference")
    h = jordan_wigner_hamiltonian(problem)
    base_seed = _seed(cfg, args.seed)
    template = fixed_ansatz(problem, cfg)

    def member(job):
        sigma, k = job
        ansatz = template.copy()
        if method == "pqe":
            conf = pqe_config(cfg, base_seed + k)
            conf.noise_sigma, conf.max_micro, conf.omega_r = sigma, iters, 1e-300
            trace = run_pqe(problem, ansatz, conf, h=h)
            rows = [(r.energy - e_fci, r.residual_norm) for r in trace.rows]
        else:
            conf = vqe_config(cfg, base_seed + k)
            conf.noise_sigma, conf.max_bfgs_iters = sigma, iters
            trace = run_vqe(problem, ansatz, conf, h=h)
            rows = [(r.energy - e_fci, r.grad_norm) for r in trace.rows]
        rows = rows or [(trace.energy - e_fci, float("nan"))]
        rows += [rows[-1]] * (iters - len(rows))
        return rows[:iters]

    jobs = [(s, k) for s in sigmas for k in range(size)]
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        runs = list(pool.map(member, jobs))
    lines = ["sigma,iteration,mean_error,std_error,mean_norm,std_norm"]
    for i, sigma in enumerate(sigmas):
        block = np.array(runs[i * size:(i + 1) * size])  # (size, iters, 2)
        for it in range(iters):
            err, nrm = block[:, it, 0], block[:, it, 1]
            lines.append(f"{sigma:.3e},{it + 1},{err.mean():.12e},{err.std(ddof=1):.12e},"
                         f"{nrm.mean():.12e},{nrm.std(ddof=1):.12e}")
    _write_atomic(out / "noise.csv", "\n".join(lines) + "\n")
    summary = {"method": method, "fixture": _fixture_name(path), "fci_energy": e_fci,
               "sigmas": sigmas, "ensemble": size, "iterations": iters,
               "provenance": {"schema_version": SCHEMA_VERSION, "pqesim_version": __version__,
                              "fixture_sha256": _sha256(path), "seed": base_seed}}
    _write_atomic(out / "summary.json", _dump(summary))
    print(f"{len(jobs)} runs written to {out / 'noise.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqesim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (("run", cmd_run), ("scan", cmd_scan), ("noise-study", cmd_noise_study),
                       ("fci", cmd_fci)):
        p = sub.add_parser(name, help=(func.__doc__ or "").strip().splitlines()[0] if func.__doc__ else None)
        p.add_argument("--config", required=name != "fci", help="experiment config file")
        p.add_argument("--out", default=None if name == "fci" else "results",
                       help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for ensembles/scans")
        if name == "fci":
            p.add_argument("--fixture", help="fixture name or FCIDUMP path")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
