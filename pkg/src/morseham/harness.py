"""
Experiment orchestration: JSON configs in, report.json and CSV tables out.

A run executes the requested tasks in the fixed order
solve → profile → spectrum → morse → oracle → verify, adding prerequisites
automatically.  Every number written to report.json is deterministic for a
given config; wall-clock times live in the separate "timings" block.
"""

from __future__ import annotations

import copy
import csv
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .errors import AmbiguityError, ConfigError, MorsehamError, SolverError
from .geometry import DomainSpec
from .hamiltonian import (check_convexity, check_strong_coupling, model_from_dict, potential_function,
                          potentials_along_solution, value_box)
from .morse import build_report, radial_morse_index
from .nodal import extract_nodal_data, interlacing_holds, interlacing_margin, verify_profile
from .oracle import (decoupling_check, default_grid, derivative_pair_residual, quad_form_action, quad_form_lin,
                     random_test_functions, test_function_estimates, coupled_spectrum)
from .shooting import find_solution, write_solution_csv
from .spectra import regular_radial_eigenvalues, singular_radial_eigenvalues

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
TASK_ORDER = ("solve", "profile", "spectrum", "morse", "oracle", "verify")
PREREQUISITES = {
    "solve": (),
    "profile": ("solve",),
    "spectrum": ("solve",),
    "morse": ("solve", "spectrum"),
    "oracle": ("solve", "profile"),
    "verify": ("solve", "profile", "spectrum", "morse"),
}

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

_TERMS = {"type": "array", "minItems": 1,
          "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["model", "domain"],
    "properties": {
        "model": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["lane_emden", "separable_powers"]}},
            "allOf": [
                {"if": {"properties": {"kind": {"const": "lane_emden"}}},
                 "then": {"required": ["p", "q"],
                          "properties": {"p": {"type": "number", "exclusiveMinimum": 1},
                                         "q": {"type": "number", "exclusiveMinimum": 1}}}},
                {"if": {"properties": {"kind": {"const": "separable_powers"}}},
                 "then": {"required": ["F", "G"], "properties": {"F": _TERMS, "G": _TERMS}}},
            ],
        },
        "domain": {
            "type": "object",
            "required": ["N"],
            "properties": {
                "shape": {"enum": ["ball", "annulus"]},
                "N": {"type": "integer", "minimum": 2},
                "R": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0},
            },
            "if": {"properties": {"shape": {"const": "annulus"}}, "required": ["shape"]},
            "then": {"required": ["delta"]},
        },
        "m": {"type": "integer", "minimum": 1, "maximum": 6},
        "first_sign": {"enum": ["+", "-"]},
        "tolerances": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                           for k in ("tol_ode", "tol_bc", "tol_residual", "tie_tol", "tol_threshold")},
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {"solution_nodes": {"type": "integer", "minimum": 16},
                           "spectral_nodes": {"type": "integer", "minimum": 16},
                           "epsilon": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "k_max": {"type": "integer", "minimum": 1},
        "tasks": {"type": "array", "minItems": 1, "items": {"enum": list(TASK_ORDER)}},
        "output_dir": {"type": "string"},
        "sweep": {
            "type": "object",
            "properties": {k: {"type": "array"} for k in ("p", "q", "N", "m")},
            "additionalProperties": False,
        },
    },
}

DEFAULT_TOLERANCES = {"tol_ode": 1e-10, "tol_bc": 1e-8, "tol_residual": 1e-6, "tie_tol": 1e-9,
                      "tol_threshold": 1e-8}


def _describe(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "config"
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else err.message
        return f"{where}: missing field {missing!r}"
    return f"{where}: {err.message}"


def validate_config(raw: dict) -> None:
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        raise ConfigError("; ".join(_describe(e) for e in errors))


@dataclass
class ExperimentConfig:
    model: dict
    domain: dict
    m: int = 1
    first_sign: str = "+"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    solution_nodes: int = 2048
    spectral_nodes: int = 2048
    epsilon: Optional[float] = None
    k_max: Optional[int] = None
    tasks: tuple = TASK_ORDER
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        validate_config(raw)
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(raw.get("tolerances", {}))
        grid = raw.get("grid", {})
        cfg = cls(model=dict(raw["model"]), domain=dict(raw["domain"]), m=int(raw.get("m", 1)),
                  first_sign=raw.get("first_sign", "+"), tolerances=tol,
                  solution_nodes=int(grid.get("solution_nodes", 2048)),
                  spectral_nodes=int(grid.get("spectral_nodes", 2048)),
                  epsilon=grid.get("epsilon"), k_max=raw.get("k_max"),
                  tasks=tuple(raw.get("tasks", TASK_ORDER)), output_dir=raw.get("output_dir"))
        cfg.build_model()
        cfg.build_domain()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def build_model(self):
        try:
            return model_from_dict(self.model)
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc

    def build_domain(self):
        try:
            return DomainSpec.from_dict(self.domain)
        except ValueError as exc:
            raise ConfigError(f"domain: {exc}") from exc

    def resolved_tasks(self):
        want = set()
        for t in self.tasks:
            want.add(t)
            want.update(PREREQUISITES[t])
        return [t for t in TASK_ORDER if t in want]

    def to_dict(self):
        d = {"model": self.model, "domain": self.domain, "m": self.m, "first_sign": self.first_sign,
             "tolerances": self.tolerances,
             "grid": {"solution_nodes": self.solution_nodes, "spectral_nodes": self.spectral_nodes},
             "tasks": list(self.tasks)}
        if self.epsilon is not None:
            d["grid"]["epsilon"] = self.epsilon
        if self.k_max is not None:
            d["k_max"] = self.k_max
        return d


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if hasattr(x, "to_dict"):
        return _jsonable(x.to_dict())
    return x


def write_spectrum_csv(spec, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "eigenvalue", "error_estimate", "flag"])
        for k, lam, err, flag in spec.rows():
            w.writerow([k, f"{lam:.17g}", f"{err:.17g}", flag])


@dataclass
class RunReport:
    data: dict
    exit_code: int
    out_dir: Optional[Path] = None

    @property
    def verdict(self):
        return self.data.get("verification", {}).get("verdict")


class _Run:
    """State shared between the tasks of one run."""

    def __init__(self, cfg: ExperimentConfig, out: Optional[Path]):
        self.cfg = cfg
        self.out = out
        self.model = cfg.build_model()
        self.domain = cfg.build_domain()
        self.sol = None
        self.nodal = None
        self.spectra = {}
        self.report = {"schema_version": SCHEMA_VERSION, "config": cfg.to_dict(), "artifacts": {}}
        self.ambiguous = False

    def artifact(self, key, name):
        if self.out is None:
            return None
        self.report["artifacts"][key] = name
        return self.out / name

    # -- tasks ---------------------------------------------------------------

    def solve(self):
        cfg, tol = self.cfg, self.cfg.tolerances
        sol = find_solution(self.model, self.domain, cfg.m, cfg.first_sign, tol_ode=tol["tol_ode"],
                            tol_bc=tol["tol_bc"], tol_residual=tol["tol_residual"], n_nodes=cfg.solution_nodes)
        self.sol = sol
        box = value_box(sol)
        conv = check_convexity(self.model, box)
        coup = check_strong_coupling(self.model, box)
        nu, nv = sol.interior_zero_counts()
        self.report["solution"] = {
            "alpha": sol.alpha, "beta": sol.beta, "method": sol.method, "residual_norm": sol.residual_norm,
            "boundary_defect": sol.boundary_defect(), "candidates": sol.candidates,
            "nodes": int(sol.r.size), "sup_u": float(np.max(np.abs(sol.u))), "sup_v": float(np.max(np.abs(sol.v))),
            "interior_zeros": {"u": nu, "v": nv}, "convexity": conv.to_dict(), "coupling": coup.to_dict()}
        path = self.artifact("solution", "solution.csv")
        if path is not None:
            write_solution_csv(sol, path)

    def profile(self):
        self.nodal = extract_nodal_data(self.sol)
        rep = verify_profile(self.nodal)
        d = rep.to_dict()
        d["nodal_data"] = self.nodal.to_dict()
        d["interlacing"] = interlacing_holds(self.nodal)
        d["interlacing_margin"] = interlacing_margin(self.nodal)
        self.report["profile"] = d

    def spectrum(self):
        cfg = self.cfg
        M = cfg.spectral_nodes
        k = cfg.k_max or max(cfg.m + 2, 4)
        out = {}
        for which in ("a", "b"):
            c = potential_function(self.model, self.sol, which)
            reg = regular_radial_eigenvalues(c, self.domain, k, M)
            sing = singular_radial_eigenvalues(c, self.domain, M, cfg.epsilon, cfg.tolerances["tol_threshold"])
            self.spectra[which] = (reg, sing)
            out[f"regular_{which}"] = reg.to_dict()
            out[f"singular_{which}"] = sing.to_dict()
            for kind, spec in (("regular", reg), ("singular", sing)):
                path = self.artifact(f"spectrum_{kind}_{which}", f"spectrum_{kind}_{which}.csv")
                if path is not None:
                    write_spectrum_csv(spec, path)
            if sing.meta.get("ambiguous"):
                self.ambiguous = True
        pot = potentials_along_solution(self.model, self.sol)
        out["b_min"] = float(np.min(pot.b))
        out["a_min"] = float(np.min(pot.a))
        self.report["spectra"] = out
        self._plot_data(pot)

    def _plot_data(self, pot):
        path = self.artifact("plot_data", "plot_data.csv")
        if path is None:
            return
        reg_a = self.spectra["a"][0]
        sol = self.sol
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "u", "v", "a", "b"])
            for row in zip(sol.r, sol.u, sol.v, pot.a, pot.b):
                w.writerow([f"{x:.17g}" for x in row])
        # eigenfunctions of the regular a-problem on their own grid
        from .spectra import SpectralProblem, eigen_solve

        c = potential_function(self.model, sol, "a")
        spec = eigen_solve(SpectralProblem.regular(self.domain, c, self.cfg.spectral_nodes),
                           min(reg_a.eigenvalues.size, 4), vectors=True)
        path = self.artifact("eigenfunctions", "plot_eigenfunctions_a.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r"] + [f"xi_{j + 1}" for j in range(spec.eigenvectors.shape[1])])
            for i in range(0, spec.grid.size, 2):
                w.writerow([f"{spec.grid[i]:.17g}"] + [f"{x:.17g}" for x in spec.eigenvectors[i]])

    def morse(self):
        reg_a, sing_a = self.spectra["a"]
        reg_b, sing_b = self.spectra["b"]
        c = potential_function(self.model, self.sol, "a")
        m_rad = radial_morse_index(c, self.domain, self.cfg.spectral_nodes)
        conv = self.report["solution"]["convexity"]
        checks = {"convex": conv["holds"],
                  "singular_regular_count_agree": int(np.count_nonzero(sing_a.eigenvalues < -1e-10)) == m_rad,
                  "regular_listed_count_agree": reg_a.negative_count == m_rad or reg_a.eigenvalues.size <= m_rad}
        try:
            rep = build_report(self.cfg.m, self.domain.N, m_rad, list(sing_a.eigenvalues), list(sing_b.eigenvalues),
                               checks, self.cfg.tolerances["tie_tol"])
        except AmbiguityError as exc:
            self.ambiguous = True
            self.report["morse"] = {"m_lin_rad": m_rad, "refused": str(exc), "checks": checks}
            return
        self.report["morse"] = rep.to_dict()

    def oracle(self):
        sol = self.sol
        M = self.cfg.spectral_nodes
        k = max(6, 2 * self.cfg.m + 2)
        out = {"decoupling_regular": decoupling_check(sol, "regular", k, M),
               "decoupling_singular": decoupling_check(sol, "singular", k, M, self.cfg.epsilon)}
        g = default_grid(sol, M)
        fs = random_test_functions(g, 20, inner_zero=not self.domain.is_ball)
        dev_plus = dev_minus = 0.0
        for f in fs:
            ql, qi = quad_form_lin(sol, f, f, g), quad_form_action(sol, f, f, g)
            dev_plus = max(dev_plus, abs(ql - qi) / max(abs(ql), abs(qi), 1e-300))
            ql, qi = quad_form_lin(sol, f, -f, g), quad_form_action(sol, f, -f, g)
            dev_minus = max(dev_minus, abs(ql + qi) / max(abs(ql), abs(qi), 1e-300))
        cs = coupled_spectrum(sol, "regular", 1, M, vectors=True)
        phi, psi = cs.phi[:, 0], cs.psi[:, 0]
        q = quad_form_lin(sol, phi, psi, g)
        rayleigh = abs(q - cs.eigenvalues[0] * cs.pencil.mass(phi[cs.nodes], psi[cs.nodes])) / max(abs(q), 1.0)
        out["quadratic_identities"] = {"plus_max_rel_dev": dev_plus, "minus_max_rel_dev": dev_minus,
                                       "rayleigh_rel_dev": rayleigh, "n_functions": len(fs)}
        r0, r1 = derivative_pair_residual(sol, levels=0), derivative_pair_residual(sol, levels=1)
        out["derivative_identity"] = {"residual": r1, "residual_coarse": r0,
                                      "ratio": r0 / r1 if r1 > 0 else None,
                                      "annulus": not self.domain.is_ball}
        out["estimates"] = test_function_estimates(sol, self.nodal).to_dict()
        self.report["oracle"] = out

    def verify(self):
        self.report["verification"] = evaluate_flags(self.report)


def evaluate_flags(report: dict) -> dict:
    """Pass/fail table recomputed from the stored numbers of a report."""
    rows = []

    def row(name, holds, margin=None):
        rows.append({"check": name, "holds": holds, "margin": margin})

    cfg = report.get("config", {})
    m = cfg.get("m", 1)
    N = cfg.get("domain", {}).get("N")
    inconclusive = False
    morse = report.get("morse")
    if morse is not None:
        if "refused" in morse:
            inconclusive = True
            row("morse_index", None)
        else:
            mr, ml = morse["m_lin_rad"], morse["m_lin"]
            row("uno", mr >= m, mr - m)
            d = min(ml - mr - (m - 1) * N, ml - m - (m - 1) * N)
            row("due", d >= 0, d)
            if m >= 2:
                lams = sorted(morse["singular_a"])[: m - 1]
                if len(lams) == m - 1:
                    margin = -(N - 1) - lams[-1]
                    row("tre", all(x < y for x, y in zip(lams, lams[1:])) and margin > 0, margin)
                else:
                    row("tre", False, None)
            row("j0_equals_radial_index", morse["checks"].get("j0_equals_radial_index"))
        row("singular_regular_count_agree", morse["checks"].get("singular_regular_count_agree"))
    prof = report.get("profile")
    if prof is not None:
        for c in prof["checks"]:
            row(f"profile_{c['name']}", c["pass"], c["margin"])
        row("interlacing", prof.get("interlacing"))
    spectra = report.get("spectra")
    if spectra is not None:
        for key in ("singular_a", "singular_b"):
            if spectra[key]["meta"].get("ambiguous"):
                inconclusive = True
        conv = report.get("solution", {}).get("convexity", {}).get("holds")
        if conv:
            row("b_nonnegative", spectra["b_min"] >= -1e-12, spectra["b_min"])
            row("b_no_negative_eigenvalues", spectra["regular_b"]["negative_count"] == 0,
                -spectra["regular_b"]["negative_count"])
    oracle = report.get("oracle")
    if oracle is not None:
        dr = oracle["decoupling_regular"]
        row("decoupling_union", dr["union_max_deviation"] <= 1e-8, 1e-8 - dr["union_max_deviation"])
        row("negative_eigenvectors_diagonal", dr["max_antisymmetric_part"] <= 1e-6,
            1e-6 - dr["max_antisymmetric_part"])
        qi = oracle["quadratic_identities"]
        worst = max(qi["plus_max_rel_dev"], qi["minus_max_rel_dev"])
        row("quadratic_identities", worst <= 1e-10, 1e-10 - worst)
        est = oracle["estimates"]
        row("nodal_truncations_negative", est["nodal_holds"],
            -max(e["Q_lin"] for e in est["nodal"]) if est["nodal"] else None)
        if est["derivative"]:
            row("derivative_truncations_bound", est["derivative_holds"],
                -max(e["margin"] for e in est["derivative"]))
    failed = [r["check"] for r in rows if r["holds"] is False]
    if failed:
        verdict = "fail"
    elif inconclusive or any(r["holds"] is None for r in rows):
        verdict = "inconclusive"
    else:
        verdict = "pass"
    return {"verdict": verdict, "rows": rows, "failed": failed}


def _exit_for(verdict):
    return {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}.get(verdict, EXIT_OK)


def run_config(config, out_dir=None) -> RunReport:
    """Execute a config (dict, path or ExperimentConfig) and persist its artifacts."""
    if isinstance(config, ExperimentConfig):
        cfg = config
    elif isinstance(config, dict):
        cfg = ExperimentConfig.from_dict(config)
    else:
        cfg = ExperimentConfig.load(config)
    out = out_dir if out_dir is not None else cfg.output_dir
    out = Path(out) if out is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    run = _Run(cfg, out)
    timings = {}
    exit_code = EXIT_OK
    for task in cfg.resolved_tasks():
        t0 = time.perf_counter()
        try:
            getattr(run, task)()
        except MorsehamError as exc:
            log.error("task %s failed: %s", task, exc)
            run.report["failed_at"] = task
            run.report["error"] = {"type": type(exc).__name__, "message": str(exc)}
            exit_code = EXIT_CONFIG if isinstance(exc, ConfigError) else EXIT_SOLVER
            break
        finally:
            timings[task] = time.perf_counter() - t0
    if exit_code == EXIT_OK and "verification" in run.report:
        exit_code = _exit_for(run.report["verification"]["verdict"])
    run.report["status"] = "failed" if "failed_at" in run.report else "completed"
    run.report["timings"] = timings
    data = _jsonable(run.report)
    if out is not None:
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump(data, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return RunReport(data, exit_code, out)


# ----------------------------------------------------------------------------
# Sweeps


def _sweep_cell(args):
    base, values, out = args
    cfg = copy.deepcopy(base)
    cfg.pop("sweep", None)
    cfg.pop("output_dir", None)
    p, q, N, m = values
    if cfg["model"].get("kind", "lane_emden") == "lane_emden":
        cfg["model"] = {"kind": "lane_emden", "p": p, "q": q}
    cfg["domain"] = dict(cfg.get("domain", {}), N=N)
    cfg["m"] = m
    try:
        rep = run_config(cfg, out)
        return rep.data, rep.exit_code
    except ConfigError as exc:
        return {"status": "failed", "error": {"type": "ConfigError", "message": str(exc)}}, EXIT_CONFIG


SUMMARY_FIXED = ["p", "q", "N", "m", "status", "exit_code", "m_lin_rad", "m_lin"]
SUMMARY_TAIL = ["uno", "due", "tre", "uno_margin", "due_margin", "tre_margin"]


def _summary_row(values, data, code):
    p, q, N, m = values
    row = {"p": p, "q": q, "N": N, "m": m, "status": data.get("status", "failed"), "exit_code": code}
    morse = data.get("morse") or {}
    row["m_lin_rad"] = morse.get("m_lin_rad", "")
    row["m_lin"] = morse.get("m_lin", "")
    lams = sorted(morse.get("singular_a", []) or [])
    flags = morse.get("flags", {})
    for name in ("uno", "due", "tre"):
        f = flags.get(name, {})
        row[name] = "" if f.get("holds") is None else bool(f["holds"])
        row[f"{name}_margin"] = "" if f.get("margin") is None else f["margin"]
    return row, lams


def sweep(base: dict, grid: Optional[dict] = None, out_dir=None, jobs: int = 1):
    """Run the cross product of p, q, N, m; q defaults to p (the diagonal p = q).

    Returns (rows, summary_path).  Failed cells are recorded, never fatal;
    rows keep the input order whatever the number of workers.
    """
    base = dict(base)
    base.setdefault("model", {"kind": "lane_emden", "p": 2, "q": 2})
    base.setdefault("domain", {"shape": "ball", "N": 2})
    validate_config(base)
    grid = grid if grid is not None else base.get("sweep", {})
    ps, Ns, ms = list(grid.get("p", [])), list(grid.get("N", [])), list(grid.get("m", []))
    qs = grid.get("q")
    cells = []
    for p in ps:
        for q in (qs if qs is not None else [p]):
            for N in Ns:
                for m in ms:
                    cells.append((p, q, N, m))
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    args = [(base, c, (out / f"run_{i:03d}_p{c[0]}_q{c[1]}_N{c[2]}_m{c[3]}") if out is not None else None)
            for i, c in enumerate(cells)]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_cell, args))
    else:
        results = [_sweep_cell(a) for a in args]
    rows, all_lams = [], []
    for c, (data, code) in zip(cells, results):
        r, lams = _summary_row(c, data, code)
        rows.append(r)
        all_lams.append(lams)
    width = max((len(l) for l in all_lams), default=0)
    header = SUMMARY_FIXED + [f"lambda_hat_{k + 1}" for k in range(width)] + SUMMARY_TAIL
    for r, lams in zip(rows, all_lams):
        for k in range(width):
            r[f"lambda_hat_{k + 1}"] = f"{lams[k]:.17g}" if k < len(lams) else ""
    summary = None
    if out is not None:
        summary = out / "summary.csv"
        with open(summary, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow(r)
    for r, (data, code) in zip(rows, results):
        r["report"] = data
    return rows, summary


# ----------------------------------------------------------------------------
# Stored-report verification


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    version = str(data.get("schema_version", ""))
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise ConfigError(f"{path}: schema_version {version!r} incompatible with {SCHEMA_VERSION}")
    return data


def verify_theorems(paths) -> tuple:
    """Re-evaluate every flag of stored reports; returns (text table, machine dict, exit code)."""
    results = []
    lines = [f"{'report':<40} {'check':<40} {'result':<8} margin"]
    worst = EXIT_OK
    for p in paths:
        data = load_report(p)
        if data.get("status") == "failed":
            res = {"verdict": "fail", "rows": [], "failed": [f"failed_at:{data.get('failed_at')}"]}
        else:
            res = evaluate_flags(data)
        results.append({"report": str(p), **res})
        for r in res["rows"]:
            mark = {True: "pass", False: "FAIL", None: "n/a"}[r["holds"]]
            margin = "" if r["margin"] is None else f"{r['margin']:.6g}"
            lines.append(f"{str(p)[-40:]:<40} {r['check']:<40} {mark:<8} {margin}")
        lines.append(f"{str(p)[-40:]:<40} {'verdict':<40} {res['verdict']}")
        code = _exit_for(res["verdict"])
        if code == EXIT_FAIL or (code == EXIT_INCONCLUSIVE and worst == EXIT_OK):
            worst = code
    return "\n".join(lines), {"schema_version": SCHEMA_VERSION, "results": results}, worst
