"""Job handlers: argument marshalling between a config job and one module operation."""

from __future__ import annotations

import contextvars
import dataclasses
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from qlan import tolerances
from qlan.classical import canonical_measure, deficiency_lp
from qlan.config import JobSpec, RunConfig, build_experiment, build_family
from qlan.io import matrices_to_rows, pairs_to_matrix, write_csv, write_json
from qlan.hermlin import dagger

__all__ = ["JobResult", "JobFailure", "HANDLERS", "run_job", "run_config", "format_complex"]


@dataclass
class JobResult:
    name: str
    command: str
    passed: bool
    header: list
    rows: list
    payload: dict
    summary: list[str] = field(default_factory=list)


@dataclass
class JobFailure:
    name: str
    command: str
    error: str
    passed: bool = False


def format_complex(z: complex, digits: int = 6) -> str:
    re = 0.0 if abs(z.real) < 10 ** -(digits + 6) else z.real
    im = 0.0 if abs(z.imag) < 10 ** -(digits + 6) else z.imag
    return f"{re:.{digits}g}{im:+.{digits}g}i"


class Registry:
    """Lazily built families and experiments, shared between jobs."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._cache: dict = {}
        self._lock = threading.Lock()

    def _get(self, key, build):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = build()
            return self._cache[key]

    def experiment(self, name: str):
        return self._get(("e", name), lambda: build_experiment(self.cfg.experiments[name]))

    def family(self, name: str):
        return self._get(("f", name), lambda: build_family(self.cfg.families[name]))


def _expectation(p: dict, value: float) -> bool:
    """Pass flag for jobs with an optional numeric ``expect``."""
    if p["expect"] is None or isinstance(p["expect"], bool):
        return True
    return abs(value - p["expect"]) <= p["tolerance"]


def _hellinger(job: JobSpec, reg: Registry, seed: int) -> JobResult:
    from qlan.quantum import quantum_hellinger

    p = job.params
    E = reg.experiment(p["experiment"])
    if reg.cfg.experiments[p["experiment"]].kind == "classical":
        values = [E.hellinger(z) for z in p["z"]]
        header = [f"z{k}" for k in range(E.n_params)] + ["hellinger"]
        rows = [[*z, v] for z, v in zip(p["z"], values)]
        payload = {"points": p["z"], "values": values}
    else:
        values = [quantum_hellinger(E[p["theta"]], E.rho, x) for x in p["p"]]
        header = ["p", "hellinger"]
        rows = [[x, v] for x, v in zip(p["p"], values)]
        payload = {"theta": p["theta"], "p": p["p"], "values": values}
    ok = all(-1e-12 <= v <= 1 + 1e-12 for v in values)
    if p["expect"] is not None:
        ok = ok and all(_expectation(p, v) for v in values)
    payload["passed"] = ok
    return JobResult(job.name, job.command, ok, header, rows, payload, [f"{v:.6f}" for v in values])


def _canonical_measure(job, reg, seed):
    E = reg.experiment(job.params["experiment"])
    mu = canonical_measure(E)
    ok = abs(mu.total_mass - E.n_params) <= 1e-9
    header = [f"v{k}" for k in range(E.n_params)] + ["mass"]
    rows = [[*v, m] for v, m in zip(mu.points.tolist(), mu.masses.tolist())]
    payload = {"points": mu.points, "masses": mu.masses, "total_mass": mu.total_mass, "passed": ok}
    return JobResult(job.name, job.command, ok, header, rows, payload,
                     [f"{len(rows)} atoms, total mass {mu.total_mass:.6f}"])


def _deficiency(job, reg, seed):
    p = job.params
    E1, E2 = reg.experiment(p["experiment"]), reg.experiment(p["other"])
    d12, K12 = deficiency_lp(E1, E2)
    d21, K21 = deficiency_lp(E2, E1)
    dist = max(d12, d21)
    ok = _expectation(p, d12)
    rows = [["forward", d12], ["backward", d21], ["distance", dist]]
    payload = {"delta": d12, "delta_reverse": d21, "distance": dist, "kernel": K12, "kernel_reverse": K21, "passed": ok}
    return JobResult(job.name, job.command, ok, ["direction", "delta"], rows, payload, [f"{d12:.6f}"])


def _cocycle(job, reg, seed):
    from qlan.quantum import connes_cocycle

    p = job.params
    E = reg.experiment(p["experiment"])
    mats = [connes_cocycle(E, p["theta"], t) for t in p["t"]]
    unit = max(float(np.abs(U @ dagger(U) - np.eye(E.dim)).max()) for U in mats)
    ok = unit < 1e-10
    header, rows = matrices_to_rows(mats)
    header = ["t"] + header[1:]
    rows = [[t] + r[1:] for t, r in zip(p["t"], rows)]
    payload = {"theta": p["theta"], "t": p["t"], "unitarity_residual": unit, "passed": ok}
    return JobResult(job.name, job.command, ok, header, rows, payload,
                     [f"{len(mats)} cocycles, unitarity residual {unit:.3e}"])


def _canonical_state(job, reg, seed):
    from qlan.quantum import GroupWord, Letter, omega_table, random_words

    p = job.params
    E = reg.experiment(p["experiment"])
    if p["words"] is not None:
        words = [GroupWord(tuple(Letter(th, t, inv) for th, t, inv in w)) for w in p["words"]]
    else:
        s = seed if p["seed"] is None else p["seed"]
        rng = np.random.default_rng(s)
        r = p["random"]
        words = random_words(rng, E.params, r["count"], r["max_len"], r["t_scale"])
    rows = [list(row) for row in omega_table(E, words)]
    ok = all(math.hypot(re, im) <= 1 + 1e-12 for _, re, im in rows)
    payload = {"words": [[[L.theta, L.t, L.inverse] for L in w] for w in words],
               "values": [[re, im] for _, re, im in rows], "passed": ok}
    return JobResult(job.name, job.command, ok, ["word", "re", "im"], rows, payload,
                     [format_complex(complex(re, im)) for _, re, im in rows])


def _suff_check(job, reg, seed):
    from qlan.quantum import DEFAULT_T_GRID, is_sufficient_subalgebra, minimal_sufficient_basis

    p = job.params
    E = reg.experiment(p["experiment"])
    grid = tuple(p["t_grid"]) if p["t_grid"] is not None else DEFAULT_T_GRID
    if p["basis"] is None:
        basis = list(minimal_sufficient_basis(E, grid).basis)
    else:
        basis = [pairs_to_matrix(B) for B in p["basis"]]
    res = is_sufficient_subalgebra(E, basis, grid)
    want = True if not isinstance(p["expect"], bool) else p["expect"]
    ok = bool(res) == want
    header, rows = matrices_to_rows(basis)
    payload = {"sufficient": bool(res), "residual": res.residual, "reason": res.reason,
               "dim": len(basis), "t_grid": list(grid), "passed": ok}
    verdict = "sufficient" if res else f"not sufficient ({res.reason})"
    return JobResult(job.name, job.command, ok, header, rows, payload,
                     [f"dim {len(basis)}: {verdict}, residual {res.residual:.3e}"])


def _lan_verify(job, reg, seed):
    from qlan.lan import DEFAULT_SCHEDULE, CocycleLetter, CocycleWordSpec, LocalFamily, lan_report, simplified_family

    p = job.params
    L = LocalFamily(reg.family(p["family"]))
    if p["simplified"]:
        L = simplified_family(L)
    w = CocycleWordSpec(tuple(CocycleLetter(tuple(x["u"]), x["t"], x["adjoint"]) for x in p["word"]))
    schedule = p["schedule"] or list(DEFAULT_SCHEDULE)
    rep = lan_report(L, w, schedule, p["base_u"], p["burn_in"], p["threshold"], p["workers"])
    payload = rep.to_json()
    payload["tolerances"] = dataclasses.asdict(tolerances.get())
    slope = "nan" if math.isnan(rep.slope) else f"{rep.slope:.3f}"
    return JobResult(job.name, job.command, rep.passed, list(rep.header), [list(r) for r in rep.rows()], payload,
                     [f"final gap {rep.gaps[-1]:.3e}, slope {slope}, {'pass' if rep.passed else 'FAIL'}"])


def _qubit_demo(job, reg, seed):
    from qlan.lan import qubit_closed_forms

    p = job.params
    q = qubit_closed_forms(p["r"], tuple(p["u"]))
    pl = q.pipeline
    ok = (abs(pl["I_c"] - q.fisher_classical) <= 1e-9
          and abs(pl["sigma_sy_sx"] - q.r) <= 1e-12
          and pl["k_dim"] == 3)
    payload = q.to_json()
    payload["passed"] = ok
    rows = [["I_c", q.fisher_classical], ["limit_mean", q.limit_mean],
            ["wigner_x", q.wigner_center[0]], ["wigner_y", q.wigner_center[1]],
            ["commutator_scale", q.commutator_scale]]
    rows += [[f"pipeline_{k}", v] for k, v in pl.items()]
    return JobResult(job.name, job.command, ok, ["quantity", "value"], rows, payload,
                     [f"I_c = {q.fisher_classical:.6f}"])


HANDLERS: dict[str, Callable] = {
    "hellinger": _hellinger,
    "canonical-measure": _canonical_measure,
    "deficiency": _deficiency,
    "cocycle": _cocycle,
    "canonical-state": _canonical_state,
    "suff-check": _suff_check,
    "lan-verify": _lan_verify,
    "qubit-demo": _qubit_demo,
}

NUMERICAL_ERRORS = (ArithmeticError, ValueError, np.linalg.LinAlgError, KeyError)


def run_job(job: JobSpec, reg: Registry, seed: int = 0) -> JobResult | JobFailure:
    """Run one job; numerical failures are returned, not raised."""
    try:
        return HANDLERS[job.command](job, reg, seed)
    except NUMERICAL_ERRORS as exc:
        return JobFailure(job.name, job.command, f"{type(exc).__name__}: {exc}")


def _emit(result, out: Path, formats) -> list[Path]:
    paths = []
    if isinstance(result, JobFailure):
        if "json" in formats:
            paths.append(write_json(out / f"{result.name}.json", {
                "name": result.name, "command": result.command, "passed": False, "error": result.error}))
        return paths
    if "csv" in formats:
        paths.append(write_csv(out / f"{result.name}.csv", result.header, result.rows))
    if "json" in formats:
        body = {"name": result.name, "command": result.command, "passed": bool(result.passed), "result": result.payload}
        paths.append(write_json(out / f"{result.name}.json", body))
    return paths


def run_config(
    cfg: RunConfig,
    jobs: int = 1,
    tolerance_scale: float = 1.0,
    seed: int = 0,
    select: Callable[[JobSpec], bool] | None = None,
    on_result: Callable | None = None,
) -> list:
    """Run the config's jobs in declared order and write their artifacts.

    Each job's artifacts are written as soon as it finishes, so a failure
    later in the list leaves earlier results on disk. With ``jobs > 1`` jobs
    run on a thread pool; output bytes do not depend on scheduling.
    """
    selected = [j for j in cfg.jobs if select is None or select(j)]
    tol = tolerances.get().updated(**cfg.tolerances).scaled(tolerance_scale)
    out = Path(cfg.output.dir)
    reg = Registry(cfg)

    def task(job):
        with tolerances.use(tol):
            res = run_job(job, reg, seed)
        _emit(res, out, cfg.output.formats)
        return res

    if jobs > 1 and len(selected) > 1:
        with ThreadPoolExecutor(jobs) as ex:
            futures = [ex.submit(contextvars.copy_context().run, task, j) for j in selected]
            results = []
            for f in futures:
                results.append(f.result())
                if on_result:
                    on_result(results[-1])
    else:
        results = []
        for j in selected:
            results.append(task(j))
            if on_result:
                on_result(results[-1])
    return results
