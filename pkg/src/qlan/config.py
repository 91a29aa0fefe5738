"""Run configuration: parsing, validation and normalization.

The document is a JSON-compatible tree (YAML syntax is accepted as well).
Validation walks the composed YAML node graph, so every error names the line
it refers to. The normalized :class:`RunConfig` serializes back to JSON with
:meth:`RunConfig.dumps`; parsing that text yields an equal config.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml
from yaml.constructor import SafeConstructor

from qlan import tolerances as tol_mod
from qlan.io import matrix_to_pairs, pairs_to_matrix

__all__ = [
    "ConfigError",
    "FamilySpec",
    "ExperimentSpec",
    "JobSpec",
    "OutputSpec",
    "RunConfig",
    "COMMANDS",
    "parse_config",
    "load_config",
    "build_family",
    "build_experiment",
]


class ConfigError(ValueError):
    """Schema violation; ``line`` is 1-based, or ``None`` when unknown."""

    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    params: dict
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: dict
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class JobSpec:
    name: str
    command: str
    params: dict
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    families: dict = field(default_factory=dict)
    experiments: dict = field(default_factory=dict)
    jobs: tuple = ()
    tolerances: dict = field(default_factory=dict)
    output: OutputSpec = OutputSpec()

    def to_dict(self) -> dict:
        return {
            "families": {k: {"kind": f.kind, **f.params} for k, f in self.families.items()},
            "experiments": {k: {"kind": e.kind, **e.params} for k, e in self.experiments.items()},
            "tolerances": dict(self.tolerances),
            "output": {"dir": self.output.dir, "formats": list(self.output.formats)},
            "jobs": [{"name": j.name, "command": j.command, **j.params} for j in self.jobs],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def with_output_dir(self, path) -> "RunConfig":
        return dataclasses.replace(self, output=dataclasses.replace(self.output, dir=str(path)))


# -- node helpers ------------------------------------------------------------


class _Ctx:
    def __init__(self, source: str):
        self.source = source

    def fail(self, node, message: str):
        line = node.start_mark.line + 1 if node is not None else None
        raise ConfigError(message, line, self.source)


def _line(node) -> int:
    return node.start_mark.line + 1


def _plain(node) -> Any:
    return SafeConstructor().construct_object(node, deep=True)


def _mapping(ctx: _Ctx, node, what: str) -> dict:
    if not isinstance(node, yaml.MappingNode):
        ctx.fail(node, f"{what} must be a mapping")
    out = {}
    for k, v in node.value:
        key = _plain(k)
        if not isinstance(key, str):
            ctx.fail(k, f"{what}: keys must be strings, got {key!r}")
        if key in out:
            ctx.fail(k, f"{what}: duplicate key {key!r}")
        out[key] = (k, v)
    return out


def _sequence(ctx: _Ctx, node, what: str) -> list:
    if not isinstance(node, yaml.SequenceNode):
        ctx.fail(node, f"{what} must be a list")
    return list(node.value)


def _number(ctx: _Ctx, node, what: str) -> float:
    v = _plain(node) if isinstance(node, yaml.ScalarNode) else None
    if isinstance(v, bool) or v is None:
        ctx.fail(node, f"{what} must be a number")
    try:
        x = float(v)
    except (TypeError, ValueError):
        ctx.fail(node, f"{what} must be a number, got {v!r}")
    if not math.isfinite(x):
        ctx.fail(node, f"{what} must be finite")
    return x


def _positive(ctx, node, what) -> float:
    x = _number(ctx, node, what)
    if not x > 0:
        ctx.fail(node, f"{what} must be positive, got {x}")
    return x


def _integer(ctx: _Ctx, node, what: str, minimum: int | None = None) -> int:
    x = _number(ctx, node, what)
    if x != int(x):
        ctx.fail(node, f"{what} must be an integer, got {x}")
    if minimum is not None and x < minimum:
        ctx.fail(node, f"{what} must be at least {minimum}, got {int(x)}")
    return int(x)


def _boolean(ctx, node, what) -> bool:
    v = _plain(node) if isinstance(node, yaml.ScalarNode) else None
    if not isinstance(v, bool):
        ctx.fail(node, f"{what} must be true or false")
    return v


def _string(ctx, node, what) -> str:
    v = _plain(node) if isinstance(node, yaml.ScalarNode) else None
    if not isinstance(v, str) or not v:
        ctx.fail(node, f"{what} must be a nonempty string")
    return v


def _label(ctx, node, what):
    v = _plain(node) if isinstance(node, yaml.ScalarNode) else None
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        ctx.fail(node, f"{what} must be a string or number")
    return v


def _vector(ctx, node, what) -> list[float]:
    return [_number(ctx, x, f"{what}[{i}]") for i, x in enumerate(_sequence(ctx, node, what))]


def _table(ctx, node, what) -> list[list[float]]:
    rows = [_vector(ctx, r, f"{what} row {i}") for i, r in enumerate(_sequence(ctx, node, what))]
    if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
        ctx.fail(node, f"{what} must be a nonempty rectangular table")
    return rows


def _matrix(ctx, node, what) -> list:
    """Complex matrix as ``[[ [re, im], ... ], ...]``; real entries are allowed."""
    rows = _sequence(ctx, node, what)
    data = []
    for i, r in enumerate(rows):
        row = []
        for j, z in enumerate(_sequence(ctx, r, f"{what} row {i}")):
            if isinstance(z, yaml.SequenceNode):
                pair = _vector(ctx, z, f"{what}[{i}][{j}]")
                if len(pair) != 2:
                    ctx.fail(z, f"{what}[{i}][{j}] must be [re, im]")
                row.append(pair)
            else:
                row.append([_number(ctx, z, f"{what}[{i}][{j}]"), 0.0])
        data.append(row)
    if not data or any(len(r) != len(data) for r in data):
        ctx.fail(node, f"{what} must be a nonempty square matrix")
    return matrix_to_pairs(pairs_to_matrix(data))


def _matrix_list(ctx, node, what) -> list:
    mats = [_matrix(ctx, m, f"{what}[{i}]") for i, m in enumerate(_sequence(ctx, node, what))]
    return mats


def _check_keys(ctx, mapping: dict, node, allowed, required, what):
    for key, (knode, _) in mapping.items():
        if key not in allowed:
            ctx.fail(knode, f"{what}: unknown key {key!r} (allowed: {', '.join(sorted(allowed))})")
    for key in required:
        if key not in mapping:
            ctx.fail(node, f"{what}: missing required key {key!r}")


def _dim(pairs) -> int:
    return len(pairs)


# -- families ----------------------------------------------------------------


def _family(ctx, name, node) -> FamilySpec:
    what = f"family {name!r}"
    m = _mapping(ctx, node, what)
    if "kind" not in m:
        ctx.fail(node, f"{what}: missing required key 'kind'")
    kind = _string(ctx, m["kind"][1], f"{what}.kind")
    if kind == "qubit":
        _check_keys(ctx, m, node, {"kind", "r"}, {"r"}, what)
        r = _number(ctx, m["r"][1], f"{what}.r")
        if not 0 < r < 1:
            ctx.fail(m["r"][1], f"{what}.r must lie in (0, 1), got {r}")
        return FamilySpec(kind, {"r": r}, _line(node))
    if kind == "diagonal":
        _check_keys(ctx, m, node, {"kind", "probabilities", "derivatives"}, {"probabilities", "derivatives"}, what)
        p = _vector(ctx, m["probabilities"][1], f"{what}.probabilities")
        D = _table(ctx, m["derivatives"][1], f"{what}.derivatives")
        if len(D[0]) != len(p):
            ctx.fail(m["derivatives"][1], f"{what}: derivative rows need {len(p)} entries, got {len(D[0])}")
        return FamilySpec(kind, {"probabilities": p, "derivatives": D}, _line(node))
    if kind == "rotation":
        _check_keys(ctx, m, node, {"kind", "rho", "H"}, {"rho", "H"}, what)
        rho = _matrix(ctx, m["rho"][1], f"{what}.rho")
        H = _matrix_list(ctx, m["H"][1], f"{what}.H")
        if not H:
            ctx.fail(m["H"][1], f"{what}.H must list at least one generator")
        for i, X in enumerate(H):
            if _dim(X) != _dim(rho):
                ctx.fail(m["H"][1], f"{what}.H[{i}] has dimension {_dim(X)}, expected {_dim(rho)}")
        return FamilySpec(kind, {"rho": rho, "H": H}, _line(node))
    if kind == "user":
        _check_keys(ctx, m, node, {"kind", "rho", "first", "second"}, {"rho", "first"}, what)
        rho = _matrix(ctx, m["rho"][1], f"{what}.rho")
        first = _matrix_list(ctx, m["first"][1], f"{what}.first")
        if not first:
            ctx.fail(m["first"][1], f"{what}.first must list at least one derivative")
        d, k = _dim(rho), len(first)
        for i, X in enumerate(first):
            if _dim(X) != d:
                ctx.fail(m["first"][1], f"{what}.first[{i}] has dimension {_dim(X)}, expected {d}")
        params = {"rho": rho, "first": first, "second": None}
        if "second" in m and not (isinstance(m["second"][1], yaml.ScalarNode) and _plain(m["second"][1]) is None):
            rows = _sequence(ctx, m["second"][1], f"{what}.second")
            second = [_matrix_list(ctx, r, f"{what}.second[{i}]") for i, r in enumerate(rows)]
            if len(second) != k or any(len(r) != k for r in second):
                ctx.fail(m["second"][1], f"{what}.second must be a {k}x{k} table of matrices")
            if any(_dim(X) != d for r in second for X in r):
                ctx.fail(m["second"][1], f"{what}.second entries must have dimension {d}")
            params["second"] = second
        return FamilySpec(kind, params, _line(node))
    ctx.fail(m["kind"][1], f"{what}: unknown kind {kind!r} (allowed: diagonal, qubit, rotation, user)")


# -- experiments -------------------------------------------------------------


def _experiment(ctx, name, node) -> ExperimentSpec:
    what = f"experiment {name!r}"
    m = _mapping(ctx, node, what)
    if "kind" not in m:
        ctx.fail(node, f"{what}: missing required key 'kind'")
    kind = _string(ctx, m["kind"][1], f"{what}.kind")
    if kind == "classical":
        _check_keys(ctx, m, node, {"kind", "probs", "params", "strict"}, {"probs"}, what)
        P = _table(ctx, m["probs"][1], f"{what}.probs")
        if "params" in m:
            labels = [_label(ctx, x, f"{what}.params") for x in _sequence(ctx, m["params"][1], f"{what}.params")]
            if len(labels) != len(P) or len(set(labels)) != len(labels):
                ctx.fail(m["params"][1], f"{what}.params must be {len(P)} distinct labels")
        else:
            labels = list(range(len(P)))
        strict = _boolean(ctx, m["strict"][1], f"{what}.strict") if "strict" in m else True
        return ExperimentSpec(kind, {"params": labels, "probs": P, "strict": strict}, _line(node))
    if kind == "quantum":
        _check_keys(ctx, m, node, {"kind", "states", "base"}, {"states"}, what)
        snode = m["states"][1]
        states = []
        if isinstance(snode, yaml.MappingNode):
            for k, v in snode.value:
                states.append({"label": _label(ctx, k, f"{what}.states"), "rho": _matrix(ctx, v, f"{what}.states")})
        else:
            for i, item in enumerate(_sequence(ctx, snode, f"{what}.states")):
                im = _mapping(ctx, item, f"{what}.states[{i}]")
                _check_keys(ctx, im, item, {"label", "rho"}, {"label", "rho"}, f"{what}.states[{i}]")
                states.append({
                    "label": _label(ctx, im["label"][1], f"{what}.states[{i}].label"),
                    "rho": _matrix(ctx, im["rho"][1], f"{what}.states[{i}].rho"),
                })
        if not states:
            ctx.fail(snode, f"{what}.states must be nonempty")
        labels = [s["label"] for s in states]
        if len(set(labels)) != len(labels):
            ctx.fail(snode, f"{what}.states: duplicate labels")
        if len({_dim(s["rho"]) for s in states}) != 1:
            ctx.fail(snode, f"{what}.states have inconsistent dimensions")
        base = labels[0]
        if "base" in m:
            base = _label(ctx, m["base"][1], f"{what}.base")
            if base not in labels:
                ctx.fail(m["base"][1], f"{what}.base {base!r} is not a state label")
        return ExperimentSpec(kind, {"states": states, "base": base}, _line(node))
    ctx.fail(m["kind"][1], f"{what}: unknown kind {kind!r} (allowed: classical, quantum)")


# -- jobs --------------------------------------------------------------------

# converters take (ctx, node, what, config-so-far) and return a normalized value


def _ref(section: str, kind: str | None = None) -> Callable:
    def conv(ctx, node, what, cfg):
        name = _string(ctx, node, what)
        table = getattr(cfg, section)
        if name not in table:
            ctx.fail(node, f"{what}: unknown {section[:-1]} {name!r}")
        if kind is not None and table[name].kind != kind:
            ctx.fail(node, f"{what}: {section[:-1]} {name!r} is {table[name].kind}, expected {kind}")
        return name
    return conv


def _experiment_ref(ctx, node, what, cfg):
    return _ref("experiments")(ctx, node, what, cfg)


def _simplex_points(ctx, node, what, cfg):
    pts = _table(ctx, node, what)
    for i, z in enumerate(pts):
        if any(x < 0 for x in z) or abs(sum(z) - 1) > 1e-12:
            ctx.fail(node, f"{what}[{i}] is not a point of the simplex")
    return pts


def _unit_interval_list(ctx, node, what, cfg):
    ps = _vector(ctx, node, what)
    if not ps or any(not 0 <= p <= 1 for p in ps):
        ctx.fail(node, f"{what} must be a nonempty list in [0, 1]")
    return ps


def _times(ctx, node, what, cfg):
    ts = _vector(ctx, node, what)
    if not ts:
        ctx.fail(node, f"{what} must be nonempty")
    return ts


def _group_words(ctx, node, what, cfg):
    words = []
    for i, wn in enumerate(_sequence(ctx, node, what)):
        letters = []
        for j, ln in enumerate(_sequence(ctx, wn, f"{what}[{i}]")):
            items = _sequence(ctx, ln, f"{what}[{i}][{j}]")
            if len(items) not in (2, 3):
                ctx.fail(ln, f"{what}[{i}][{j}] must be [theta, t] or [theta, t, inverse]")
            inv = _boolean(ctx, items[2], f"{what}[{i}][{j}].inverse") if len(items) == 3 else False
            letters.append([_label(ctx, items[0], f"{what}[{i}][{j}].theta"), _number(ctx, items[1], f"{what}[{i}][{j}].t"), inv])
        words.append(letters)
    return words


def _random_spec(ctx, node, what, cfg):
    m = _mapping(ctx, node, what)
    _check_keys(ctx, m, node, {"count", "max_len", "t_scale"}, {"count"}, what)
    return {
        "count": _integer(ctx, m["count"][1], f"{what}.count", 1),
        "max_len": _integer(ctx, m["max_len"][1], f"{what}.max_len", 1) if "max_len" in m else 4,
        "t_scale": _positive(ctx, m["t_scale"][1], f"{what}.t_scale") if "t_scale" in m else 3.0,
    }


def _cocycle_word(ctx, node, what, cfg):
    letters = []
    for j, ln in enumerate(_sequence(ctx, node, what)):
        w = f"{what}[{j}]"
        if isinstance(ln, yaml.MappingNode):
            m = _mapping(ctx, ln, w)
            _check_keys(ctx, m, ln, {"u", "t", "adjoint"}, {"u", "t"}, w)
            u = _vector(ctx, m["u"][1], f"{w}.u")
            t = _number(ctx, m["t"][1], f"{w}.t")
            adj = _boolean(ctx, m["adjoint"][1], f"{w}.adjoint") if "adjoint" in m else False
        else:
            items = _sequence(ctx, ln, w)
            if len(items) not in (2, 3):
                ctx.fail(ln, f"{w} must be [u, t] or [u, t, adjoint]")
            u = _vector(ctx, items[0], f"{w}.u")
            t = _number(ctx, items[1], f"{w}.t")
            adj = _boolean(ctx, items[2], f"{w}.adjoint") if len(items) == 3 else False
        letters.append({"u": u, "t": t, "adjoint": adj})
    return letters


def _schedule(ctx, node, what, cfg):
    ns = [_integer(ctx, x, f"{what}[{i}]", 1) for i, x in enumerate(_sequence(ctx, node, what))]
    if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
        ctx.fail(node, f"{what} must be a nonempty strictly increasing list")
    return ns


def _opt_vector(ctx, node, what, cfg):
    if isinstance(node, yaml.ScalarNode) and _plain(node) is None:
        return None
    return _vector(ctx, node, what)


def _f(conv):
    return lambda ctx, node, what, cfg: conv(ctx, node, what)


def _label_conv(ctx, node, what, cfg):
    return _label(ctx, node, what)


def _expect_bool_or_number(ctx, node, what, cfg):
    v = _plain(node) if isinstance(node, yaml.ScalarNode) else None
    if isinstance(v, bool):
        return v
    return _number(ctx, node, what)


# command -> {param: (converter, default)}; a default of _REQUIRED marks required
_REQUIRED = object()
_JOB_NAME = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")
_COMMON = {"expect": (_expect_bool_or_number, None), "tolerance": (_f(_positive), 1e-6)}

COMMANDS: dict[str, dict[str, tuple]] = {
    "hellinger": {
        "experiment": (_experiment_ref, _REQUIRED),
        "z": (_simplex_points, None),
        "theta": (_label_conv, None),
        "p": (_unit_interval_list, None),
    },
    "canonical-measure": {"experiment": (_ref("experiments", "classical"), _REQUIRED)},
    "deficiency": {
        "experiment": (_ref("experiments", "classical"), _REQUIRED),
        "other": (_ref("experiments", "classical"), _REQUIRED),
    },
    "cocycle": {
        "experiment": (_ref("experiments", "quantum"), _REQUIRED),
        "theta": (_label_conv, _REQUIRED),
        "t": (_times, _REQUIRED),
    },
    "canonical-state": {
        "experiment": (_ref("experiments", "quantum"), _REQUIRED),
        "words": (_group_words, None),
        "random": (_random_spec, None),
        "seed": (lambda c, n, w, cfg: _integer(c, n, w, 0), None),
    },
    "suff-check": {
        "experiment": (_ref("experiments", "quantum"), _REQUIRED),
        "basis": (lambda c, n, w, cfg: _matrix_list(c, n, w), None),
        "t_grid": (_times, None),
    },
    "lan-verify": {
        "family": (_ref("families"), _REQUIRED),
        "word": (_cocycle_word, _REQUIRED),
        "schedule": (_schedule, None),
        "base_u": (_opt_vector, None),
        "burn_in": (lambda c, n, w, cfg: _integer(c, n, w, 1), 10**4),
        "threshold": (_f(_positive), 1e-3),
        "simplified": (_f(_boolean), False),
        "workers": (lambda c, n, w, cfg: _integer(c, n, w, 1), 1),
    },
    "qubit-demo": {
        "r": (_f(_number), _REQUIRED),
        "u": (_f(_vector), [0.0, 0.0, 0.0]),
    },
}


def _job(ctx, index: int, node, cfg) -> JobSpec:
    what = f"job {index}"
    m = _mapping(ctx, node, what)
    if "command" not in m:
        ctx.fail(node, f"{what}: missing required key 'command'")
    command = _string(ctx, m["command"][1], f"{what}.command")
    if command not in COMMANDS:
        ctx.fail(m["command"][1], f"{what}: unknown command {command!r} (allowed: {', '.join(COMMANDS)})")
    name = _string(ctx, m["name"][1], f"{what}.name") if "name" in m else f"{index:02d}-{command}"
    if not _JOB_NAME.fullmatch(name):
        ctx.fail(m["name"][1], f"{what}.name must match {_JOB_NAME.pattern} (it names the artifact files)")
    schema = {**COMMANDS[command], **_COMMON}
    _check_keys(ctx, m, node, set(schema) | {"name", "command"}, [k for k, (_, d) in schema.items() if d is _REQUIRED], f"{what} ({command})")
    params = {}
    for key, (conv, default) in schema.items():
        vnode = m[key][1] if key in m else None
        if vnode is not None and not (isinstance(vnode, yaml.ScalarNode) and _plain(vnode) is None):
            params[key] = conv(ctx, vnode, f"{what}.{key}", cfg)
        elif default is _REQUIRED:
            ctx.fail(vnode or node, f"{what}: {key!r} must not be null")
        else:
            params[key] = default
    _check_job(ctx, node, what, command, params, cfg)
    return JobSpec(name, command, params, _line(node))


def _experiment_dim(spec: ExperimentSpec) -> int:
    return _dim(spec.params["states"][0]["rho"])


def _family_m(spec: FamilySpec) -> int:
    p = spec.params
    return {"qubit": 3, "diagonal": len(p.get("derivatives", [])), "rotation": len(p.get("H", [])), "user": len(p.get("first", []))}[spec.kind]


def _check_job(ctx, node, what, command, p, cfg):
    """Cross-field rules: names resolve to compatible objects."""
    if command == "hellinger":
        e = cfg.experiments[p["experiment"]]
        if e.kind == "classical":
            if p["z"] is None:
                ctx.fail(node, f"{what}: classical hellinger needs 'z'")
            if any(len(z) != len(e.params["probs"]) for z in p["z"]):
                ctx.fail(node, f"{what}: simplex points need {len(e.params['probs'])} coordinates")
        else:
            if p["theta"] is None or p["p"] is None:
                ctx.fail(node, f"{what}: quantum hellinger needs 'theta' and 'p'")
            if p["theta"] not in [s["label"] for s in e.params["states"]]:
                ctx.fail(node, f"{what}: unknown state label {p['theta']!r}")
    elif command == "deficiency":
        a, b = cfg.experiments[p["experiment"]], cfg.experiments[p["other"]]
        if a.params["params"] != b.params["params"]:
            ctx.fail(node, f"{what}: experiments have different parameter sets")
    elif command == "cocycle":
        e = cfg.experiments[p["experiment"]]
        if p["theta"] not in [s["label"] for s in e.params["states"]]:
            ctx.fail(node, f"{what}: unknown state label {p['theta']!r}")
    elif command == "canonical-state":
        if (p["words"] is None) == (p["random"] is None):
            ctx.fail(node, f"{what}: give exactly one of 'words' or 'random'")
        labels = [s["label"] for s in cfg.experiments[p["experiment"]].params["states"]]
        for w in p["words"] or ():
            for letter in w:
                if letter[0] not in labels:
                    ctx.fail(node, f"{what}: unknown state label {letter[0]!r}")
    elif command == "suff-check":
        d = _experiment_dim(cfg.experiments[p["experiment"]])
        if p["basis"] is not None and any(_dim(B) != d for B in p["basis"]):
            ctx.fail(node, f"{what}: basis matrices must have dimension {d}")
    elif command == "lan-verify":
        m = _family_m(cfg.families[p["family"]])
        for j, letter in enumerate(p["word"]):
            if len(letter["u"]) != m:
                ctx.fail(node, f"{what}: word letter {j} needs {m} coordinates, got {len(letter['u'])}")
        if p["base_u"] is not None and len(p["base_u"]) != m:
            ctx.fail(node, f"{what}: base_u needs {m} coordinates")
    elif command == "qubit-demo":
        if not 0 < p["r"] < 1:
            ctx.fail(node, f"{what}: r must lie in (0, 1)")
        if len(p["u"]) != 3:
            ctx.fail(node, f"{what}: u needs 3 coordinates")


# -- top level ---------------------------------------------------------------

_TOP = {"families", "experiments", "jobs", "tolerances", "output"}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate a config document.

    Raises:
        ConfigError: syntax or schema violation, with the offending line.
    """
    ctx = _Ctx(source)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
        raise ConfigError(f"syntax error: {exc.problem}", line, source) from None
    if root is None:
        raise ConfigError("empty config document", 1, source)
    top = _mapping(ctx, root, "config")
    _check_keys(ctx, top, root, _TOP, (), "config")

    families = {}
    if "families" in top:
        for name, (k, v) in _mapping(ctx, top["families"][1], "families").items():
            families[name] = _family(ctx, name, v)
    experiments = {}
    if "experiments" in top:
        for name, (k, v) in _mapping(ctx, top["experiments"][1], "experiments").items():
            experiments[name] = _experiment(ctx, name, v)

    tols = {}
    if "tolerances" in top:
        known = {f.name for f in dataclasses.fields(tol_mod.Tolerances)}
        for name, (k, v) in _mapping(ctx, top["tolerances"][1], "tolerances").items():
            if name not in known:
                ctx.fail(k, f"unknown tolerance {name!r}")
            tols[name] = _positive(ctx, v, f"tolerances.{name}")
            if name == "jacobi_max_sweeps":
                tols[name] = _integer(ctx, v, f"tolerances.{name}", 1)

    output = OutputSpec()
    if "output" in top:
        onode = top["output"][1]
        om = _mapping(ctx, onode, "output")
        _check_keys(ctx, om, onode, {"dir", "formats"}, (), "output")
        d = _string(ctx, om["dir"][1], "output.dir") if "dir" in om else output.dir
        formats = output.formats
        if "formats" in om:
            formats = tuple(_string(ctx, x, "output.formats") for x in _sequence(ctx, om["formats"][1], "output.formats"))
            bad = set(formats) - {"csv", "json"}
            if bad or len(set(formats)) != len(formats):
                ctx.fail(om["formats"][1], "output.formats must be distinct entries of csv, json")
        output = OutputSpec(d, formats)

    cfg = RunConfig(families, experiments, (), tols, output)
    jobs = []
    if "jobs" in top:
        jnode = top["jobs"][1]
        if not (isinstance(jnode, yaml.ScalarNode) and _plain(jnode) is None):
            for i, j in enumerate(_sequence(ctx, jnode, "jobs")):
                jobs.append(_job(ctx, i, j, cfg))
    seen = set()
    for j in jobs:
        if j.name in seen:
            raise ConfigError(f"duplicate job name {j.name!r}", j.line, source)
        seen.add(j.name)
    return dataclasses.replace(cfg, jobs=tuple(jobs))


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def build_family(spec: FamilySpec):
    """Instantiate a :class:`~qlan.families.QuantumFamily` from its spec."""
    from qlan import families as fam

    p = spec.params
    if spec.kind == "qubit":
        return fam.qubit_family(p["r"])
    if spec.kind == "diagonal":
        return fam.diagonal_family(p["probabilities"], p["derivatives"])
    if spec.kind == "rotation":
        return fam.rotation_family(pairs_to_matrix(p["rho"]), [pairs_to_matrix(H) for H in p["H"]])
    second = None
    if p["second"] is not None:
        second = [[pairs_to_matrix(Q) for Q in row] for row in p["second"]]
    return fam.polynomial_family(pairs_to_matrix(p["rho"]), [pairs_to_matrix(D) for D in p["first"]], second)


def build_experiment(spec: ExperimentSpec):
    """Instantiate a classical or quantum experiment from its spec."""
    if spec.kind == "classical":
        from qlan.classical import ClassicalExperiment

        p = spec.params
        return ClassicalExperiment(np.array(p["probs"]), params=tuple(p["params"]), strict=p["strict"])
    from qlan.quantum import QuantumExperiment

    states = {s["label"]: pairs_to_matrix(s["rho"]) for s in spec.params["states"]}
    return QuantumExperiment(states, base=spec.params["base"])
