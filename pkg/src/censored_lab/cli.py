"""censored-lab: command-line access to the operator, solver, Monte Carlo and barrier tools.

Usage:  censored-lab SUBCOMMAND [CONFIG] [--workers N] [--output PATH]

CONFIG holds one ``key = value`` per line (TOML value syntax; ``#`` starts a
comment; ``-`` reads stdin).  Output is comma-separated text preceded by a
``#`` header that echoes every knob, defaults included.

Exit codes: 0 ok, 2 config or precondition error, 3 numeric
non-convergence, 4 certification or self-test failure.
"""
from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .domain import Ball, Domain, DomainError, HalfSpace, Interval
from .fields import CATALOG, ScalarField, constant, from_selector
from .quadrature import QuadratureError, QuadratureSpec
from .special_fn import KernelParams

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CERT = 0, 2, 3, 4
SUBCOMMANDS = ("special", "apply", "solve", "mc", "barrier", "analyze", "selftest")


class ConfigError(ValueError):
    def __init__(self, violations: List[str]):
        super().__init__("\n".join(violations))
        self.violations = violations


# -- schema -------------------------------------------------------------------------
# key -> (default, checker); a checker returns an error message or None.
REQUIRED = object()


def _num(lo=-np.inf, hi=np.inf, lo_open=False, hi_open=False, integer=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return "must be a number"
        if integer and int(v) != v:
            return "must be an integer"
        if v < lo or v > hi or (lo_open and v == lo) or (hi_open and v == hi):
            left, right = ("(" if lo_open else "["), (")" if hi_open else "]")
            return f"must lie in {left}{lo:g}, {hi:g}{right}"
        return None
    return check


def _str(choices=None):
    def check(v):
        if not isinstance(v, str):
            return "must be a string"
        if choices is not None and v not in choices:
            return f"must be one of {sorted(choices)}"
        return None
    return check


def _list_of(item):
    def check(v):
        if not isinstance(v, list) or not v:
            return "must be a non-empty list"
        for x in v:
            msg = item(x)
            if msg:
                return f"entries {msg}"
        return None
    return check


def _point(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return None
    if isinstance(v, list) and v and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return None
    return "must be a number or a list of numbers"


def _selector(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return None
    names = sorted(CATALOG) + ["one", "zero"]
    if isinstance(v, str) and v in names:
        return None
    return f"must be a number or one of {names}"


def _domain(v):
    if not isinstance(v, dict) or "kind" not in v:
        return "must be a record { kind = ..., ... }"
    kind = v["kind"]
    need = {"interval": {"a", "b"}, "ball": {"center", "radius"}, "halfspace": {"n"}}
    if kind not in need:
        return f"kind must be one of {sorted(need)}"
    extra = set(v) - need[kind] - {"kind"}
    missing = need[kind] - set(v)
    if missing or extra:
        return f"{kind} needs exactly {sorted(need[kind])}" + (f" (unknown {sorted(extra)})" if extra else "")
    try:
        build_domain(v)
    except (DomainError, TypeError, ValueError) as exc:
        return str(exc)
    return None


COMMON = {
    "s": (0.5, _num(0.0, 1.0, True, True)),
    "workers": (1, _num(1, 256, integer=True)),
    "abs_tol": (1e-10, _num(0.0, 1.0, lo_open=True)),
    "rel_tol": (1e-10, _num(0.0, 1.0, lo_open=True)),
    "max_depth": (40, _num(1, 400, integer=True)),
}
FIELD_KNOBS = {
    "M": (1.0, _num(0.0, lo_open=True)),
    "p": (2.0, _num(0.0)),
    "offset": (0.0, _num()),
}
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "special": {
        "n": (1, _num(1, 3, integer=True)),
        "quantities": (["C", "psi", "a"], _list_of(_str({"C", "normalization_integral", "psi", "psi_p", "a",
                                                          "a_prime_series", "psi_q_slope"}))),
        "p": ([2.0], _list_of(_num(0.0))),
        "t": ([1.0], _list_of(_num(0.0, 1.0, lo_open=True))),
        "terms": (64, _num(1, 100_000, integer=True)),
    },
    "apply": {
        "domain": (REQUIRED, _domain),
        "field": ("torsion", _selector),
        "points": (REQUIRED, _list_of(_point)),
        **FIELD_KNOBS,
    },
    "solve": {
        "domain": (REQUIRED, _domain),
        "f": ("one", _selector),
        "g": ("zero", _selector),
        "level": (3, _num(0, 8, integer=True)),
        "grading": (0.85, _num(0.0, 1.0, lo_open=True)),
        "quad_level": (2, _num(1, 6, integer=True)),
        "matrix_output": ("", _str()),
        **FIELD_KNOBS,
    },
    "mc": {
        "domain": (REQUIRED, _domain),
        "f": ("one", _selector),
        "points": (REQUIRED, _list_of(_point)),
        "paths": (10_000, _num(1, 10**9, integer=True)),
        "epsilon": (0.05, _num(0.0, 1.0, True, True)),
        "seed": (0, _num(0, 2**64 - 1, integer=True)),
        "c_dt": (0.1, _num(0.0, lo_open=True)),
        "max_steps": (100_000, _num(1, 10**9, integer=True)),
        "boundary_layer": (0.0, _num(0.0)),
        **FIELD_KNOBS,
    },
    "barrier": {
        "n": (2, _num(1, 3, integer=True)),
        "b": (1.0, _num(0.0, lo_open=True)),
        "p": (0.0, _num(0.0, 2.0, hi_open=True)),
        "r0": (0.0, _num(0.0, 0.5, hi_open=True)),
        "depth_samples": (10, _num(1, 1000, integer=True)),
        "tangential_samples": (5, _num(1, 1000, integer=True)),
        "threshold": (0.9, _num()),
    },
    "analyze": {
        "input": ("", _str()),
        "profile": ("torsion", _str({"torsion", "linear", "power"})),
        "p": (1.5, _num(1.0, lo_open=True)),
        "window": ([], lambda v: None if isinstance(v, list) and len(v) in (0, 2) else "must be [] or [lo, hi]"),
        "levels": (6, _num(2, 30, integer=True)),
        "modes": (["expansion", "oscillation", "liouville"],
                  _list_of(_str({"expansion", "oscillation", "liouville"}))),
    },
    "selftest": {},
}


@dataclass
class RunConfig:
    subcommand: str
    values: Dict[str, Any]
    explicit: set = field(default_factory=set)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def params(self) -> KernelParams:
        return KernelParams(self.n, float(self["s"]))

    @property
    def domain(self) -> Domain:
        return build_domain(self["domain"])

    @property
    def n(self) -> int:
        if "domain" in self.values:
            d = self.domain
            return d.dim
        return int(self.values.get("n", 1))

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(float(self["abs_tol"]), float(self["rel_tol"]), int(self["max_depth"]))


def build_domain(rec: dict) -> Domain:
    kind = rec["kind"]
    if kind == "interval":
        return Interval(float(rec["a"]), float(rec["b"]))
    if kind == "ball":
        c = rec["center"]
        c = [c] if not isinstance(c, list) else c
        if len(c) not in (1, 2, 3):
            raise DomainError("ball center must have 1 to 3 coordinates")
        return Ball(tuple(float(x) for x in c), float(rec["radius"]))
    if kind == "halfspace":
        return HalfSpace(int(rec["n"]))
    raise DomainError(f"unknown domain kind {kind!r}")


def parse_config(text: str, subcommand: str) -> RunConfig:
    """Parse ``key = value`` lines; collects every violation before raising ConfigError."""
    if subcommand not in SCHEMA:
        raise ConfigError([f"unknown subcommand {subcommand!r}; choose from {list(SUBCOMMANDS)}"])
    schema = {**COMMON, **SCHEMA[subcommand]}
    errors: List[str] = []
    seen: Dict[str, int] = {}
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            item = tomllib.loads(line)
        except tomllib.TOMLDecodeError as exc:
            errors.append(f"line {lineno}: malformed entry {raw.strip()!r} ({exc})")
            continue
        if len(item) != 1:
            errors.append(f"line {lineno}: expected one key = value, got {raw.strip()!r}")
            continue
        (key, value), = item.items()
        if key in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} (first on line {seen[key]}, again on line {lineno})")
            continue
        seen[key] = lineno
        if key not in schema:
            errors.append(f"line {lineno}: unknown key {key!r} for {subcommand}; allowed {sorted(schema)}")
            continue
        msg = schema[key][1](value)
        if msg:
            errors.append(f"line {lineno}: {key} {msg} (got {value!r})")
            continue
        values[key] = value
    for key, (default, _) in schema.items():
        if key not in values and key not in seen:
            if default is REQUIRED:
                errors.append(f"missing required key {key!r}")
            else:
                values[key] = default
    if not errors:
        errors += _cross_checks(subcommand, values)
    if errors:
        raise ConfigError(errors)
    return RunConfig(subcommand, values, set(seen))


def _cross_checks(sub, v) -> List[str]:
    out = []
    if "domain" in v and "points" in v:
        dim = build_domain(v["domain"]).dim
        for pt in v["points"]:
            if len(np.atleast_1d(pt)) != dim:
                out.append(f"point {pt!r} does not have dimension {dim}")
    if sub == "solve":
        dom = build_domain(v["domain"])
        if isinstance(dom, HalfSpace) or (isinstance(dom, Ball) and dom.dim > 2):
            out.append("solve supports interval and ball domains of dimension 1 or 2")
    if sub == "mc" and isinstance(build_domain(v["domain"]), HalfSpace) and v["boundary_layer"] == 0:
        out.append("mc on a half space needs an explicit boundary_layer (and a bounded exit time)")
    return out


# -- output ------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_fmt(x)}" for k, x in v.items()) + " }"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v) + 0.0, ".12g")  # no "-0"
    if isinstance(v, (bool, np.bool_)):
        return "pass" if v else "fail"
    v = str(v)
    if "," in v:
        raise ValueError(f"table cell {v!r} contains a comma")
    return v


class Table:
    def __init__(self, out, cfg: RunConfig):
        self.out = out
        out.write(f"# censored-lab {__version__}\n")
        out.write(f"# subcommand = {cfg.subcommand}\n")
        for k in sorted(cfg.values):
            out.write(f"# {k} = {_fmt(cfg.values[k])}\n")

    def columns(self, names):
        self.out.write("# columns = " + ",".join(names) + "\n")

    def row(self, *cells):
        self.out.write(",".join(_cell(c) for c in cells) + "\n")

    def note(self, key, value):
        self.out.write(f"# result {key} = {_fmt(value) if not isinstance(value, str) else value}\n")


def _field(cfg: RunConfig, key: str, n: int) -> ScalarField:
    sel = cfg[key]
    if not isinstance(sel, str):
        return constant(float(sel), n)
    kw = {"M": float(cfg["M"]), "p": float(cfg["p"]), "offset": float(cfg["offset"])}
    return from_selector(sel, n, **kw)


def _points(cfg: RunConfig):
    return [np.atleast_1d(np.asarray(p, dtype=float)) for p in cfg["points"]]


def _coord_names(n):
    return [f"x{i + 1}" for i in range(n)]


# -- subcommands --------------------------------------------------------------------


def cmd_special(cfg: RunConfig, tab: Table) -> int:
    from .special_fn import (a_coeff, a_prime_series, normalization_constant, normalization_integral,
                          psi_p_with_error, psi_small_q_slope_with_error, psi_with_error)
    P, q = cfg.params, cfg.quad
    tab.columns(["name", "n", "s", "p", "t", "value", "error_estimate"])
    n, s = P.n, P.s
    for name in cfg["quantities"]:
        if name == "C":
            tab.row(name, n, s, "", "", normalization_constant(P), 0.0)
        elif name == "normalization_integral":
            v, e = normalization_integral(P, 1.0, q)
            tab.row(name, n, s, "", "", v, e)
        elif name == "a":
            for p in cfg["p"]:
                v, e = psi_with_error(float(p), 1.0, P, q)
                tab.row(name, n, s, p, 1.0, -v, e)
        elif name == "a_prime_series":
            for p in cfg["p"]:
                r = a_prime_series(float(p), s, int(cfg["terms"]))
                tab.row(name, 1, s, p, "", r.value, max(r.last_increment, r.tail_estimate))
        elif name == "psi_q_slope":
            for t in cfg["t"]:
                v, e = psi_small_q_slope_with_error(float(t), P, q)
                tab.row(name, n, s, 0.0, t, v, e)
        else:
            fn = psi_with_error if name == "psi" else psi_p_with_error
            for p in cfg["p"]:
                for t in cfg["t"]:
                    v, e = fn(float(p), float(t), P, q)
                    tab.row(name, n, s, p, t, v, e)
    return EXIT_OK


def cmd_apply(cfg: RunConfig, tab: Table) -> int:
    from .operator import apply_batch
    dom, P = cfg.domain, cfg.params
    u = _field(cfg, "field", dom.dim)
    pts = _points(cfg)
    evs = apply_batch(dom, u, pts, P, cfg.quad, int(cfg["workers"]))
    tab.columns(_coord_names(dom.dim) + ["value", "error_estimate"])
    for x, e in zip(pts, evs):
        tab.row(*x, e.value, e.error_estimate)
    return EXIT_OK


def cmd_solve(cfg: RunConfig, tab: Table) -> int:
    from .solver import assemble, make_grid, monotonicity_diagnostics, solve_dirichlet
    dom, P = cfg.domain, cfg.params
    grid = make_grid(dom, int(cfg["level"]), float(cfg["grading"]))
    A = assemble(dom, grid, P, cfg.quad, int(cfg["workers"]), int(cfg["quad_level"]))
    f, g = _field(cfg, "f", dom.dim), _field(cfg, "g", dom.dim)
    u, rep = solve_dirichlet(A, f, g)
    d = np.asarray(dom.distance(grid.coords()), dtype=float)
    tab.columns(_coord_names(dom.dim) + ["u", "d", "u_over_d"])
    for x, uv, dv in zip(grid.coords(), u.values, d):
        tab.row(*x, uv, dv, uv / dv if dv > 0 else "")
    mono = monotonicity_diagnostics(A)
    tab.note("unknowns", int(grid.free.sum()))
    tab.note("h", grid.h)
    tab.note("method", rep.method)
    tab.note("residual_max", rep.residual_max)
    tab.note("condition_estimate", rep.condition_estimate)
    tab.note("diagonal_positive", mono.diagonal_positive)
    tab.note("positive_offdiagonal", mono.positive_offdiagonal)
    tab.note("min_dominance_margin", mono.min_dominance_margin)
    if cfg["matrix_output"]:
        with open(cfg["matrix_output"], "w") as fh:
            fh.write("# row,col,value (free-row index, node column)\n")
            for line in A.coo_lines():
                fh.write(line + "\n")
        tab.note("matrix_output", cfg["matrix_output"])
    return EXIT_OK


def cmd_mc(cfg: RunConfig, tab: Table) -> int:
    from .stochastic import JumpConfig, estimate_solution
    dom, P = cfg.domain, cfg.params
    f = _field(cfg, "f", dom.dim)
    jc = JumpConfig(float(cfg["epsilon"]), int(cfg["max_steps"]), float(cfg["boundary_layer"]) or None,
                    int(cfg["seed"]), float(cfg["c_dt"]))
    tab.columns(_coord_names(dom.dim) + ["estimate", "std_error", "mean_steps", "truncated_fraction"])
    flagged = False
    for x in _points(cfg):
        st = estimate_solution(dom, f, x, int(cfg["paths"]), jc, P, int(cfg["workers"]))
        tab.row(*x, st.estimate, st.std_error, st.mean_steps, st.truncated_fraction)
        flagged |= st.flagged
    if flagged:
        tab.note("warning", "more than 1% of paths hit max_steps")
    return EXIT_OK


def cmd_barrier(cfg: RunConfig, tab: Table) -> int:
    from .barriers import (CertificationError, ExteriorBallBarrier, Frame, barrier_properties,
                           build_boundary_barrier, certify_barrier, collar_sample)
    n = int(cfg["n"])
    P = KernelParams(n, float(cfg["s"]))
    p = float(cfg["p"]) or None
    r0 = float(cfg["r0"]) or None
    nd, nt = int(cfg["depth_samples"]), int(cfg["tangential_samples"])
    thr = float(cfg["threshold"])
    try:
        built = build_boundary_barrier(float(cfg["b"]), P, cfg.quad, p=p, r0=r0, threshold=thr,
                                       n_depth=nd, n_tang=nt)
        bar, rep = built.barrier, built.certification
    except CertificationError as exc:
        tab.note("status", "fail")
        tab.note("reason", str(exc).replace("\n", " "))
        return EXIT_CERT
    tab.columns(_coord_names(n) + ["L_phi", "margin"])
    for x, v in zip(rep.points, rep.values):
        tab.row(*x, v, v - thr)
    props = built.properties
    tab.note("p", bar.p)
    tab.note("r0", bar.r0)
    tab.note("min_L_phi", rep.min_value)
    tab.note("value_at_x0", props.value_at_x0)
    tab.note("min_on_shell", props.min_on_shell)
    tab.note("min_on_collar", props.min_on_closure)
    tab.note("ray_constant_C", props.ray_constant)
    tab.note("status", "pass" if rep.passed else "fail")
    return EXIT_OK if rep.passed else EXIT_CERT


def _read_table(path: str):
    cols, rows = None, []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# columns ="):
                cols = [c.strip() for c in line.split("=", 1)[1].split(",")]
            elif line and not line.startswith("#"):
                rows.append(line.split(","))
    if cols is None or not {"u", "d"} <= set(cols):
        raise ConfigError([f"{path}: not a solve output (needs columns u and d)"])
    iu, idd = cols.index("u"), cols.index("d")
    data = np.array([[float(r[idd]), float(r[iu])] for r in rows if float(r[idd]) > 0])
    return data[:, 0], data[:, 1]


def cmd_analyze(cfg: RunConfig, tab: Table) -> int:
    from .analysis import (Profile, fit_boundary_expansion, liouville_linearity_check, oscillation_contraction,
                           window_for)
    if cfg["input"]:
        d, u = _read_table(cfg["input"])
        order = np.argsort(d, kind="stable")
        d, u = d[order], u[order]
        lo, hi = (cfg["window"] or window_for(d.min(), d.max()))
        fn = None
    else:
        kind, p = cfg["profile"], float(cfg["p"])
        fn = {"torsion": lambda x: x * (1.0 - x) / 2.0, "linear": lambda x: x,
              "power": lambda x: x + x**p}[kind]
        lo, hi = (cfg["window"] or [1e-3, 0.125])
        d = np.geomspace(lo, hi, 32)
        u = fn(d)
    tab.columns(["quantity", "value"])
    modes = cfg["modes"]
    if "expansion" in modes:
        keep = (d >= lo) & (d <= hi)
        r = fit_boundary_expansion(Profile(d[keep], u[keep] / d[keep]))
        tab.row("c0", r.c0)
        tab.row("alpha_hat", "unavailable" if r.alpha_hat is None else r.alpha_hat)
        tab.row("K", r.K)
        tab.row("fit_residual", r.fit_residual)
        tab.row("window_lo", r.window[0])
        tab.row("window_hi", r.window[1])
        for k, v in r.annotations.items():
            tab.row(f"annotation {k}", v)
    if "oscillation" in modes:
        osc = oscillation_contraction(fn, int(cfg["levels"]), samples=None if fn else (d, u))
        for k, m, M in zip(osc.levels, osc.m, osc.M):
            tab.row(f"m_{k}", m)
            tab.row(f"M_{k}", M)
        for k, rt in zip(osc.levels[1:], osc.ratios):
            tab.row(f"ratio_{k}", rt)
        tab.row("max_ratio", osc.max_ratio)
    if "liouville" in modes:
        lin = liouville_linearity_check(d, u)
        tab.row("linear_c0", lin.c0)
        tab.row("linear_deviation", lin.deviation)
    return EXIT_OK


def cmd_selftest(cfg: RunConfig, tab: Table) -> int:
    from .selftest import run_suite
    checks = run_suite()
    tab.columns(["item", "defect", "tolerance", "status"])
    for c in checks:
        tab.row(c.name, format(c.defect, ".3e"), format(c.tolerance, ".0e"), c.passed)
    ok = all(c.passed for c in checks)
    tab.note("status", "pass" if ok else "fail")
    return EXIT_OK if ok else EXIT_CERT


COMMANDS: Dict[str, Callable[[RunConfig, Table], int]] = {
    "special": cmd_special, "apply": cmd_apply, "solve": cmd_solve, "mc": cmd_mc,
    "barrier": cmd_barrier, "analyze": cmd_analyze, "selftest": cmd_selftest,
}


def run(cfg: RunConfig, out) -> int:
    from .solver import SolverError
    buf = io.StringIO()
    try:
        code = COMMANDS[cfg.subcommand](cfg, Table(buf, cfg))
    except ConfigError:
        raise
    except (QuadratureError, SolverError) as exc:
        out.write(buf.getvalue())
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (DomainError, ValueError, KeyError) as exc:
        sys.stderr.write(f"precondition failed: {exc}\n")
        return EXIT_CONFIG
    out.write(buf.getvalue())
    return code


def _parser():
    ap = argparse.ArgumentParser(prog="censored-lab", description=__doc__.split("\n")[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("config", nargs="?", help="config file of key = value lines ('-' for stdin)")
    ap.add_argument("--workers", type=int, help="override the workers knob")
    ap.add_argument("--output", "-o", help="write the table here instead of stdout")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.config is None:
        text = ""
    elif args.config == "-":
        text = sys.stdin.read()
    else:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            sys.stderr.write(f"config error: {exc}\n")
            return EXIT_CONFIG
    try:
        if args.subcommand != "selftest" and not text.strip():
            raise ConfigError(["empty config"])
        cfg = parse_config(text, args.subcommand)
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError([f"--workers must be >= 1, got {args.workers}"])
            cfg.values["workers"] = args.workers
    except ConfigError as exc:
        for v in exc.violations:
            sys.stderr.write(f"config error: {v}\n")
        return EXIT_CONFIG
    if args.output:
        with open(args.output, "w") as fh:
            return run(cfg, fh)
    return run(cfg, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
