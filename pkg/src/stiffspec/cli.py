"""Command-line front end: ``stiffspec {solve,limit,expand,verify,demo}``."""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .coeffs import ParseError, ProblemError, ProblemSpec, make_problem
from .expand import MAX_ORDER, Branch, expand
from .limit import Kind, limit_spectrum
from .ode import IntegrationError, SolvabilityError
from .perturbed import EigenError, eigenfunction, eigenvalues
from . import verify as V

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
STUDIES = ("orders", "residuals", "containment", "bounds", "angle", "projector", "eigenfunctions",
           "h2", "series")
FMT = "%.17g"


class ConfigError(ValueError):
    pass


def _quote(s: str) -> str:
    return '"' + s.replace('"', "") + '"'


def _unquote(s: str) -> str:
    s = s.strip()
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "\"'":
        return s[1:-1]
    return s


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


@dataclass
class RunConfig:
    a: float = -1.0
    b: float = 2.0
    k: str = "1"
    r: str = "1"
    kappa: str = "1"
    rho: str = "1"
    eps: list[float] = field(default_factory=lambda: V.default_eps_grid())
    count: int = 4
    order: int = 3
    tol: float = 1e-12
    slope_tol: float = V.SLOPE_TOL
    jmax: int = 6
    studies: list[str] = field(default_factory=lambda: list(STUDIES))
    modes: list[int] = field(default_factory=list)
    out: str = "out"
    format: str = "csv"
    plots: bool = True
    nu1_offset: float = 0.0

    def problem(self) -> ProblemSpec:
        return make_problem(self.a, self.b, self.k, self.r, self.kappa, self.rho)

    def to_string(self) -> str:
        lines = [
            "[problem]",
            f"a = {self.a!r}",
            f"b = {self.b!r}",
            f"k = {_quote(self.k)}",
            f"r = {_quote(self.r)}",
            f"kappa = {_quote(self.kappa)}",
            f"rho = {_quote(self.rho)}",
            "",
            "[run]",
            "eps = " + ", ".join(repr(e) for e in self.eps),
            f"count = {self.count}",
            f"order = {self.order}",
            f"tol = {self.tol!r}",
            f"slope_tol = {self.slope_tol!r}",
            f"jmax = {self.jmax}",
            "studies = " + ", ".join(self.studies),
            "modes = " + ", ".join(str(m) for m in self.modes),
            "",
            "[output]",
            f"dir = {self.out}",
            f"format = {self.format}",
            f"plots = {'true' if self.plots else 'false'}",
            "",
            "[fault]",
            f"nu1_offset = {self.nu1_offset!r}",
            "",
        ]
        return "\n".join(lines)

    @classmethod
    def from_string(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        cfg = cls()
        try:
            if cp.has_section("problem"):
                s = cp["problem"]
                cfg.a = float(s.get("a", cfg.a))
                cfg.b = float(s.get("b", cfg.b))
                for key in ("k", "r", "kappa", "rho"):
                    if key in s:
                        setattr(cfg, key, _unquote(s[key]))
            if cp.has_section("run"):
                s = cp["run"]
                if "eps" in s:
                    cfg.eps = _floats(s["eps"])
                cfg.count = int(s.get("count", cfg.count))
                cfg.order = int(s.get("order", cfg.order))
                cfg.tol = float(s.get("tol", cfg.tol))
                cfg.slope_tol = float(s.get("slope_tol", cfg.slope_tol))
                cfg.jmax = int(s.get("jmax", cfg.jmax))
                if "studies" in s:
                    cfg.studies = [x.strip() for x in s["studies"].split(",") if x.strip()]
                if "modes" in s:
                    cfg.modes = _ints(s["modes"])
            if cp.has_section("output"):
                s = cp["output"]
                cfg.out = s.get("dir", cfg.out)
                cfg.format = s.get("format", cfg.format)
                cfg.plots = s.getboolean("plots", cfg.plots)
            if cp.has_section("fault"):
                cfg.nu1_offset = float(cp["fault"].get("nu1_offset", cfg.nu1_offset))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            return cls.from_string(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc

    def validate(self):
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if self.order < 0:
            raise ConfigError("order must be >= 0")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        bad = [s for s in self.studies if s not in STUDIES]
        if bad:
            raise ConfigError(f"unknown studies: {', '.join(bad)}")
        if not self.eps or any(not (0 < e <= 1) for e in self.eps):
            raise ConfigError("eps values must lie in (0, 1]")

    def digest(self) -> str:
        """sha256 of the canonical config; the output directory does not enter."""
        return hashlib.sha256(replace(self, out="").to_string().encode()).hexdigest()


# ---------------------------------------------------------------- writers

def _header(cfg: RunConfig, what: str) -> list[str]:
    return [f"# stiffspec {what}", f"# config_sha256 = {cfg.digest()}",
            f"# tol = {cfg.tol!r}", f"# slope_tol = {cfg.slope_tol!r}"]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return FMT % v
    if v is None:
        return ""
    return str(v)


def write_table(cfg: RunConfig, out: Path, stem: str, columns: list[str], rows: list[list], what: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "json":
        path = out / f"{stem}.json"
        doc = {"meta": {"command": what, "config_sha256": cfg.digest(), "tol": cfg.tol,
                        "slope_tol": cfg.slope_tol},
               "columns": columns, "rows": [[_jsonable(v) for v in r] for r in rows]}
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return path
    path = out / f"{stem}.csv"
    buf = io.StringIO()
    buf.write("\n".join(_header(cfg, what)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())
    return path


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


def write_json(cfg: RunConfig, out: Path, name: str, doc: dict, what: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    doc = {"meta": {"command": what, "config_sha256": cfg.digest(), "tol": cfg.tol, "slope_tol": cfg.slope_tol},
           **doc}
    path = out / name
    path.write_text(json.dumps(_jsonable(doc), indent=1, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------- commands

def cmd_solve(cfg: RunConfig, functions: bool = False) -> int:
    p = cfg.problem()
    out = Path(cfg.out)
    rows = []
    samples = []
    for e in cfg.eps:
        for pair in eigenvalues(p, e, cfg.count):
            rows.append([pair.j, e, pair.lam, pair.mu])
            if functions:
                full = eigenfunction(p, e, pair, cfg.tol)
                for x in np.linspace(p.a, 0.0, 41):
                    samples.append([pair.j, e, float(x), full.left(x)])
                for x in np.linspace(0.0, p.b, 81)[1:]:
                    samples.append([pair.j, e, float(x), full.right(x)])
    path = write_table(cfg, out, "eigenvalues", ["j", "eps", "lambda", "mu"], rows, "solve")
    print(f"wrote {path}")
    if functions:
        path = write_table(cfg, out, "eigenfunctions", ["j", "eps", "x", "u"], samples, "solve")
        print(f"wrote {path}")
    return EXIT_OK


def cmd_limit(cfg: RunConfig) -> int:
    p = cfg.problem()
    spec = limit_spectrum(p, count=cfg.count)
    rows = [[i, m.mu, m.kind.value, m.omega if m.kind is Kind.Double else None, m.exact]
            for i, m in enumerate(spec, start=1)]
    path = write_table(cfg, Path(cfg.out), "limit_spectrum", ["index", "mu", "kind", "omega", "exact"], rows,
                       "limit")
    print(f"wrote {path}")
    return EXIT_OK


def _sample_trace(t, points=33):
    x = np.linspace(t.lo, t.hi, points)
    return {"x": [float(v) for v in x], "u": [float(v) for v in t(x)]}


def _clamped_order(cfg: RunConfig) -> int:
    if cfg.order > MAX_ORDER:
        print(f"warning: order {cfg.order} clamped to {MAX_ORDER}", file=sys.stderr)
        return MAX_ORDER
    return cfg.order


def _modes(cfg: RunConfig, p: ProblemSpec):
    spec = limit_spectrum(p, count=cfg.count, functions=False)
    distinct = spec.distinct()
    if cfg.modes:
        keep = set(cfg.modes)
        distinct = [(i, m) for i, m in distinct if i in keep or (m.kind is Kind.Double and i + 1 in keep)]
    return distinct


def _offset(cfg):
    return {1: cfg.nu1_offset} if cfg.nu1_offset else None


def cmd_expand(cfg: RunConfig) -> int:
    p = cfg.problem()
    n = _clamped_order(cfg)
    entries = []
    for index, _ in _modes(cfg, p):
        mode, _ = V.locate(p, index)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            series = expand(p, mode, n, tol=cfg.tol, nu_offset=_offset(cfg))
        for s in series:
            entries.append({
                "slot": V.slot_of(p, index, s.branch),
                "mu": mode.mu,
                "kind": mode.kind.value,
                "branch": s.branch.value,
                "order": s.order,
                "power": "sqrt(eps)" if s.half_power else "eps",
                "nu": list(s.nu),
                "exact_flag": s.exact_flag,
                "omega": mode.omega,
                "left_coeffs": [_sample_trace(t) for t in s.left_coeffs],
                "right_coeffs": [_sample_trace(t) for t in s.right_coeffs],
            })
    path = write_json(cfg, Path(cfg.out), "series.json", {"order": n, "series": entries}, "expand")
    print(f"wrote {path}")
    return EXIT_OK


def run_verify(cfg: RunConfig) -> dict:
    """Run the selected studies; returns the report document with an overall pass flag."""
    p = cfg.problem()
    n = _clamped_order(cfg)
    eps = cfg.eps
    modes = _modes(cfg, p)
    doc = {"reports": [], "checks": [], "containment": [], "bounds": [], "h2": []}
    failures = []
    saved, V.SLOPE_TOL = V.SLOPE_TOL, cfg.slope_tol

    def add(rep: V.ConvergenceReport, group: str):
        d = rep.to_dict()
        d["group"] = group
        doc["reports"].append(d)
        if not rep.passed:
            failures.append(rep.quantity)

    def check(name, value, limit, ok=None):
        ok = value <= limit if ok is None else ok
        doc["checks"].append({"name": name, "value": value, "limit": limit, "passed": bool(ok)})
        if not ok:
            failures.append(name)

    off = _offset(cfg)
    try:
        if off:
            for index, m in modes:
                mode, _ = V.locate(p, index)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    expand(p, mode, max(n, 1), nu_offset=off)
        if "series" in cfg.studies:
            for index, m in modes:
                ser = V.series_for(p, index, n)
                if m.kind is Kind.Double:
                    check(f"sign law slot {index}", V.sign_law(ser[Branch.Plus], ser[Branch.Minus]), 1e-9)
                    check(f"solvability slot {index}",
                          max(max(s.solvability, default=0.0) for s in ser.values()), 1e-8)
                else:
                    s = ser[Branch.Single]
                    check(f"nu recomputation slot {index}", V.series_consistency(p, s), 1e-9)
                    check(f"solvability slot {index}", max(s.solvability, default=0.0), 1e-8)
        if "orders" in cfg.studies:
            for index, _ in modes:
                for k in range(0, n + 1):
                    for rep in V.order_study(p, index, k, eps):
                        add(rep, "orders")
        if "residuals" in cfg.studies:
            for index, _ in modes:
                for k in range(0, n + 1):
                    for rep in V.residual_study(p, index, k, eps):
                        add(rep, "residuals")
        if "eigenfunctions" in cfg.studies:
            for index, _ in modes:
                for rep in V.eigenfunction_error_study(p, index, min(n, 1), eps):
                    add(rep, "eigenfunctions")
        if "containment" in cfg.studies:
            rows = V.containment_study(p, eps, orders=tuple(range(0, min(n, 3) + 1)), count=cfg.count)
            doc["containment"] = [vars(c) for c in rows]
            bad = sum(not c.ok for c in rows)
            check("containment violations", float(bad), 0.0)
        if "bounds" in cfg.studies:
            ok, rows = V.bounds_check(p, eps, cfg.jmax)
            doc["bounds"] = [vars(r) for r in rows]
            check("bounds violations", float(sum(not r.ok for r in rows)), 0.0)
        has_double = any(m.kind is Kind.Double for _, m in modes)
        if "angle" in cfg.studies and has_double:
            add(V.angle_study(p, eps), "angle")
        if "projector" in cfg.studies and has_double:
            add(V.projector_study(p, eps), "projector")
        if "h2" in cfg.studies:
            for index, m in modes:
                if m.kind is not Kind.Double:
                    h = V.h2_study(p, index, eps)
                    doc["h2"].append(h)
                    if not h["passed"]:
                        failures.append(f"h2 slot {index}")
    except SolvabilityError as exc:
        failures.append(f"solvability: {exc}")
        doc["error"] = str(exc)
    finally:
        V.SLOPE_TOL = saved
    doc["failures"] = failures
    doc["passed"] = not failures
    return doc


def _plot_data(doc: dict) -> dict:
    from .plotting import fitted_line

    series = []
    for r in doc["reports"]:
        item = {"quantity": r["quantity"], "eps": r["eps_grid"], "errors": r["errors"],
                "slope": r["fitted_slope"], "expected": r["expected_slope"]}
        if r["fitted_slope"] is not None and min(r["errors"]) > 0:
            item["fit"] = fitted_line(r["eps_grid"], r["errors"], r["fitted_slope"])
        series.append(item)
    return {"series": series}


def _render(cfg: RunConfig, doc: dict, out: Path):
    from .plotting import plot_reports

    groups = {}
    for r in doc["reports"]:
        groups.setdefault(r["group"], []).append(V.ConvergenceReport(**{k: v for k, v in r.items() if k != "group"}))
    paths = []
    for g, reps in sorted(groups.items()):
        paths.append(plot_reports(reps, out / f"{g}.png", title=g))
    return paths


def cmd_verify(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    doc = run_verify(cfg)
    path = write_json(cfg, out, "report.json", doc, "verify")
    print(f"wrote {path}")
    rows = [[r["quantity"], e, err, r["fitted_slope"], r["expected_slope"], r["passed"]]
            for r in doc["reports"] for e, err in zip(r["eps_grid"], r["errors"])]
    write_table(cfg, out, "convergence", ["quantity", "eps", "error", "fitted_slope", "expected_slope", "passed"],
                rows, "verify")
    write_json(cfg, out, "plot_data.json", _plot_data(doc), "verify")
    if cfg.plots:
        for pth in _render(cfg, doc, out):
            print(f"wrote {pth}")
    for r in doc["reports"]:
        s = "n/a" if r["fitted_slope"] is None else f"{r['fitted_slope']:.3f}"
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['quantity']}: slope {s} (expected {r['expected_slope']})")
    for c in doc["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']:.3e} (limit {c['limit']:.1e})")
    for h in doc["h2"]:
        print(f"{'PASS' if h['passed'] else 'FAIL'}  H2 error slot {h['slot']}: left {h['left'][-1]:.3e}, "
              f"right {h['right'][-1]:.3e}")
    if doc.get("error"):
        print(f"FAIL  {doc['error']}")
    return EXIT_OK if doc["passed"] else EXIT_FAIL


def cmd_demo(cfg: RunConfig) -> int:
    cfg = replace(cfg, a=-1.0, b=2.0, k="1", r="1", kappa="1", rho="1")
    for fn in (cmd_solve, cmd_limit, cmd_expand):
        fn(cfg)
    return cmd_verify(cfg)


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stiffspec", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("solve", "eigenvalues at fixed eps"), ("limit", "limit spectrum and Jordan data"),
                        ("expand", "asymptotic series"), ("verify", "convergence and residual studies"),
                        ("demo", "all of the above on the constant-coefficient example")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--eps", help="comma-separated eps values")
        sp.add_argument("--count", type=int, help="number of eigenvalues / limit slots")
        sp.add_argument("--order", type=int, help="expansion order")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--format", choices=("csv", "json"), help="table format")
        if name == "solve":
            sp.add_argument("--functions", action="store_true", help="also write sampled eigenfunctions")
        if name in ("verify", "demo"):
            sp.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    return ap


def load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.eps:
        cfg.eps = _floats(args.eps)
    if args.count is not None:
        cfg.count = args.count
    if args.order is not None:
        cfg.order = args.order
    if args.out:
        cfg.out = args.out
    if args.format:
        cfg.format = args.format
    if getattr(args, "no_plots", False):
        cfg.plots = False
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "solve":
            return cmd_solve(cfg, functions=args.functions)
        return {"limit": cmd_limit, "expand": cmd_expand, "verify": cmd_verify, "demo": cmd_demo}[args.command](cfg)
    except ParseError as exc:
        print(f"error: coefficient parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ProblemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, EigenError, SolvabilityError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
