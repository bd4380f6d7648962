"""``fhj <command> --config <file> [--out <dir>] [--override key=value ...]``

Exit status 0 on success, 2 when the configuration or the problem fails
validation, 3 on numerical failure.  A failed run leaves no artifacts.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .analysis import RateFitError, fit_boundary_rate, verify_family
from .barriers import barrier_pair, verify_barrier
from .config import ConfigError, ExperimentConfig
from .constants import CaseMismatchError, c_curve, c_operator, default_tau_grid
from .core import DomainError, exterior_mass, lambda0, validate_problem
from .fracop import QuadratureError
from .io import write_csv
from .solver.discretize import Discretization
from .solver.perron import BracketError, PerronSchedule, perron_solve
from .solver.scheme import ConvergenceError, DiscreteProblem, solve_bounded

COMMANDS = ("ctau", "lambda0", "expansion", "barrier", "solve", "family", "rates", "validate")
EXPANSION_TAUS = (-0.8, -0.4, 0.3, 1.2)


class InvalidProblem(Exception):
    """Maps to exit status 2."""


class NumericalFailure(Exception):
    """Maps to exit status 3."""


class Artifacts:
    """Files written by one run, removed again if the run fails."""

    def __init__(self, out: Path, meta: dict):
        self.out = out
        self.meta = meta
        self.written: list[Path] = []
        self.dirs: list[Path] = []

    def _dir(self, sub: str | None) -> Path:
        d = self.out if sub is None else self.out / sub
        missing = [q for q in (d, *d.parents) if not q.exists()]
        for q in reversed(missing):
            q.mkdir()
            self.dirs.append(q)
        return d

    def csv(self, name: str, columns: dict, extra: dict | None = None, sub: str | None = None) -> Path:
        meta = dict(self.meta)
        meta.update(extra or {})
        path = write_csv(self._dir(sub) / name, columns, meta)
        self.written.append(path)
        return path

    def text(self, name: str, lines: list[str]) -> Path:
        path = self._dir(None) / name
        head = [f"# {k} = {v}" for k, v in self.meta.items()]
        path.write_text("\n".join(head + lines) + "\n", encoding="utf-8")
        self.written.append(path)
        return path

    def discard(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)
        for d in reversed(self.dirs):
            if d.exists() and not any(d.iterdir()):
                d.rmdir()


def _validated(cfg: ExperimentConfig):
    spec = cfg.spec()
    report = validate_problem(spec)
    if not report.valid:
        raise InvalidProblem("; ".join(f"{c.name}: {c.detail}" for c in report.failed()))
    return spec, report


def _case(cfg: ExperimentConfig, report) -> str:
    case = cfg["case"]
    if case == "auto":
        if not report.cases:
            raise InvalidProblem("no blow-up construction applies to (s, p)")
        return report.cases[-1]
    if case not in report.cases:
        raise InvalidProblem(f"case {case} does not apply to (s, p); applicable: "
                             f"{', '.join(report.cases) or 'none'}")
    return case


def _schedule(cfg: ExperimentConfig) -> PerronSchedule:
    return PerronSchedule.geometric(cfg["perron.n_first"], cfg["perron.n_last"],
                                    cfg["perron.per_decade"])


def cmd_ctau(cfg, art):
    s = cfg["s"]
    op = cfg.operator()
    curve = c_curve(s, op, default_tau_grid(s, 200))
    zeros = curve.zeros()
    art.csv("ctau.csv", {"tau": curve.tau_nodes, "c": curve.values, "err": curve.errors},
            {"zeros": ",".join(repr(z) for z in zeros)})
    return [f"zeros of c: {', '.join(f'{z:.8f}' for z in zeros)}"]


def cmd_lambda0(cfg, art):
    cfg.spec()
    dom, op = cfg.domain(), cfg.operator()
    lam0 = lambda0(op, dom)
    x = dom.nodes()
    art.csv("lambda0.csv", {"x": x, "exterior_mass": exterior_mass(op, dom, x)},
            {"lambda0": repr(lam0)})
    return [f"lambda0 = {lam0:.12g}"]


def cmd_expansion(cfg, art):
    from .barriers import expansion_probe

    s, op, dom = cfg["s"], cfg.operator(), cfg.domain()
    taus = [t for t in EXPANSION_TAUS if -1.0 < t < 2.0 * s]
    rows = {k: [] for k in ("tau", "c", "c_fit", "remainder_order", "r_squared")}
    for tau in taus:
        fit = expansion_probe(op, tau, dom)
        for k, v in zip(rows, (tau, c_operator(op, tau).value, fit.measured_c,
                               fit.remainder_order, fit.r_squared)):
            rows[k].append(v)
    art.csv("expansion.csv", rows)
    return [f"tau={t:+.2f} c={c:.8g} fitted={f:.8g} order={o:.3f}"
            for t, c, f, o in zip(rows["tau"], rows["c"], rows["c_fit"], rows["remainder_order"])]


def cmd_barrier(cfg, art):
    spec, report = _validated(cfg)
    case = _case(cfg, report)
    t = cfg["t"][0] if case == "family" else None
    sub, sup = barrier_pair(case, spec, t)
    d_eps = min(b.d_eps for b in (sub, sup))
    lines = [f"case {case}: sub shift {sub.shift:g}, super shift {sup.shift:g}, d_eps {d_eps:.4g}"]
    ok = True
    for b in (sub, sup):
        rep = verify_barrier(b, spec, (1e-4, d_eps))
        tab = rep.table()
        art.csv(f"{b.case_label}_check.csv", {"x": tab[:, 0], "d": tab[:, 1], "residual": tab[:, 2],
                                               "margin": tab[:, 3], "passed": tab[:, 4]},
                {"terms": repr(b.terms), "shift": repr(b.shift), "d_eps": repr(b.d_eps)})
        ok &= rep.passed
        lines.append(f"{b.case_label}: {'PASS' if rep.passed else 'FAIL'} "
                     f"(worst margin {rep.worst.margin:.4g} at d={rep.worst.d:.4g})")
    d = np.geomspace(1e-6, 0.5 * spec.domain.diameter, 200)
    art.csv("barrier.csv", {"d": d, "sub": sub.values_at_distance(d), "super": sup.values_at_distance(d)})
    if not ok:
        raise NumericalFailure("barrier residual check failed")
    return lines


def cmd_solve(cfg, art):
    spec, _ = _validated(cfg)
    disc = Discretization.build(spec.operator, spec.domain)
    st = solve_bounded(spec, grid=disc, tol=cfg["tol"])
    r = DiscreteProblem.of(spec, disc).residual(st.values)
    art.csv("u.csv", {"x": disc.nodes, "u": st.values, "residual": r},
            {"iterations": st.iterations, "residual_norm": repr(st.residual_norm)})
    return [f"converged in {st.iterations} iterations, residual {st.residual_norm:.3g}"]


def _perron(cfg, art, spec, case, t, disc, tag):
    sub, sup = barrier_pair(case, spec, t)
    count = [0]

    def checkpoint(rec, u, r):
        count[0] += 1
        art.csv(f"{tag}_level_{count[0]:02d}.csv", {"x": disc.nodes, "u": u, "residual": r},
                {"n": repr(rec.n), "k": repr(rec.k), "iterations": rec.iterations}, sub="levels")

    return perron_solve(spec, sub, sup, _schedule(cfg), cfg["tol"], disc, on_level=checkpoint)


def cmd_family(cfg, art):
    spec, report = _validated(cfg)
    if "family" not in report.cases:
        raise InvalidProblem("the family construction does not apply to (s, p)")
    disc = Discretization.build(spec.operator, spec.domain)
    members = []
    for i, t in enumerate(cfg["t"]):
        st = _perron(cfg, art, spec, "family", t, disc, f"t{i}")
        members.append((t, st.grid))
    verdict = verify_family(members, spec.s, solved_distance=1.0 / cfg["perron.n_last"])
    cols = {"x": disc.nodes}
    for i, (t, g) in enumerate(members):
        cols[f"u{i}"] = g.values
    art.csv("family.csv", cols, {"t": ",".join(repr(t) for t, _ in members)})
    fits = verdict.fits
    art.csv("family_rates.csv", {"t": [t for t, _ in fits], "exponent": [f.exponent for _, f in fits],
                                 "coefficient": [f.coefficient for _, f in fits],
                                 "r_squared": [f.r_squared for _, f in fits]})
    lines = [f"t={t:g}: exponent {f.exponent:.4f}, coefficient {f.coefficient:.4f}" for t, f in fits]
    lines.append(f"ordered: {verdict.ordered}, rates: {verdict.rates_ok}")
    lines += verdict.messages
    if not verdict.passed:
        raise NumericalFailure("\n".join(lines))
    return lines


def cmd_rates(cfg, art):
    spec, report = _validated(cfg)
    case = _case(cfg, report)
    t = cfg["t"][0] if case == "family" else None
    disc = Discretization.build(spec.operator, spec.domain)
    st = _perron(cfg, art, spec, case, t, disc, case)
    fit = fit_boundary_rate(st.grid, solved_distance=st.info["solved_distance"])
    art.csv("rates.csv", {"x": disc.nodes, "d": disc.distances, "u": st.values},
            {"case": case, "exponent": repr(fit.exponent), "coefficient": repr(fit.coefficient),
             "r_squared": repr(fit.r_squared), "window": f"{fit.window[0]!r},{fit.window[1]!r}"})
    return [f"case {case}: u ~ {fit.coefficient:.6g} d^{fit.exponent:.5f} "
            f"(r2={fit.r_squared:.6f}, {fit.n_points} points)"]


def cmd_validate(cfg, art):
    report = validate_problem(cfg.spec())
    lines = report.lines()
    art.text("validate.txt", lines)
    if not report.valid:
        raise InvalidProblem("\n".join(lines))
    return lines


HANDLERS = {"ctau": cmd_ctau, "lambda0": cmd_lambda0, "expansion": cmd_expansion,
            "barrier": cmd_barrier, "solve": cmd_solve, "family": cmd_family,
            "rates": cmd_rates, "validate": cmd_validate}


def run_command(cmd: str, cfg: ExperimentConfig, out: str | Path | None = None) -> tuple[int, list[str]]:
    """Run one command; returns ``(exit status, report lines)``."""
    if cmd not in HANDLERS:
        return 2, [f"unknown command {cmd!r}"]
    out = Path(cfg["out.dir"] if out is None else out)
    art = Artifacts(out, cfg.metadata())
    try:
        return 0, HANDLERS[cmd](cfg, art)
    except (InvalidProblem, ConfigError, CaseMismatchError) as err:
        art.discard()
        return 2, [f"invalid: {err}"]
    except (NumericalFailure, ConvergenceError, BracketError, QuadratureError, RateFitError,
            DomainError, np.linalg.LinAlgError, FloatingPointError) as err:
        art.discard()
        return 3, [f"numerical failure: {err}"]
    except BaseException:
        art.discard()
        raise


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fhj", description="Large solutions of fractional Hamilton-Jacobi equations.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="key = value file")
    ap.add_argument("--out", help="artifact directory (overrides out.dir)")
    ap.add_argument("--override", nargs="+", action="extend", default=[], metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config, args.override)
    except (ConfigError, OSError) as err:
        print(f"invalid: {err}", file=sys.stderr)
        return 2
    status, lines = run_command(args.command, cfg, args.out)
    print("\n".join(lines), file=sys.stdout if status == 0 else sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
