"""Command-line front end.

    advmems COMMAND [--config PATH] [--set section.key=value ...] [--out DIR] [--seed INT]

Exit codes: 0 success, 1 usage or config error, 2 a mathematical check failed.
The thread count for the verify sweep comes from ADVMEMS_THREADS.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import ineq
from .config import Config, ConfigError, apply_override, from_dict
from .hodge import decompose, verify_decomposition
from .solver import continue_branch, fmt, newton_solve, shooting_oracle
from .spectral import attach_stability, is_semistable, linearized_stability

log = logging.getLogger("advmems")

COMMANDS = ("decompose", "solve", "branch", "eigen", "verify", "diagnose", "oracle")
SLACK_REL = 1e-8
ESTIMATE_REL = 1e-10


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="advmems", description="Advected MEMS model: branches, spectra and inequality checks.")
    p.add_argument("command", help=", ".join(COMMANDS))
    p.add_argument("--config", help="JSON config file (defaults if omitted)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override, e.g. --set grid.m=129 (repeatable)")
    p.add_argument("--out", help="output directory (overrides output.directory)")
    p.add_argument("--seed", type=int, help="seed for random test functions (overrides verify.seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def threads() -> int:
    raw = os.environ.get("ADVMEMS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError("ADVMEMS_THREADS", f"expected an integer, got {raw!r}") from None


def resolve_config(path, overrides=(), out=None, seed=None) -> Config:
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError("--config", str(e)) from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError("<parse>", f"{e.msg} at line {e.lineno}, column {e.colno}") from None
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    for a in overrides:
        apply_override(data, a)
    if out is not None:
        data.setdefault("output", {})["directory"] = out
    if seed is not None:
        data.setdefault("verify", {})["seed"] = seed
    return from_dict(data)


class Artifacts:
    """Writes artifacts tagged with the config hash; single writer per file."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.dir = Path(cfg.output.directory)
        self.hash = cfg.hash()
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "resolved-config.json").write_text(cfg.dumps(), encoding="utf-8")
        self.written: list[Path] = []

    def json(self, name: str, obj: dict) -> None:
        if "json" not in self.cfg.output.formats:
            return
        body = dict(obj, config_hash=self.hash)
        path = self.dir / name
        path.write_text(json.dumps(body, sort_keys=True, indent=2, default=_jsonable) + "\n", encoding="utf-8")
        self.written.append(path)

    def csv(self, name: str, text: str) -> None:
        if "csv" not in self.cfg.output.formats:
            return
        path = self.dir / name
        path.write_text(f"# config_hash={self.hash}\n" + text, encoding="utf-8")
        self.written.append(path)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x)}")


def _nodes_csv(g, columns: dict) -> str:
    coords = g.coords()
    names = ["node"] + list(coords) + list(columns)
    lines = [",".join(names)]
    cols = list(coords.values()) + list(columns.values())
    for i in range(g.size):
        lines.append(",".join([str(i)] + [fmt(col[i]) for col in cols]))
    return "\n".join(lines) + "\n"


def _branch(cfg: Config, g, c):
    s = cfg.solver
    return continue_branch(g, c, lam_step0=s.lam_step0, bracket_tol=s.bracket_tol, tol=s.newton_tol,
                           max_steps=s.max_steps)


# --------------------------------------------------------------------------
# commands; each returns True when every check passed


def cmd_decompose(cfg: Config, art: Artifacts) -> bool:
    g = cfg.build_grid()
    d = decompose(g, cfg.advection_field(g))
    checks = verify_decomposition(d)
    body = d.to_json()
    body["checks"] = [dataclasses.asdict(ch) for ch in checks]
    art.json("decomposition.json", body)
    for ch in checks:
        if not ch.passed:
            log.error("check %s failed: %.3e > %.3e", ch.name, ch.value, ch.threshold)
    return all(ch.passed for ch in checks)


def cmd_solve(cfg: Config, art: Artifacts) -> bool:
    g = cfg.build_grid()
    res = newton_solve(g, cfg.advection_field(g), cfg.solver.lam, tol=cfg.solver.newton_tol)
    if res.converged:
        art.csv("solution.csv", _nodes_csv(g, {"u": res.u.values}))
    art.json("solution.json", {"lambda": cfg.solver.lam, "converged": res.converged,
                               "iterations": res.iterations, "residual": res.residual,
                               "message": res.message,
                               "sup_u": float(res.u.values.max()) if res.converged else None})
    if not res.converged:
        log.error("check newton failed at solver.lam=%r: %s", cfg.solver.lam, res.message)
    return res.converged


def _stability_checks(b) -> dict:
    K = np.array([pt.K for pt in b.points])
    K0 = K[0]
    incr = float(np.max(np.diff(K))) if len(K) > 1 else 0.0
    return {
        "semistable": bool(all(is_semistable(k, K0) for k in K)),
        "K_nonincreasing": bool(incr <= 1e-8 * abs(K0)),
        "max_K_increment": incr,
        "K_last_over_K0": float(K[-1] / K0),
    }


def cmd_branch(cfg: Config, art: Artifacts) -> bool:
    g = cfg.build_grid()
    b = _branch(cfg, g, cfg.advection_field(g))
    attach_stability(b, cfg.spectral.eig_tol)
    checks = _stability_checks(b)
    art.csv("branch.csv", b.to_csv())
    art.json("lambda_star.json", {
        "bracket": list(b.bracket), "value": b.lam_star, "width": b.width,
        "relative_width": b.width / b.lam_star, "points": len(b.points),
        "sup_u_last": b.last.sup_u, "checks": checks,
    })
    ok = checks["semistable"] and checks["K_nonincreasing"]
    if not ok:
        log.error("check stability failed: %s", checks)
    return ok


def cmd_eigen(cfg: Config, art: Artifacts) -> bool:
    g = cfg.build_grid()
    c = cfg.advection_field(g)
    lam = cfg.spectral.lam
    res = newton_solve(g, c, lam, tol=cfg.solver.newton_tol)
    if not res.converged:
        log.error("check newton failed at spectral.lam=%r: %s", lam, res.message)
        return False
    ep = linearized_stability(g, c, res.u, lam, cfg.spectral.eig_tol)
    art.json("eigen.json", {"lambda": lam, "K": ep.K, "residual": ep.residual, "iterations": ep.iterations})
    art.csv("phi.csv", _nodes_csv(g, {"phi": ep.phi.values}))
    return True


def _row(beta, t, lam, check, lhs, rhs, slack, scaled, passed):
    return ["" if beta is None else fmt(beta), "" if t is None else fmt(t), fmt(lam), check, fmt(lhs), fmt(rhs), fmt(slack),
            fmt(scaled), str(bool(passed)).lower()]


def cmd_verify(cfg: Config, art: Artifacts) -> bool:
    g = cfg.build_grid()
    c = cfg.advection_field(g)
    v = cfg.verify
    d = decompose(g, c)
    b = _branch(cfg, g, c)
    psis = ineq.random_test_functions(g, v.psi_count, v.seed)
    rows = []

    for ch in verify_decomposition(d):
        rows.append(_row(None, None, 0.0, f"decomposition:{ch.name}", ch.value, ch.threshold,
                         ch.threshold - ch.value, ch.threshold - ch.value, ch.passed))

    phi0 = linearized_stability(g, c, np.zeros(g.size), 0.0, cfg.spectral.eig_tol).phi
    for beta in v.beta:
        rep = ineq.hardy_check(ineq.HardyProbe(d.alpha, phi0, beta, psis))
        s = rep.scaled_min()
        k = int(np.argmin(rep.slack / np.maximum(1.0, rep.lhs)))
        rows.append(_row(beta, None, 0.0, "hardy", rep.lhs[k], rep.rhs[k], rep.slack[k], s, s >= -SLACK_REL))

    n = len(b.points)
    picks = sorted({n // 4, n // 2, n - 1})
    for i in picks:
        pt = b.points[i]
        ep = linearized_stability(g, c, pt.u, pt.lam, cfg.spectral.eig_tol)
        rho = ineq.rho_of(pt.u.values, pt.lam, g)
        for beta in sorted(set(v.beta) | {2.0}):
            rep = ineq.energy_inequality_check(g, d, ep.phi, rho, beta, psis)
            s = rep.scaled_min()
            k = int(np.argmin(rep.slack / np.maximum(1.0, rep.lhs)))
            rows.append(_row(beta, None, pt.lam, "energy", rep.lhs[k], rep.rhs[k], rep.slack[k], s,
                             s >= -SLACK_REL))

    mid = b.points[n // 2]
    for beta in v.beta:
        for f in v.t_fractions:
            t = f * ineq.t_max(beta)
            H = ineq.flux_orthogonality_check(d, mid.u, t)
            rows.append(_row(beta, t, mid.lam, "flux_orthogonality", abs(H.value), H.bound,
                             H.bound - abs(H.value), (H.bound - abs(H.value)) / H.bound, H.passed))

    def sweep(pt):
        phi = linearized_stability(g, c, pt.u, pt.lam, cfg.spectral.eig_tol).phi
        out = []
        for beta in v.beta:
            for f in v.t_fractions:
                r = ineq.main_estimate_check(g, d, pt.u, pt.lam, beta, f * ineq.t_max(beta), phi=phi)
                scaled = r.slack / r.scale if r.scale > 0 else 0.0
                out.append(_row(beta, r.t, r.lam, "estimate", r.lhs, r.rhs, r.slack, scaled,
                                r.passed(ESTIMATE_REL)))
                cap = r.lambda_cap - r.lambda_sup
                out.append(_row(beta, r.t, r.lam, "lambda_cap", r.lambda_sup, r.lambda_cap, cap, cap,
                                cap >= -1e-10))
        return out

    with ThreadPoolExecutor(max_workers=threads()) as pool:
        for out in pool.map(sweep, b.points):
            rows.extend(out)

    header = "beta,t,lambda,check,lhs,rhs,slack,scaled_slack,passed"
    art.csv("verify.csv", "\n".join([header] + [",".join(r) for r in rows]) + "\n")
    summary = {}
    for r in rows:
        name = r[3]
        ent = summary.setdefault(name, {"min_scaled_slack": float("inf"), "passed": True, "rows": 0})
        ent["min_scaled_slack"] = min(ent["min_scaled_slack"], float(r[7]))
        ent["passed"] = ent["passed"] and r[8] == "true"
        ent["rows"] += 1
    ok = all(e["passed"] for e in summary.values())
    art.json("summary.json", {"checks": summary, "all_passed": ok, "branch_points": n,
                              "lambda_star": b.lam_star})
    for name, e in summary.items():
        if not e["passed"]:
            log.error("check %s failed (min scaled slack %.3e)", name, e["min_scaled_slack"])
    return ok


def cmd_diagnose(cfg: Config, art: Artifacts) -> bool:
    g = cfg.build_grid()
    b = _branch(cfg, g, cfg.advection_field(g))
    rep = ineq.regularity_diagnostic(b)
    body = rep.to_json()
    body.update(lambda_star=b.lam_star, bracket=list(b.bracket), sup_u_last=b.last.sup_u)
    art.json("regularity.json", body)
    return True


def cmd_oracle(cfg: Config, art: Artifacts) -> bool:
    g = cfg.grid
    comps = cfg.advection.components
    if g.kind == "rectangle":
        raise ConfigError("grid.kind", "the shooting oracle needs an interval or radial grid")
    if g.kind == "interval":
        grid = cfg.build_grid()
        lo, hi = grid.axes[0][0], grid.axes[0][-1]
        if comps and any(np.any(np.asarray(v) != 0) for v in [cfg.advection_field(grid)]):
            raise ConfigError("advection.components", "interval oracle is limited to c = 0 (symmetric problem)")
        N, radius, c_r = 1, (hi - lo) / 2, None
    else:
        N, radius, c_r = g.N, 1.0, (comps[0] if comps else None)
    res = shooting_oracle(N, c_r, cfg.oracle.eta_grid, radius, cfg.oracle.max_step)
    art.csv("oracle.csv", res.to_csv())
    art.json("lambda_star_oracle.json", {"lambda_star": res.lam_star, "eta_star": res.eta_star,
                                         "N": res.N, "radius": res.radius})
    return True


HANDLERS = {
    "decompose": cmd_decompose, "solve": cmd_solve, "branch": cmd_branch, "eigen": cmd_eigen,
    "verify": cmd_verify, "diagnose": cmd_diagnose, "oracle": cmd_oracle,
}


def run(command: str, config_path=None, overrides=(), out=None, seed=None) -> int:
    if command not in HANDLERS:
        print(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}", file=sys.stderr)
        print(build_parser().format_usage(), file=sys.stderr, end="")
        return 1
    try:
        cfg = resolve_config(config_path, overrides, out, seed)
        threads()
        art = Artifacts(cfg)
        ok = HANDLERS[command](cfg, art)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, ValueError) as e:
        print(f"check failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0 if ok else 2


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(parser.format_usage() + f"advmems: error: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.command, args.config, args.set, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
