"""``metrize`` command-line front end.

Exit codes: 0 pass, 1 a check failed, 2 input/config error, 3 numerically
inconclusive (quadrature failure, singular metric, point outside the chart).
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time

from .calculus import ConnectionField, MetricField
from .config import SHORTHAND_4D, RunConfig, load_config
from .errors import ConfigError, DegenerateProfile, DomainError, MetrizeError, NoConvergence, NonInvertible, SingularMetric
from .identities import run_all
from .metrizability import (
    NotInFamily,
    Profile3D,
    Profile4D,
    Residual,
    Status,
    Verdict,
    check_grid,
    classify_connection_3d,
    classify_connection_4d,
    invariance_residual,
    killing_residual,
    metric_profile_table,
    metrizability_check_3d,
    metrizability_check_4d,
    metrizable_connection_3d,
    metrizable_connection_4d,
    reconstruct_metric_3d,
    reconstruct_metric_4d,
    verify_levi_civita,
)
from .report import Check, Report, csv_table
from .so3 import PROFILE_4D_NAMES, generators, make_invariant_metric_3d, make_invariant_metric_4d

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_INCONCLUSIVE = 0, 1, 2, 3
COMMANDS = ("invariance", "killing", "metrizable", "reconstruct", "identities")
U64 = 2**64


# --------------------------------------------------------------------------
# Building objects from a config
# --------------------------------------------------------------------------

def _require_kind(cfg: RunConfig, kinds, command: str) -> None:
    if cfg.kind not in kinds:
        raise ConfigError("[input] kind", f"{command} needs kind {' or '.join(kinds)}, got {cfg.kind}")


def _require_signature(cfg: RunConfig):
    if cfg.dimension == 4 and cfg.signature is None:
        raise ConfigError("[input] signature", "dimension 4 needs signature = riemann or lorentz")
    return cfg.signature


def _constant(cfg: RunConfig, name: str) -> float:
    if name not in cfg.constants:
        raise ConfigError(f"[constants] {name}", "missing")
    return cfg.constants[name]


def _uses_shorthand(cfg: RunConfig) -> bool:
    return cfg.dimension == 4 and any(cfg.has(k) for k in SHORTHAND_4D)


def _profiles_3d(cfg: RunConfig) -> Profile3D:
    return Profile3D(cfg.expr("A111"), cfg.expr("A122"), cfg.expr("A212"), cfg.expr("A"), cfg.chart)


def _profiles_4d(cfg: RunConfig) -> Profile4D:
    return Profile4D({k: cfg.expr(k) for k in PROFILE_4D_NAMES}, cfg.chart)


def build_connection(cfg: RunConfig) -> ConnectionField:
    if cfg.kind == "connection-full":
        base = 1 if cfg.dimension == 3 else 0
        entries = {}
        for key in cfg.sources:
            i, jk = key[1:].split("_")
            entries[(int(i) - base, int(jk[0]) - base, int(jk[1]) - base)] = cfg.fields[key]
        return ConnectionField.from_entries(cfg.chart, entries)
    if cfg.dimension == 3:
        return _profiles_3d(cfg).connection()
    if _uses_shorthand(cfg):
        sig = _require_signature(cfg)
        ratio = _constant(cfg, "C2") / _constant(cfg, "C1")
        return metrizable_connection_4d(cfg.expr("A000"), cfg.expr("A111"), cfg.expr("A212"), ratio, sig,
                                        cfg.chart, cfg.grid.tolerances.quadrature)
    return _profiles_4d(cfg).connection()


def build_metric(cfg: RunConfig) -> MetricField:
    if cfg.dimension == 3:
        return make_invariant_metric_3d(cfg.expr("P"), cfg.expr("Q"), cfg.chart, cfg.grid)
    return make_invariant_metric_4d(cfg.expr("g_tt"), cfg.expr("g_tr"), cfg.expr("g_rr"), cfg.expr("Q"), cfg.chart, cfg.grid)


def _check(res: Residual, tol: float, name: str | None = None, detail: str = "") -> Check:
    return Check(name or res.name, res.value <= tol, res.value, tol, res.witness, res.component, res.generator, detail)


def _per_generator(fn, obj, cfg: RunConfig, label: str) -> list[Check]:
    tol = cfg.grid.tolerances.residual
    return [_check(fn(obj, cfg.grid, [gen]), tol, f"{label} ({gen.name})") for gen in generators(cfg.chart)]


def _verdict_dict(v: Verdict) -> dict:
    return {
        "status": v.status.value,
        "violated_conditions": [
            {"condition": x.condition, "residual": x.residual, "witness": list(x.witness) if x.witness else None}
            for x in v.violated_conditions
        ],
        "constants": dict(v.constants),
        "ratio_residual": v.ratio_residual,
        "note": v.note,
    }


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

def cmd_invariance(cfg: RunConfig, report: Report) -> None:
    _require_kind(cfg, ("connection-family", "connection-full"), "invariance")
    conn = build_connection(cfg)
    check_grid(cfg.grid, cfg.chart)
    report.checks.extend(_per_generator(invariance_residual, conn, cfg, "invariance"))


def cmd_killing(cfg: RunConfig, report: Report) -> None:
    _require_kind(cfg, ("metric",), "killing")
    g = build_metric(cfg)
    check_grid(cfg.grid, cfg.chart)
    report.checks.extend(_per_generator(killing_residual, g, cfg, "killing"))


def cmd_metrizable(cfg: RunConfig, report: Report) -> None:
    _require_kind(cfg, ("connection-family", "connection-full"), "metrizable")
    sig = _require_signature(cfg)
    check_grid(cfg.grid, cfg.chart)
    tol = cfg.grid.tolerances
    if cfg.kind == "connection-full" or _uses_shorthand(cfg):
        conn = build_connection(cfg)
        classify = classify_connection_3d if cfg.dimension == 3 else classify_connection_4d
        profiles = classify(conn, cfg.grid)
        if isinstance(profiles, NotInFamily):
            report.checks.append(_check(profiles.residual, tol.residual, "classification"))
            return
        report.checks.append(Check("classification", True, 0.0, tol.residual, detail="in the invariant family"))
    else:
        profiles = _profiles_3d(cfg) if cfg.dimension == 3 else _profiles_4d(cfg)
    if cfg.dimension == 3:
        verdict = metrizability_check_3d(profiles, cfg.grid)
    else:
        verdict = metrizability_check_4d(profiles, cfg.grid, sig)
    report.verdict = _verdict_dict(verdict)
    anchor = next((c for c in verdict.constants.values() if c is not None), None)
    if verdict.violated_conditions:
        worst = max(v.residual for v in verdict.violated_conditions)
        limit = tol.residual
    else:
        worst = verdict.ratio_residual or 0.0
        limit = tol.ratio * max(1.0, abs(anchor)) if anchor is not None else tol.residual
    report.checks.append(Check("metrizability", verdict.metrizable, worst, limit,
                               detail=verdict.note or ", ".join(v.condition for v in verdict.violated_conditions)))


def cmd_reconstruct(cfg: RunConfig, report: Report) -> None:
    _require_kind(cfg, ("connection-family",), "reconstruct")
    sig = _require_signature(cfg)
    tol = cfg.grid.tolerances
    if cfg.dimension == 3:
        K, L = _constant(cfg, "K"), _constant(cfg, "L")
        if K == 0 or L == 0:
            raise DegenerateProfile(f"K and L must be nonzero (K={K:g}, L={L:g})")
        check_grid(cfg.grid, cfg.chart)
        g = reconstruct_metric_3d(cfg.expr("A111"), cfg.expr("A212"), K, L, cfg.grid, cfg.chart)
        if cfg.has("A122") or cfg.has("A"):
            conn = build_connection(cfg)
        else:
            conn = metrizable_connection_3d(cfg.expr("A111"), cfg.expr("A212"), L / K, cfg.chart, tol.quadrature)
    else:
        C1, C2 = _constant(cfg, "C1"), _constant(cfg, "C2")
        if C1 == 0 or C2 == 0:
            raise DegenerateProfile(f"C1 and C2 must be nonzero (C1={C1:g}, C2={C2:g})")
        check_grid(cfg.grid, cfg.chart)
        if _uses_shorthand(cfg):
            a000, a111, a212 = cfg.expr("A000"), cfg.expr("A111"), cfg.expr("A212")
        else:
            a000, a111, a212 = cfg.expr("B000"), cfg.expr("B111"), cfg.expr("B122")
        g = reconstruct_metric_4d(a000, a111, a212, C1, C2, sig, cfg.grid, cfg.chart)
        conn = build_connection(cfg)
    header, rows = metric_profile_table(g, cfg.grid)
    report.table = csv_table(header, rows)
    report.checks.append(_check(verify_levi_civita(conn, g, cfg.grid), tol.residual))
    report.checks.append(_check(killing_residual(g, cfg.grid), tol.residual))


def cmd_identities(cfg: RunConfig | None, report: Report) -> None:
    for s in run_all(report.seed):
        report.checks.append(Check(s.name, s.passed, s.residual, s.tolerance, s.witness, detail=s.detail))


HANDLERS = {
    "invariance": cmd_invariance,
    "killing": cmd_killing,
    "metrizable": cmd_metrizable,
    "reconstruct": cmd_reconstruct,
    "identities": cmd_identities,
}


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < U64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metrize", description="Invariance and metrizability checks for rotation-symmetric connections.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="run configuration file (optional for identities)")
    p.add_argument("--report", help="write the machine-readable report here instead of standard output")
    p.add_argument("--seed", type=_seed, default=0, help="sampling seed for identities (unsigned 64-bit)")
    p.add_argument("--grid-override", action="append", default=[], metavar="k=v",
                   help="replace one grid axis, e.g. r=0.5,3,10 (repeatable)")
    return p


def run(argv=None) -> tuple[Report, int]:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    report = Report(args.command, hashlib.sha256(b"").hexdigest(), args.seed)
    try:
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config, args.grid_override)
            report.config_digest = cfg.digest
        elif args.command != "identities":
            raise ConfigError("--config", f"required for {args.command}")
        HANDLERS[args.command](cfg, report)
        ok = all(c.passed for c in report.checks)
        report.status, report.exit_code = ("pass", EXIT_PASS) if ok else ("fail", EXIT_FAIL)
    except (ConfigError, DegenerateProfile) as exc:
        report.status, report.exit_code, report.message = "error", EXIT_CONFIG, str(exc)
    except (NoConvergence, SingularMetric, NonInvertible, DomainError) as exc:
        report.status, report.exit_code = "inconclusive", EXIT_INCONCLUSIVE
        report.message = f"{type(exc).__name__}: {exc}"
        if args.command == "metrizable":
            report.verdict = {"status": Status.INCONCLUSIVE.value, "violated_conditions": [], "constants": {},
                              "ratio_residual": None, "note": report.message}
    except MetrizeError as exc:
        report.status, report.exit_code, report.message = "error", EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    report.duration = time.perf_counter() - started

    if report.exit_code == EXIT_CONFIG:
        sys.stderr.write(f"metrize: error: {report.message}\n")
    out = report.summary() + (report.table or "")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_text())
    else:
        out += report.to_text()
    sys.stdout.write(out)
    sys.stdout.flush()
    return report, report.exit_code


def main(argv=None) -> int:
    return run(argv)[1]


if __name__ == "__main__":
    sys.exit(main())
