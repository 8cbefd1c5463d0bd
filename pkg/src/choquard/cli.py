"""Command line entry point: ``choquard {validate,solve,verify,sweep}``.

Exit codes: 0 when the reports pass, 1 when a report fails, 2 when a stage
raises (bad config, undefined exponents, solver breakdown).
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _reduce
from .config import Config, ConfigError, load_config
from .energy import EnergyBreakdown, Problem
from .exponents import AssumptionReport, FieldError, OnePointField, validate_assumptions
from .expr import ExprError
from .mesh import Mesh, MeshError, build_mesh
from .solver import (
    ConstantsReport,
    SolverError,
    SolverParams,
    SolverReport,
    ball_minimize,
    estimate_constants,
    fit_power_law,
    lambda_threshold,
    mountain_pass,
)
from .verify import (
    TABLE_HEADER,
    VerificationReport,
    VerifyError,
    geometry_scan,
    verify_embedding,
    verify_hls,
    verify_kernel_split,
)
from .vxnorm import NormError, x0_norm

log = logging.getLogger("choquard")

COMMANDS = ("validate", "solve", "verify", "sweep")
DISTINCT_TOL = 1e-6
SLOPE_RTOL = 0.01
SWEEP_HEADER = "lambda,J_u1,J_u2,residual_u1,residual_u2,x0_norm_u1,x0_norm_u2,delta,distinct,ok"


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ConfigError, FieldError, ExprError, MeshError, NormError, SolverError, VerifyError, ValueError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class SolvePair:
    lam: float
    delta: float
    mp: SolverReport
    ball: SolverReport
    separation: float

    @property
    def distinct(self) -> bool:
        return self.separation > DISTINCT_TOL

    @property
    def ok(self) -> bool:
        return self.mp.converged and self.ball.converged and self.distinct

    def csv_row(self) -> str:
        vals = (
            self.lam,
            self.mp.final_energy.total,
            self.ball.final_energy.total,
            self.mp.residual,
            self.ball.residual,
            self.mp.x0_norm,
            self.ball.x0_norm,
            self.delta,
        )
        return ",".join(repr(float(v)) for v in vals) + f",{int(self.distinct)},{int(self.ok)}"


def solve_pair(cfg: Config, mesh: Mesh, lam: float, constants: ConstantsReport, prob: Optional[Problem] = None) -> SolvePair:
    """Mountain-pass solution and ball minimizer at one lambda."""
    prob = prob or Problem(cfg.fields, mesh)
    delta = constants.t0(lam)
    base = dataclasses.replace(cfg.solver, lam=lam, seed=cfg.seed)
    mp = _stage("solve:mountain_pass", mountain_pass, base, cfg.fields, mesh, prob)
    ball = _stage(
        "solve:ball_minimize", ball_minimize, dataclasses.replace(base, ball_radius=delta), cfg.fields, mesh, prob
    )
    sep = x0_norm(mp.final_u - ball.final_u, cfg.fields.s, cfg.fields.p, mesh)
    return SolvePair(lam, delta, mp, ball, sep)


class Runner:
    """Holds the mesh and sampled constants shared by the commands."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.mesh = _stage("mesh", build_mesh, cfg.domain, cfg.n, cfg.pad_factor)
        self._constants = None

    def assumptions(self) -> AssumptionReport:
        rep = _stage("validate", validate_assumptions, self.cfg.fields, self.mesh)
        _write(self.out / "assumptions.txt", rep.table())
        return rep

    def constants(self) -> ConstantsReport:
        if self._constants is None:
            c = _stage("constants", estimate_constants, self.cfg.fields, self.mesh, self.cfg.constant_samples, self.cfg.seed)
            _stage("constants", lambda_threshold, c)
            _write(self.out / "constants.txt", c.table())
            self._constants = c
        return self._constants

    def lambdas(self) -> list:
        spec = self.cfg.lam
        Lambda = self.constants().Lambda if spec.relative else None
        return spec.resolve(Lambda)

    # -- commands -------------------------------------------------------
    def validate(self) -> int:
        rep = self.assumptions()
        sys.stdout.write(rep.table())
        for c in rep.failures():
            print(f"FAIL {c.name}: witness={c.witness} value={c.value!r} {c.detail}".rstrip())
        return 0 if rep.passed else 1

    def _require_assumptions(self):
        rep = self.assumptions()
        if not rep.passed:
            names = ", ".join(c.name for c in rep.failures())
            raise StageError("validate", ValueError(f"assumptions fail: {names}"))

    def solve(self) -> int:
        self._require_assumptions()
        if self.cfg.lam.sweep:
            raise StageError("solve", ValueError("config gives a lambda sweep; use the sweep command"))
        lam = self.lambdas()[0]
        pair = solve_pair(self.cfg, self.mesh, lam, self.constants())
        o = self.out
        _write(o / "mountain_pass_history.csv", pair.mp.history_csv())
        _write(o / "mountain_pass_solution.csv", pair.mp.solution_csv(self.mesh))
        _write(o / "ball_min_history.csv", pair.ball.history_csv())
        _write(o / "ball_min_solution.csv", pair.ball.solution_csv(self.mesh))
        energies = [EnergyBreakdown.CSV_HEADER.replace("lambda", "solution,lambda")]
        energies += [f"{r.classification},{r.final_energy.csv_row()}" for r in (pair.mp, pair.ball)]
        _write(o / "energies.csv", "\n".join(energies) + "\n")
        _write(o / "solve_summary.csv", SWEEP_HEADER + "\n" + pair.csv_row() + "\n")
        for r in (pair.mp, pair.ball):
            status = "converged" if r.converged else "NOT converged"
            print(
                f"{r.classification}: J={r.final_energy.total!r} residual={r.residual!r} "
                f"||u||={r.x0_norm!r} morse={r.morse_index} {status}"
            )
            for note in r.notes:
                print(f"  note: {note}")
            if r.ps is not None and r.ps.warning:
                print(f"  warning: {r.ps.warning}")
        print(f"lambda={lam!r} delta={pair.delta!r} separation={pair.separation!r} distinct={pair.distinct}")
        return 0 if pair.ok else 1

    def verify(self) -> int:
        cfg, mesh, vp = self.cfg, self.mesh, self.cfg.verify
        gamma = cfg.fields.r if vp.gamma is None else _stage("verify:embedding", OnePointField, vp.gamma, "gamma", cfg.N)
        reports = [
            _stage("verify:hls", verify_hls, cfg.fields, mesh, vp.samples, cfg.seed),
            _stage("verify:kernel_split", verify_kernel_split, cfg.fields.mu, mesh),
            _stage("verify:embedding", verify_embedding, gamma, cfg.fields, mesh, vp.samples, cfg.seed),
            _stage(
                "verify:geometry",
                geometry_scan,
                0.0,
                cfg.fields,
                mesh,
                sorted(vp.radii),
                vp.samples_per_radius,
                cfg.seed,
            ),
            self._scaling(),
        ]
        lines = [TABLE_HEADER] + [r.row() for r in reports]
        text = "\n".join(lines) + "\n"
        _write(self.out / "verification.txt", text)
        for r in reports:
            if r.values:
                _write(self.out / f"verify_{r.name}.csv", r.values_csv())
        sys.stdout.write(text)
        return 0 if all(r.passed for r in reports) else 1

    def _scaling(self) -> VerificationReport:
        vp = self.cfg.verify
        c = self.constants()
        slope, local = _stage("verify:scaling", fit_power_law, c, vp.fit_lo, vp.fit_hi)
        dev = float(np.max(np.abs(local - slope)) / abs(slope))
        predicted = (2 * c.r_lo - c.p_hi) / (2 * c.r_lo - c.alpha_lo)
        return VerificationReport(
            name="lambda_scaling",
            samples=len(local) + 1,
            worst=dev,
            passed=dev <= SLOPE_RTOL,
            seed=self.cfg.seed,
            values=[float(v) for v in local],
            details={"slope": slope, "predicted": predicted},
        )

    def sweep(self) -> int:
        self._require_assumptions()
        c = self.constants()
        prob = Problem(self.cfg.fields, self.mesh)
        rows = [SWEEP_HEADER]
        ok = True
        for lam in self.lambdas():
            pair = solve_pair(self.cfg, self.mesh, lam, c, prob)
            rows.append(pair.csv_row())
            ok &= pair.ok
            print(
                f"lambda={lam!r} J(u1)={pair.mp.final_energy.total!r} J(u2)={pair.ball.final_energy.total!r} "
                f"distinct={pair.distinct} ok={pair.ok}"
            )
        _write(self.out / "sweep.csv", "\n".join(rows) + "\n")
        return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="choquard", description="Variable-exponent fractional Choquard solver")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path, help="TOML run configuration")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--threads", type=int, default=1, help="threads for inner reductions")
    ap.add_argument("--out", type=Path, help="override the output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(command: str, cfg: Config, threads: int = 1) -> int:
    """Run one command; returns the exit status."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    _reduce.set_threads(threads)
    try:
        runner = Runner(cfg)
        return getattr(runner, command)()
    except StageError as exc:
        print(f"error in stage {exc}", file=sys.stderr)
        return 2
    finally:
        _reduce.set_threads(1)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error in stage config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    return run(args.command, cfg, args.threads)


if __name__ == "__main__":
    sys.exit(main())
