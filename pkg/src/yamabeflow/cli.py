"""Command-line orchestration: run, eigen, check, supersolution, verify, resume.

All numerics are single-threaded and reductions are exactly rounded, so
outputs are bitwise identical regardless of ``--threads``; the flag exists
for interface compatibility and caps nothing.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import diagnostics as diag
from . import flow as flowmod
from . import hypotheses as hyp
from . import snapshots
from .diagnostics import DiagnosticsRecord
from .errors import DeltaWindowEmptyError, EigenConvergenceError, ScenarioError
from .flow import FlowConfig, FlowState, RunCarry, Trajectory
from .operators import stationary_residual
from .scenario import load_scenario
from .spectral import dirichlet_eigen

CSV_NAME = "trajectory.csv"
SUMMARY_NAME = "summary.txt"
CHECKPOINT_U = "checkpoint.u.yflo"
CHECKPOINT_STATE = "checkpoint.state.yflo"
FINAL_U = "final.u.yflo"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _fmt_p(p: float) -> str:
    return f"{p:g}"


def _csv_header(orders) -> str:
    cols = ["t", "dt", "energy", "min_u", "max_u", "volume_g", "residual_sup"]
    cols += [f"residual_l{_fmt_p(p)}" for p in orders]
    cols.append("dissipation_cum")
    return ",".join(cols)


def _csv_row(rec: DiagnosticsRecord, orders) -> str:
    vals = [rec.t, rec.dt, rec.energy, rec.min_u, rec.max_u, rec.volume_g, rec.residual_sup]
    vals += [rec.residual_lp[p] for p in orders]
    vals.append(rec.dissipation_cum)
    return ",".join(_fmt(v) for v in vals)


def _parse_until(value: str) -> tuple[float | None, int | None]:
    if value.endswith("steps"):
        return None, int(value[: -len("steps")])
    return float(value), None


def _apply_until(cfg: FlowConfig, until: str | None) -> FlowConfig:
    if until is None:
        return cfg
    t_max, max_steps = _parse_until(until)
    if t_max is not None:
        return dataclasses.replace(cfg, t_max=t_max)
    return dataclasses.replace(cfg, max_steps=max_steps)


def _write_summary(out: Path, traj: Trajectory, resid: float) -> None:
    lines = [
        f"outcome = {traj.outcome}",
        f"t_final = {_fmt(traj.final.t)}",
        f"steps = {traj.final.step}",
        f"stationary_residual = {_fmt(resid)}",
        f"energy_final = {_fmt(traj.records[-1].energy)}",
    ]
    (out / SUMMARY_NAME).write_text("\n".join(lines) + "\n")


def _run_loop(
    scn, cfg, out: Path, start=None, carry=None, csv_mode="w", checkpoint_every=0
) -> Trajectory:
    out.mkdir(parents=True, exist_ok=True)
    orders = cfg.resolve_orders(scn.grid.n)
    csv_path = out / CSV_NAME
    with open(csv_path, csv_mode) as csv:
        if csv_mode == "w":
            csv.write(_csv_header(orders) + "\n")

        def on_record(rec):
            csv.write(_csv_row(rec, orders) + "\n")
            csv.flush()

        def on_checkpoint(state, run_carry):
            snapshots.write_field(out / CHECKPOINT_U, state.u)
            snapshots.write_sidecar(
                out / CHECKPOINT_STATE,
                step=state.step,
                records_written=run_carry.records_written,
                last_record_step=run_carry.last_record_step,
                t=state.t,
                dt_last=state.dt_last,
                dissipation_cum=run_carry.dissipation_cum,
            )

        traj = flowmod.run(
            scn.background,
            scn.u0,
            cfg,
            start=start,
            carry=carry,
            on_record=on_record,
            checkpoint_every=checkpoint_every,
            on_checkpoint=on_checkpoint,
        )
    snapshots.write_field(out / FINAL_U, traj.final.u)
    _write_summary(out, traj, stationary_residual(scn.background, traj.final.u))
    return traj


def cmd_run(args) -> int:
    scn = load_scenario(args.scenario)
    cfg = _apply_until(scn.flow, args.until)
    traj = _run_loop(scn, cfg, Path(args.out), checkpoint_every=args.checkpoint_every)
    print(f"outcome: {traj.outcome} at t={traj.final.t:g} after {traj.final.step} steps")
    return 0


def cmd_resume(args) -> int:
    scn = load_scenario(args.scenario)
    cfg = _apply_until(scn.flow, args.until)
    out = Path(args.out)
    side = snapshots.read_sidecar(out / CHECKPOINT_STATE)
    u = snapshots.read_field(out / CHECKPOINT_U)
    start = FlowState(u, side["t"], side["step"], side["dt_last"])
    carry = RunCarry(
        dissipation_cum=side["dissipation_cum"],
        records_written=side["records_written"],
        last_record_step=side["last_record_step"],
    )
    csv_path = out / CSV_NAME
    lines = csv_path.read_text().splitlines()
    kept = lines[: 1 + side["records_written"]]
    csv_path.write_text("\n".join(kept) + "\n")
    traj = _run_loop(
        scn, cfg, out, start=start, carry=carry, csv_mode="a",
        checkpoint_every=args.checkpoint_every,
    )
    print(f"outcome: {traj.outcome} at t={traj.final.t:g} after {traj.final.step} steps")
    return 0


def cmd_eigen(args) -> int:
    scn = load_scenario(args.scenario)
    mask = scn.omega_mask()
    try:
        result = dirichlet_eigen(scn.background, mask, tol=args.tol)
    except EigenConvergenceError as exc:
        print(f"FAIL eigen: {exc}", file=sys.stderr)
        return 1
    print(f"lambda = {_fmt(result.lam)}")
    print(f"residual = {_fmt(result.residual)}")
    print(f"iterations = {result.iterations}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        snapshots.write_field(out / "phi.yflo", result.phi)
    return 0


def cmd_check(args) -> int:
    scn = load_scenario(args.scenario)
    mask = scn.omega_mask()
    dilation = int(scn.supersolution.get("dilation", "2"))
    band = int(scn.supersolution.get("band", "2"))
    report = hyp.evaluate_hypotheses(scn.background, mask, dilation=dilation, band=band)
    print(f"lambda_omega = {_fmt(report.lambda_omega)}")
    print(f"sup_f_omega = {_fmt(report.sup_f_omega)}")
    print(f"inf_absf_complement = {_fmt(report.inf_absf_complement)}")
    print(f"c_omega = {_fmt(report.c_omega)}")
    print(f"h1 = {'PASS' if report.h1_holds else 'FAIL'}")
    print(f"h2 = {'PASS' if report.h2_holds else 'FAIL'}")
    return 0 if (report.h1_holds and report.h2_holds) else 1


def cmd_supersolution(args) -> int:
    scn = load_scenario(args.scenario)
    mask = scn.omega_mask()
    dilation = int(scn.supersolution.get("dilation", "2"))
    band = int(scn.supersolution.get("band", "2"))
    try:
        cert = hyp.build_supersolution(scn.background, mask, dilation=dilation, band=band)
    except (DeltaWindowEmptyError, ValueError, EigenConvergenceError) as exc:
        print(f"FAIL supersolution: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snapshots.write_field(out / "ubar.yflo", cert.ubar)
    payload = {
        "delta": cert.delta,
        "m0": cert.m0,
        "m1": cert.m1,
        "lambda_d": cert.lambda_d,
        "min_l_ubar": cert.min_l_ubar,
        "delta_lo": cert.delta_lo,
        "delta_hi": cert.delta_hi,
    }
    (out / "certificate.json").write_text(json.dumps(payload, indent=2, default=str) + "\n")
    print(
        f"delta = {cert.delta:g} in [{cert.delta_lo:g}, {cert.delta_hi:g}], "
        f"min L(ubar) = {cert.min_l_ubar:g}"
    )
    return 0


def _load_csv_records(path: Path) -> list[DiagnosticsRecord]:
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    lp_cols = {
        i: float(name[len("residual_l"):])
        for i, name in enumerate(header)
        if name.startswith("residual_l") and name != "residual_sup"
    }
    idx = {name: i for i, name in enumerate(header)}
    records = []
    for line in lines[1:]:
        vals = [float(v) for v in line.split(",")]
        records.append(
            DiagnosticsRecord(
                t=vals[idx["t"]],
                dt=vals[idx["dt"]],
                energy=vals[idx["energy"]],
                min_u=vals[idx["min_u"]],
                max_u=vals[idx["max_u"]],
                volume_g=vals[idx["volume_g"]],
                residual_sup=vals[idx["residual_sup"]],
                residual_lp={p: vals[i] for i, p in lp_cols.items()},
                dissipation_cum=vals[idx["dissipation_cum"]],
            )
        )
    return records


def cmd_verify(args) -> int:
    scn = load_scenario(args.scenario)
    out = Path(args.out)
    records = _load_csv_records(out / CSV_NAME)
    summary = dict(
        line.split(" = ", 1) for line in (out / SUMMARY_NAME).read_text().splitlines() if line
    )
    traj = Trajectory(
        n=scn.grid.n,
        records=records,
        step_t=[],
        step_dt=[],
        step_energy=[],
        step_min_u=[],
        step_max_u=[],
        final=None,
        outcome=summary["outcome"],
    )
    failures = []

    energies = [r.energy for r in records]
    mono = all(b <= a + 1e-10 * (1.0 + abs(a)) for a, b in zip(energies, energies[1:]))
    print(f"{'PASS' if mono else 'FAIL'} energy_monotone")
    if not mono:
        failures.append("energy_monotone")

    env = diag.envelope_check(scn.background, traj)
    print(f"{'PASS' if env.passed else 'FAIL'} envelopes ({len(env.violations)} violations)")
    failures += ["envelopes"] if not env.passed else []

    if len(records) >= 10:
        err = diag.dissipation_identity_error(traj)
        ok = err <= args.dissipation_tol
        print(f"{'PASS' if ok else 'FAIL'} dissipation_identity error={err:.3e}")
        if not ok:
            failures.append("dissipation_identity")

    if traj.outcome == "converged":
        decay = diag.decay_check(traj, threshold=args.decay_threshold)
        print(f"{'PASS' if decay.passed else 'FAIL'} decay")
        if not decay.passed:
            failures.append("decay")

    return 0 if not failures else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yamabeflow",
        description="Prescribed-curvature conformal flow laboratory on periodic grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument("--out", required=needs_out, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="accepted for compatibility; outputs are thread-count independent")

    p_run = sub.add_parser("run", help="integrate the flow and write CSV + snapshots")
    common(p_run)
    p_run.add_argument("--until", help="override stop: a time t, or '<k>steps'")
    p_run.add_argument("--checkpoint-every", type=int, default=0, help="steps between checkpoints")
    p_run.set_defaults(func=cmd_run)

    p_res = sub.add_parser("resume", help="continue a run from its checkpoint")
    common(p_res)
    p_res.add_argument("--until", help="override stop: a time t, or '<k>steps'")
    p_res.add_argument("--checkpoint-every", type=int, default=0)
    p_res.set_defaults(func=cmd_resume)

    p_eig = sub.add_parser("eigen", help="principal Dirichlet eigenpair on the scenario subdomain")
    common(p_eig, needs_out=False)
    p_eig.add_argument("--tol", type=float, default=1e-8)
    p_eig.set_defaults(func=cmd_eigen)

    p_chk = sub.add_parser("check", help="decide the eigenvalue and size conditions")
    common(p_chk, needs_out=False)
    p_chk.set_defaults(func=cmd_check)

    p_sup = sub.add_parser("supersolution", help="build and verify a supersolution certificate")
    common(p_sup)
    p_sup.set_defaults(func=cmd_supersolution)

    p_ver = sub.add_parser("verify", help="run the diagnostics suite over a stored trajectory")
    common(p_ver)
    p_ver.add_argument("--dissipation-tol", type=float, default=0.05)
    p_ver.add_argument("--decay-threshold", type=float, default=1e-8)
    p_ver.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
