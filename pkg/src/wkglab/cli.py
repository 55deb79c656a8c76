"""Command-line entry point: ``wkglab <subcommand> ...``.

Exit status: 0 success, 1 validation error (bad arguments, config, missing
files), 2 runtime abort (a run diverged or failed mid-way).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import EnergyRecorder, energy_monitor, fit_decay
from .checkpoint import CheckpointError, encode, read_checkpoint, write_checkpoint
from .config import ConfigError, RunConfig, load_config, serialize
from .evolution import run
from .io import emit_kappa_report, emit_series, read_series, write_manifest
from .kappa_limit import SweepConfig, sweep


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _window(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        if not sep:
            raise ValueError
        w = (float(lo), float(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like LO:HI, got {text!r}") from None
    if not w[0] < w[1]:
        raise argparse.ArgumentTypeError("window needs LO < HI")
    return w


def _kappas(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad kappa list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wkglab", description="Wave-Klein-Gordon laboratory on hyperboloidal foliations.")
    p.add_argument("--version", action="version", version=f"wkglab {__version__}")
    sub = p.add_subparsers(dest="command", metavar="{simulate,ricci,sweep-kappa,decay-fit,energy,checkpoint}",
                           parser_class=_Parser)

    s = sub.add_parser("simulate", help="evolve a configured model and write series + manifest")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides [output] directory)")

    r = sub.add_parser("ricci", help="symbolic Ricci decomposition checks")
    r.add_argument("action", choices=("verify", "linear"))
    r.add_argument("--order", type=int, default=2)
    r.add_argument("--report", help="also write the report to this file")

    k = sub.add_parser("sweep-kappa", help="relaxation-limit sweep over kappa")
    k.add_argument("--kappas", type=_kappas, required=True)
    k.add_argument("--config", required=True)
    k.add_argument("--out", help="output directory")

    d = sub.add_parser("decay-fit", help="fit a power law to a series column")
    d.add_argument("--input", required=True)
    d.add_argument("--window", type=_window)
    d.add_argument("--column", default="sup_u")

    e = sub.add_parser("energy", help="bounded-energy verdict for a series file")
    e.add_argument("--input", required=True)
    e.add_argument("--order", type=int, default=2, choices=(0, 1, 2))
    e.add_argument("--factor", type=float, default=2.0)

    c = sub.add_parser("checkpoint", help="inspect or verify a checkpoint file")
    c.add_argument("action", choices=("inspect", "verify"))
    c.add_argument("path")
    return p


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _simulate(args) -> int:
    cfg = load_config(args.config)
    out = cfg.output_dir(args.out)
    model, data, scheme = cfg.model(), cfg.initial_data(), cfg.scheme()
    run_s, grid, an = cfg.section("run"), cfg.section("grid"), cfg.section("analysis")
    manifest = {
        "config": cfg.as_dict(), "config_text": serialize(cfg), "code_version": __version__,
        "command": "simulate", "start": _now(), "model": model.describe(),
    }
    ckpt_dir = out / "checkpoints"
    every = run_s["checkpoint_every"]
    counter = {"n": 0}

    def checkpoint(state):
        if every and counter["n"] % every == 0:
            ckpt_dir.mkdir(parents=True, exist_ok=True)
            write_checkpoint(state, ckpt_dir / f"ckpt_{counter['n']:06d}.wkg", model.describe())
        counter["n"] += 1

    recorder = EnergyRecorder(model, an["energy_order"], r_limit=an["energy_radius"])
    status = 0
    try:
        traj = run(data, model, scheme, (run_s["start"], run_s["stop"]), mode=run_s["mode"],
                   dr=grid["dr"], r_max=grid["r_max"], record_every=run_s["record_every"],
                   callbacks=[recorder], checkpoint=checkpoint)
    except Exception as exc:  # the run reached a terminal (aborted) state
        traj = getattr(exc, "trajectory", None)
        manifest.update(outcome="aborted", reason=f"{type(exc).__name__}: {exc}")
        status = 2
    else:
        manifest["outcome"] = "completed"
    summary = {}
    if traj is not None and traj.records:
        emit_series(traj.records, out / "series.csv")
        last = traj.records[-1]
        summary["final_time"] = last.time
        summary["final_sup"] = last.sup
        summary["final_energies"] = last.extra
        summary["steps"] = traj.steps
        if status == 0:
            summary.update(_fits(traj, an))
    manifest["summary"] = summary
    manifest["end"] = _now()
    write_manifest(out / "manifest.json", manifest)
    print(f"{manifest['outcome']}: series and manifest written to {out}")
    if status:
        print(manifest["reason"], file=sys.stderr)
    return status


def _fits(traj, an) -> dict:
    out = {}
    times = traj.times()
    window = an["fit_window"] or (times[0] + 3.0, times[-1])
    for name in traj.model.unknowns:
        try:
            fit = fit_decay((times, traj.series(f"sup_{name}")), window)
            out[f"exponent_{name}"] = fit.exponent
        except ValueError as exc:
            out[f"exponent_{name}"] = f"unavailable: {exc}"
    n = an["energy_order"]
    try:
        v = energy_monitor((times, traj.series(f"E{n}")), n, an["energy_factor"])
        out["energy"] = {"verdict": v.verdict, "ratio": v.ratio, "worst_time": v.worst_time}
    except ValueError as exc:
        out["energy"] = f"unavailable: {exc}"
    return out


def _ricci(args) -> int:
    from .tensor import verify_lemma, verify_linearized
    from .tensor.expr import render

    if args.action == "verify":
        report = verify_lemma(args.order)
        text = report.to_text()
        ok = report.ok
    else:
        lin = verify_linearized()
        text = ("ricci linear\n"
                f"status = {'PASS' if lin.holds else 'FAIL'}\n"
                f"reduced = {render(lin.reduced).strip()}\n"
                f"expected = {render(lin.expected).strip()}\n")
        ok = lin.holds
    print(text, end="")
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    return 0 if ok else 2


def _sweep(args) -> int:
    cfg: RunConfig = load_config(args.config)
    out = cfg.output_dir(args.out)
    m, run_s, grid = cfg.section("model"), cfg.section("run"), cfg.section("grid")
    sc = SweepConfig(args.kappas, data=cfg.initial_data(), span=(run_s["start"], run_s["stop"]),
                     mode=run_s["mode"], dr=grid["dr"], r_max=grid["r_max"],
                     record_every=run_s["record_every"], scheme=cfg.scheme(), c=m["c"], q=m["q"],
                     coupling=m["coupling"], nonlinearities=frozenset(m["nonlinearities"]),
                     null_coeff=m["null_coeff"], quasi_null_coeff=m["quasi_null_coeff"])
    manifest = {"config": cfg.as_dict(), "config_text": serialize(cfg), "code_version": __version__,
                "command": "sweep-kappa", "kappas": list(args.kappas), "start": _now()}
    try:
        report = sweep(sc)
    except Exception as exc:
        manifest.update(outcome="aborted", reason=f"{type(exc).__name__}: {exc}", end=_now())
        write_manifest(out / "manifest.json", manifest)
        print(manifest["reason"], file=sys.stderr)
        return 2
    emit_kappa_report(report, out / "kappa_report.csv")
    summary = report.summary()
    (out / "kappa_summary.txt").write_text(summary + "\n", encoding="utf-8")
    manifest.update(outcome="completed", end=_now(), summary={
        "slope_rho": report.slope_rho, "slope_u": report.slope_u, "slope_phi": report.slope_phi,
        "q": report.q, "rho_strictly_decreasing": report.strictly_decreasing("rho"),
        "failed": report.failed})
    write_manifest(out / "manifest.json", manifest)
    print(summary)
    return 0


def _decay(args) -> int:
    cols = read_series(args.input)
    if args.column not in cols:
        raise ValueError(f"unknown column {args.column!r}")
    fit = fit_decay((cols["s"], cols[args.column]), args.window)
    print(f"exponent {fit.exponent:.3f}")
    print(f"prefactor {fit.prefactor:.6g} residual_se {fit.residual_se:.3e} "
          f"samples {fit.samples} window {fit.window[0]:g}:{fit.window[1]:g}")
    return 0


def _energy(args) -> int:
    cols = read_series(args.input)
    e = cols[f"E{args.order}"]
    if np.any(np.isnan(e)):
        raise ValueError(f"column E{args.order} holds no recorded energies")
    v = energy_monitor((cols["s"], e), args.order, args.factor)
    ratio = "inf" if math.isinf(v.ratio) else f"{v.ratio:.6g}"
    print(f"{v.verdict} ratio={ratio} worst_s={v.worst_time:g} factor={v.factor:g}")
    return 0


def _checkpoint(args) -> int:
    state, meta = read_checkpoint(args.path)
    if args.action == "inspect":
        for key, value in meta.items():
            print(f"{key} = {value}")
        print(f"time_decimal = {state.time!r}")
        return 0
    blob = Path(args.path).read_bytes()
    again = encode(state, meta.get("model", ""))
    with tempfile.TemporaryDirectory() as tmp:
        write_checkpoint(state, Path(tmp) / "copy.wkg", meta.get("model", ""))
        copy = (Path(tmp) / "copy.wkg").read_bytes()
    same = blob == again == copy
    print("round-trip identical" if same else "round-trip MISMATCH")
    return 0 if same else 2


_HANDLERS = {"simulate": _simulate, "ricci": _ricci, "sweep-kappa": _sweep, "decay-fit": _decay,
             "energy": _energy, "checkpoint": _checkpoint}


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("wkglab: error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, CheckpointError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"wkglab {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"wkglab {args.command}: aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())
