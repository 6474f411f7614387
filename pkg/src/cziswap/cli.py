"""Command-line entry point: ``cziswap <command> [options]``.

Exit codes: 0 success, 2 validation error, 3 calibration or experiment failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import fits, gateset, mitigation, noise, ramsey, readout
from .dynamics import calibrate as cal_mod
from .dynamics.params import ConfigError, DeviceParams
from .dynamics.timing import check_commensurability, residual_population

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 2, 3

BACKENDS = ("exact", "noisy", "pulse", "shots")
SOURCES = ("exact", "noisy", "pulse", "device")
TAU_1Q = 20e-9
EXTRA_21 = (0.5, 0.5)
CONFUSION_SHOTS = 25_000
DEFAULT_CALIBRATION = "calibration_table1.json"


class ValidationError(ValueError):
    pass


class ExperimentFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    device: str | None = None
    calibration: str | None = None
    backend: str = "exact"
    source: str = "device"
    shots: int | None = None
    seed: int = 0
    out_dir: str = "."
    threads: int = 1
    mitigate: str | None = None
    json: bool = False
    readout_error: bool = True
    extra_21: tuple = EXTRA_21

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValidationError(f"backend must be one of {BACKENDS}")
        if self.source not in SOURCES:
            raise ValidationError(f"source must be one of {SOURCES}")
        if self.shots is not None and self.shots <= 0:
            raise ValidationError("shots must be positive")
        if self.threads < 1:
            raise ValidationError("threads must be at least 1")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        self.extra_21 = tuple(float(e) for e in self.extra_21)
        if len(self.extra_21) != 2 or not all(0.0 <= e <= 1.0 for e in self.extra_21):
            raise ValidationError("extra_21 needs two probabilities")

    def params(self) -> DeviceParams:
        return DeviceParams.from_toml(self.device) if self.device else DeviceParams.table1()


CONFIG_KEYS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path) -> dict:
    """Flat TOML of RunConfig keys; anything else is rejected."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return data


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit command-line flags."""
    values = load_config(args.config) if args.config else {}
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            values[key] = v
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


# -- calibration records -----------------------------------------------------------

def calibration_record(cz: cal_mod.GateCalibration, isw: cal_mod.GateCalibration,
                       frame: cal_mod.TwoQubitFrame | None, swap_correction, params) -> dict:
    summary = {
        "f_CZ_hz": cz.frequency_hz, "tau_CZ_s": cz.duration_s,
        "f_iSWAP_hz": isw.frequency_hz, "tau_iSWAP_s": isw.duration_s,
        "delta_f_CZ_hz": cz.detuning_hz, "delta_f_iSWAP_hz": isw.detuning_hz,
        "phi_comp_CZ_rad": list(cz.phi_comp), "phi_comp_iSWAP_rad": list(isw.phi_comp),
        "swap_correction_rad": list(swap_correction),
    }
    rec = {"summary": summary, "CZ": cz.to_record(), "iSWAP": isw.to_record(),
           "swap_correction_rad": list(swap_correction), "device": params.to_dict()}
    if frame is not None:
        rec["frame"] = {"f_2qf_hz": frame.f_2qf_hz, "f_grid_argmin_hz": frame.f_grid_argmin_hz}
    return rec


def load_calibration(path=None) -> tuple:
    """({"CZ": cal, "iSWAP": cal}, swap_correction) from a record; the shipped one by default."""
    try:
        if path is None:
            text = resources.files("cziswap").joinpath("data", DEFAULT_CALIBRATION).read_text()
        else:
            text = Path(path).read_text()
        rec = json.loads(text)
        cals = {g: cal_mod.GateCalibration.from_record(g, rec[g]) for g in ("CZ", "iSWAP")}
        corr = tuple(float(x) for x in rec.get("swap_correction_rad", (0.0, 0.0)))
    except (OSError, KeyError, ValueError) as exc:
        raise ValidationError(f"cannot read calibration record {path}: {exc}") from exc
    return cals, corr


# -- output helpers ----------------------------------------------------------------------

def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(cfg: RunConfig, report: dict, lines: list) -> None:
    if cfg.json:
        print(json.dumps(report, indent=2, sort_keys=True, default=_jsonable))
    else:
        for line in lines:
            print(line)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


# -- commands ---------------------------------------------------------------------------

def cmd_verify(args, cfg: RunConfig) -> int:
    rep = gateset.verify_swap_decomposition(perturb=args.perturb)
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name:28s} max deviation {c.deviation:.3e}"
             for c in rep.checks]
    _emit(cfg, rep.to_dict(), lines)
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_fidelity(args, cfg: RunConfig) -> int:
    p = cfg.params()
    t1 = [math.inf, math.inf] if args.infinite_t1 else list(p.t1)
    durations = {"1QB": TAU_1Q, "CZ": gateset.TAU_CZ, "iSWAP": gateset.TAU_ISWAP,
                 "SWAP": ramsey.SWAP_CIRCUIT_DURATION}
    report = {"t1_s": t1, "gates": {}}
    lines = []
    for name, tau in durations.items():
        sites = t1[:1] if name == "1QB" else t1
        est = noise.coherence_limited_fidelity(tau, sites)
        cross = (noise.damping_process_fidelity(tau, sites)
                 if all(math.isfinite(t) for t in sites) else 1.0)
        report["gates"][name] = {"duration_s": tau, "fidelity": est, "process_fidelity": cross}
        lines.append(f"{name:6s} {tau * 1e9:7.1f} ns  F = {100 * est:.3f}%  "
                     f"(density-matrix {100 * cross:.3f}%)")
    three_cz = 3 * gateset.TAU_CZ
    report["swap_duration_s"] = ramsey.SWAP_CIRCUIT_DURATION
    report["three_cz_duration_s"] = three_cz
    lines.append(f"SWAP circuit {ramsey.SWAP_CIRCUIT_DURATION * 1e6:.3f} us vs "
                 f"three CZ {three_cz * 1e6:.2f} us")
    _emit(cfg, report, lines)
    return EXIT_OK


def cmd_calibrate(args, cfg: RunConfig) -> int:
    from .dynamics.propagate import Propagator
    p = cfg.params()
    out = _out_dir(cfg)
    prop = Propagator(p)
    try:
        cz = cal_mod.calibrate_cz(p, propagator=prop, workers=cfg.threads)
        isw = cal_mod.calibrate_iswap(p, propagator=prop, workers=cfg.threads)
        frame = cal_mod.measure_two_qubit_frame(p, isw, propagator=prop)
    except cal_mod.CalibrationError as exc:
        if exc.sweep is not None:
            path = out / f"sweep_{exc.sweep.quantity}.csv"
            exc.sweep.to_csv(path)
            print(f"sweep map written to {path}", file=sys.stderr)
        raise ExperimentFailure(str(exc)) from exc
    isw = dataclasses.replace(isw, f_2qf_hz=frame.f_2qf_hz)
    backend = ramsey.PulseBackend(prop, {"CZ": cz, "iSWAP": isw})
    tune = ramsey.tune_swap_local_phase(backend)
    rec = calibration_record(cz, isw, frame, tune.phases, p)
    path = out / "calibration.json"
    path.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    for c in (cz, isw):
        c.sweep.to_csv(out / f"sweep_{c.gate}.csv")
    s = rec["summary"]
    lines = [f"CZ     f = {s['f_CZ_hz'] / 1e6:.4f} MHz  tau = {s['tau_CZ_s'] * 1e9:.1f} ns  "
             f"return {cz.transfer:.4f}  F = {cz.fidelity:.5f}",
             f"iSWAP  f = {s['f_iSWAP_hz'] / 1e6:.4f} MHz  tau = {s['tau_iSWAP_s'] * 1e9:.1f} ns  "
             f"transfer {isw.transfer:.4f}  F = {isw.fidelity:.5f}",
             f"f_2qf  {frame.f_2qf_hz / 1e6:.4f} MHz",
             f"SWAP correction ({tune.phases[0]:+.4f}, {tune.phases[1]:+.4f}) rad",
             f"record written to {path}"]
    _emit(cfg, rec, lines)
    return EXIT_OK


def session_confusion(cfg: RunConfig) -> np.ndarray:
    """Infinite-shot joint confusion matrix of the simulated readout."""
    return readout.expected_joint_confusion(readout.table1_readout(), cfg.extra_21).matrix


def build_backend(cfg: RunConfig, gate: str):
    name = cfg.backend
    base = cfg.source if name == "shots" else name
    kwargs = {"params": cfg.params()}
    swap_corr = (0.0, 0.0)
    if base in ("pulse", "device"):
        from .dynamics.propagate import Propagator
        cals, swap_corr = load_calibration(cfg.calibration)
        kwargs.update(propagator=Propagator(kwargs["params"]), calibrations=cals)
    if name == "shots":
        shots = cfg.shots or ramsey.SHOTS[gate]
        confusion = session_confusion(cfg) if cfg.readout_error else None
        return ramsey.make_backend("shots", shots=shots, seed=cfg.seed, confusion=confusion,
                                   source=base, dephasing=True, **kwargs), swap_corr
    return ramsey.make_backend(name, dephasing=True, **kwargs), swap_corr


def run_ramsey(cfg: RunConfig, gate: str, t_mit=None) -> list:
    """Experiment set for ``gate``: list of (trace, fit) with optional mitigation."""
    backend, swap_corr = build_backend(cfg, gate)
    build = {"swap_correction": swap_corr} if gate == "SWAP" else {}
    out = []
    for trace in ramsey.experiment_set(gate, backend, **build):
        if t_mit is not None:
            trace = mitigation.mitigate_trace(trace, t_mit)
        out.append((trace, ramsey.fit_trace(trace)))
    return out


def cmd_ramsey(args, cfg: RunConfig) -> int:
    t_mit = None
    if cfg.mitigate:
        t_mit = _read_confusion(cfg.mitigate)
    results = run_ramsey(cfg, args.gate, t_mit)
    out = _out_dir(cfg)
    records, lines = [], []
    for trace, fit in results:
        qc, qt = trace.roles
        stem = f"ramsey_{args.gate}_q{qc + 1}q{qt + 1}_prep{trace.prep}"
        if t_mit is not None:
            mitigation.write_mitigated_csv(trace, out / f"{stem}.csv", cfg.mitigate)
        else:
            trace.write_csv(out / f"{stem}.csv")
        rec = ramsey.fit_record(trace, fit)
        records.append(rec)
        lines.append(f"{args.gate:5s} q_c=q{qc + 1} prep={trace.prep} P({trace.output_label}): "
                     f"swing {fit.swing:.4f}  offset {fit.delta_offset:+.4f}  "
                     f"phase {1e3 * fit.delta_phase:+.1f} mrad  MSE {fit.mse:.5f}")
    fit_path = out / f"ramsey_{args.gate}_fits.csv"
    _write_records(fit_path, records)
    _emit(cfg, {"gate": args.gate, "fits": records}, lines)
    return EXIT_OK


def _write_records(path, records: list) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(records[0]), lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: (repr(v) if isinstance(v, float) else ("" if v is None else v))
                        for k, v in r.items()})


def _read_confusion(path) -> readout.ConfusionMatrix:
    try:
        return readout.ConfusionMatrix.read_csv(path)
    except OSError as exc:
        raise ValidationError(f"cannot read confusion matrix {path}: {exc}") from exc


def cmd_confusion(args, cfg: RunConfig) -> int:
    models = readout.table1_readout()
    n = cfg.shots or CONFUSION_SHOTS
    out = _out_dir(cfg)
    singles = [readout.build_confusion(m, n, seed=cfg.seed, qubit=q) for q, m in enumerate(models)]
    joint = readout.build_joint_confusion(models, n, seed=cfg.seed, extra_21=cfg.extra_21)
    for q, c in enumerate(singles):
        c.write_csv(out / f"confusion_q{q + 1}.csv")
    joint.write_csv(out / "confusion_joint.csv")
    _, peaks = readout.confusion_difference(joint, *singles)
    fids = [readout.assignment_fidelity(c) for c in singles]
    report = {"shots_per_state": n,
              "assignment_fidelity": [{"qubit": q + 1, "F": f, "sem": s}
                                      for q, (f, s) in enumerate(fids)],
              "largest_increases": [{"value": v, "prepared": a, "measured": b}
                                    for v, a, b in peaks]}
    lines = [f"Q{q + 1} assignment fidelity {100 * f:.2f}% +- {100 * s:.2f}%"
             for q, (f, s) in enumerate(fids)]
    lines += [f"joint - constructed: {v:+.3f} at prepared {a} -> measured {b}" for v, a, b in peaks]
    _emit(cfg, report, lines)
    return EXIT_OK


def cmd_mitigate(args, cfg: RunConfig) -> int:
    if not cfg.mitigate:
        raise ValidationError("mitigate needs --mitigate TFILE")
    t = _read_confusion(cfg.mitigate)
    out = _out_dir(cfg)
    report, lines = {"traces": []}, []
    for path in args.traces:
        target = out / f"{Path(path).stem}_mitigated.csv"
        mitigation.mitigate_csv(path, t, target, cfg.mitigate)
        report["traces"].append({"input": str(path), "output": str(target)})
        lines.append(f"{path} -> {target}")
    _emit(cfg, report, lines)
    return EXIT_OK


def cmd_fit(args, cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    target = out / f"fits_{args.model}.csv"
    results = fits.fit_batch(args.series, args.model, target)
    rows = [dict(source=str(s), **r.to_row()) for s, r in zip(args.series, results)]
    lines = [f"{r['source']}: T = {r['T_s'] * 1e6:.3f} us  err {100 * r['err_T_frac']:.2f}%  "
             f"{'accepted' if r['accepted'] else 'rejected'}" for r in rows]
    _emit(cfg, {"model": args.model, "results": rows, "output": str(target)}, lines)
    return EXIT_OK


def _read_samples(path) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            for tok in line.replace(",", " ").split():
                try:
                    vals.append(float(tok))
                except ValueError:
                    continue  # header words
    return np.array(vals)


def cmd_doane(args, cfg: RunConfig) -> int:
    x = _read_samples(args.samples)
    k = fits.doane_bins(x)
    _emit(cfg, {"n": int(x.size), "bins": k}, [f"N = {x.size}  K = {k}"])
    return EXIT_OK


def cmd_commensurate(args, cfg: RunConfig) -> int:
    c = check_commensurability(args.t_rep, args.f_lo)
    t1 = args.t1 if args.t1 is not None else float(np.mean(cfg.params().t1))
    resid = residual_population(args.t_rep, t1)
    report = {"t_rep_s": args.t_rep, "f_lo_hz": args.f_lo, "commensurate": c.commensurate,
              "cycles": c.cycles, "residual_phase_rad": c.residual_phase,
              "t1_s": t1, "residual_population": resid}
    lines = [f"{'commensurate' if c.commensurate else 'NOT commensurate'}: "
             f"{c.cycles:.6f} LO cycles per repetition",
             f"residual excited population after {args.t_rep * 1e6:g} us: {100 * resid:.2f}%"]
    _emit(cfg, report, lines)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="FILE", help="TOML run configuration")
    p.add_argument("--device", metavar="FILE", help="TOML device parameters (default: Table 1 set)")
    p.add_argument("--calibration", metavar="FILE", help="calibration record for pulse backends")
    p.add_argument("--backend", choices=BACKENDS)
    p.add_argument("--source", choices=SOURCES, help="what the shots backend samples")
    p.add_argument("--shots", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--mitigate", metavar="TFILE", help="confusion-matrix CSV for mitigation")
    p.add_argument("--json", action="store_true", default=None, help="machine-readable output")
    p.add_argument("--out-dir", dest="out_dir", metavar="DIR")
    p.add_argument("--threads", type=int, metavar="N")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="cziswap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="check the SWAP decomposition identities")
    p.add_argument("--perturb", type=float, default=0.0, help="corrupt one CZ entry (debug)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("calibrate", parents=[common], help="pulse-level CZ/iSWAP tune-up")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("ramsey", parents=[common], help="conditional/cross-Ramsey experiment set")
    p.add_argument("--gate", choices=("CZ", "iSWAP", "SWAP"), required=True)
    p.set_defaults(func=cmd_ramsey)

    p = sub.add_parser("fidelity", parents=[common], help="coherence-limited gate fidelities")
    p.add_argument("--infinite-t1", action="store_true", help="ignore relaxation")
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("confusion", parents=[common], help="simulate readout confusion matrices")
    p.set_defaults(func=cmd_confusion)

    p = sub.add_parser("mitigate", parents=[common], help="mitigate trace CSVs with a confusion matrix")
    p.add_argument("traces", nargs="+", metavar="TRACE")
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("fit", parents=[common], help="batch decoherence fits of t_s,signal CSVs")
    p.add_argument("series", nargs="+", metavar="CSV")
    p.add_argument("--model", choices=fits.MODELS, required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("doane", parents=[common], help="histogram bin count by Doane's rule")
    p.add_argument("samples", metavar="FILE")
    p.set_defaults(func=cmd_doane)

    p = sub.add_parser("commensurate", parents=[common], help="LO / repetition-rate check")
    p.add_argument("--t-rep", dest="t_rep", type=float, default=400e-6, metavar="S")
    p.add_argument("--f-lo", dest="f_lo", type=float, default=3.6e9, metavar="HZ")
    p.add_argument("--t1", type=float, default=None, metavar="S")
    p.set_defaults(func=cmd_commensurate)
    return parser


VALIDATION_ERRORS = (ValidationError, ConfigError, gateset.GateError, ramsey.RamseyError,
                     readout.ReadoutError, mitigation.MitigationError, fits.FitError,
                     noise.NoiseError, FileNotFoundError)
FAILURES = (ExperimentFailure, cal_mod.CalibrationError, ramsey.TuneUpError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
