"""Command-line front end.

Subcommands read a JSON run configuration (frequencies in Hz) and write
CSV or JSON files into the output directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .casestudies import (
    CaseStudyParams,
    ShapingFilter,
    build_c_alpha,
    build_fig5_example,
    build_pci,
    build_plant,
    load_case,
)
from .hosidf_closed import (
    ClosedLoopSystem,
    GammaSingularityError,
    MarginalLoopError,
    closed_loop_sensitivities,
    gamma,
    method_A,
    method_B,
    predict_signals,
)
from .hosidf_open import C_n, ResetController, ResetFixedPointError, SinusoidSpec, classical_Hn
from .hybridsim import (
    DivergenceError,
    NotConvergedError,
    SimConfig,
    ZenoError,
    export_csv,
    prediction_error,
    simulate,
    steady_state,
)
from .linsys import SingularFrequencyError, StateSpace, TransferFunction
from .verify import NotHurwitzError, hbeta_check, open_loop_condition, to_json

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_ASSUMPTION = 0, 2, 3, 4

_num = {"type": "number"}
_numlist = {"type": "array", "items": _num}
_poly = {"type": "array", "items": _num, "minItems": 1}
_lti = {
    "type": "object",
    "oneOf": [
        {"required": ["num", "den"]},
        {"required": ["A", "B", "C", "D"]},
    ],
    "properties": {
        "num": _poly, "den": _poly,
        "A": {"type": "array"}, "B": {"type": "array"},
        "C": {"type": "array"}, "D": {"type": "array"},
    },
    "additionalProperties": False,
}
_sim_props = {f.name: ({"type": ["integer", "null"], "minimum": 1001}
                       if f.name == "steps_per_period" else
                       {"type": "integer", "minimum": 0}
                       if f.name in ("periods", "transient_periods", "record_every") else
                       {"type": "boolean"} if f.name == "auto_transient" else
                       {"type": "number", "exclusiveMinimum": 0})
              for f in fields(SimConfig)}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["system", "excitation"],
    "additionalProperties": False,
    "properties": {
        "system": {
            "type": "object",
            "required": ["case"],
            "additionalProperties": False,
            "properties": {
                "case": {"enum": ["pci_pid", "tpci_pid", "fig5", "custom"]},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {f.name: _num for f in fields(CaseStudyParams)},
                },
                "shaping": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"Q1": _num, "Q2": _num, "k_cs": _num},
                },
                "controller": {
                    "type": "object",
                    "required": ["A", "B", "C", "D", "gamma"],
                    "additionalProperties": False,
                    "properties": {"A": {"type": "array"}, "B": {"type": "array"},
                                   "C": {"type": "array"}, "D": {"type": "array"},
                                   "gamma": _num},
                },
                "c_alpha": _lti,
                "plant": _lti,
            },
        },
        "excitation": {
            "type": "object",
            "required": ["freqs_hz"],
            "additionalProperties": False,
            "properties": {
                "amplitude": {"type": "number", "exclusiveMinimum": 0},
                "freqs_hz": {"type": "array",
                             "items": {"type": "number", "exclusiveMinimum": 0}},
                "units": {"const": "Hz"},
            },
        },
        "n_h": {"type": "integer", "minimum": 1},
        "sim": {"type": "object", "additionalProperties": False, "properties": _sim_props},
        "predict": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"samples": {"type": "integer", "minimum": 2},
                           "periods": {"type": "integer", "minimum": 1}},
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta": _num,
                "P": {"type": "number", "exclusiveMinimum": 0},
                "omega_grid": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                "deltas_s": _numlist,
                "two_reset": {"type": "boolean"},
            },
        },
        "steady_periods": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
        "jobs": {"type": "integer", "minimum": 1},
    },
}


class ConfigError(ValueError):
    pass


class AssumptionError(RuntimeError):
    pass


def validate_config(cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {path}: {e.message}")


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _lti(d: dict):
    if "num" in d:
        return TransferFunction(d["num"], d["den"])
    return StateSpace(d["A"], d["B"], d["C"], d["D"])


def _case_parts(system: dict):
    """``(rc, c_alpha, plant, shaping_template)`` from the system block."""
    case = system["case"]
    if case == "fig5":
        ex = build_fig5_example()
        return ex.setup.rc, ex.setup.c_alpha, ex.setup.plant, None
    if case == "custom":
        c = system.get("controller")
        if c is None:
            raise ConfigError("config error at system: custom case needs 'controller'")
        rc = ResetController(c["A"], c["B"], c["C"], c["D"], c["gamma"])
        ca = _lti(system["c_alpha"]) if "c_alpha" in system else TransferFunction.gain(1.0)
        p = _lti(system["plant"]) if "plant" in system else TransferFunction.gain(1.0)
        sf = ShapingFilter(1.0, **system["shaping"]) if "shaping" in system else None
        return rc, ca, p, sf
    params, sf = load_case(case)
    if "params" in system:
        params = CaseStudyParams.from_dict({**params.to_dict(), **system["params"]})
    if "shaping" in system:
        base = sf or ShapingFilter(1.0)
        sf = ShapingFilter(1.0, **{"Q1": base.Q1, "Q2": base.Q2, "k_cs": base.k_cs,
                                   **system["shaping"]})
    return build_pci(params), build_c_alpha(params), build_plant(), sf


class Run:
    """Resolved configuration plus system builders."""

    def __init__(self, cfg: dict):
        validate_config(cfg)
        self.cfg = cfg
        self.hash = config_hash(cfg)
        try:
            self.rc, self.c_alpha, self.plant, self.shaping = _case_parts(cfg["system"])
        except (ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"config error at system: {exc}") from exc
        ex = cfg["excitation"]
        self.freqs = [float(f) for f in ex["freqs_hz"]]
        self.amplitude = float(ex.get("amplitude", 1.0))
        self.n_h = int(cfg.get("n_h", 501))
        try:
            self.sim = SimConfig(**cfg.get("sim", {}))
        except ValueError as exc:
            raise ConfigError(f"config error at sim: {exc}") from exc
        self.K = int(cfg.get("steady_periods", 2))
        self.jobs = int(cfg.get("jobs", 1))

    def closed_loop(self, omega: float) -> ClosedLoopSystem:
        sf = self.shaping.at(omega).state_space() if self.shaping is not None else None
        return ClosedLoopSystem(self.rc, self.c_alpha, self.plant, sf)

    def header(self) -> str:
        return f"resetfreq {__version__} config-sha256={self.hash}"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not np.isfinite(v):
        return "" if np.isinf(v) else "nan"
    return f"{v:.12g}"


def _db(z):
    m = abs(z)
    return 20 * np.log10(m) if m > 0 else -np.inf


def _deg(z):
    return float(np.degrees(np.angle(z))) if z != 0 else None


def write_csv(path: Path, header: str, columns, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {header}\n")
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in r) + "\n")


def _pmap(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# --- per-frequency workers (module level so they pickle) ---------------------

def _bode_open_rows(args):
    run, f = args
    w = 2 * np.pi * f
    rows = []
    for n in range(1, run.n_h + 1, 2):
        c = C_n(run.rc, w, n)
        h = classical_Hn(run.rc, w, n)
        rows.append((f, n, _db(c), _deg(c), _db(h), _deg(h)))
    return rows


def _bode_closed_rows(args):
    run, f, method = args
    w = 2 * np.pi * f
    sys_ = run.closed_loop(w)
    orders = list(range(1, run.n_h + 1, 2))
    try:
        g = gamma(sys_, w, run.n_h)
        sens = closed_loop_sensitivities(sys_, w, run.n_h, gamma_value=g.gamma)
        psi = dict(zip(g.orders.tolist(), g.psi.tolist()))
        flag = ""
    except (GammaSingularityError, MarginalLoopError, SingularFrequencyError,
            ResetFixedPointError) as exc:
        g, sens, psi, flag = None, None, {}, type(exc).__name__
    rows = []
    for n in orders:
        row = [f, n]
        if sens is None:
            row += [None] * 6 + [None, None]
        else:
            S, T, CS = sens.S_n(n), sens.T_n(n), sens.CS_n(n)
            row += [_db(S), _deg(S), _db(T), _deg(T), _db(CS), _deg(CS),
                    g.gamma, psi.get(n)]
        if method in ("A", "all"):
            if n == 1:
                S, T, CS = method_A(sys_, w)
                row += [_db(S), _deg(S), _db(T), _deg(T)]
            else:
                row += [None] * 4
        if method in ("B", "all"):
            S, T, CS = method_B(sys_, w, n)
            row += [_db(S), _deg(S), _db(T), _deg(T)]
        row.append(flag)
        rows.append(row)
    return rows


def _simulate_one(run, f):
    w = 2 * np.pi * f
    sys_ = run.closed_loop(w)
    tr = simulate(sys_, SinusoidSpec(run.amplitude, w), run.sim)
    ss = steady_state(tr, K=run.K, tol=run.sim.periodicity_tol)
    return sys_, tr, ss


def _compare_one(args):
    run, f, methods = args
    w = 2 * np.pi * f
    sys_, tr, ss = _simulate_one(run, f)
    e = ss.signals["e"]
    peak = float(np.max(np.abs(e)))
    two = all(c == 2 for c in ss.reset_counts)
    out = {
        "f_hz": f,
        "n_h": run.n_h,
        "resets_per_period": ss.resets_per_period,
        "reset_counts": list(ss.reset_counts),
        "two_reset": two,
        "periodicity_residual": ss.residual,
        "peak_e_sim": peak,
        "methods": {},
        "warnings": [],
    }
    if not two:
        out["warnings"].append(
            "multiple-reset: more than two resets per period; the harmonic "
            "predictions assume exactly two")
    for m in methods:
        pr = predict_signals(sys_, run.amplitude, w, run.n_h, ss.t, method=m)
        pe = prediction_error(e, pr["e"])
        out["methods"][m] = {"PE": pe, "PE_rel": pe / peak if peak else None}
    return out


# --- commands -----------------------------------------------------------------

def cmd_bode_open(run: Run, out: Path, method: str) -> int:
    rows = [r for chunk in _pmap(_bode_open_rows, [(run, f) for f in run.freqs], run.jobs)
            for r in chunk]
    write_csv(out / "bode_open.csv", run.header(),
              ["f_hz", "n", "Cn_mag_db", "Cn_phase_deg", "Hn_mag_db", "Hn_phase_deg"], rows)
    return EXIT_OK


def cmd_bode_closed(run: Run, out: Path, method: str) -> int:
    cols = ["f_hz", "n", "S_mag_db", "S_phase_deg", "T_mag_db", "T_phase_deg",
            "CS_mag_db", "CS_phase_deg", "gamma", "psi_n"]
    if method in ("A", "all"):
        cols += ["A_S_mag_db", "A_S_phase_deg", "A_T_mag_db", "A_T_phase_deg"]
    if method in ("B", "all"):
        cols += ["B_S_mag_db", "B_S_phase_deg", "B_T_mag_db", "B_T_phase_deg"]
    cols.append("flag")
    chunks = _pmap(_bode_closed_rows, [(run, f, method) for f in run.freqs], run.jobs)
    write_csv(out / "bode_closed.csv", run.header(), cols, [r for c in chunks for r in c])
    return EXIT_OK


def cmd_predict(run: Run, out: Path, method: str) -> int:
    pcfg = run.cfg.get("predict", {})
    samples = int(pcfg.get("samples", 1024))
    periods = int(pcfg.get("periods", 1))
    m = "new" if method == "all" else method
    for f in run.freqs:
        w = 2 * np.pi * f
        t = np.arange(samples * periods) * (1.0 / f) / samples
        pr = predict_signals(run.closed_loop(w), run.amplitude, w, run.n_h, t, method=m)
        write_csv(out / f"predict_{_fmt(f)}hz.csv", run.header(),
                  ["t", "e_pre", "y_pre", "u_pre"],
                  zip(t, pr["e"], pr["y"], pr["u"]))
    return EXIT_OK


def cmd_simulate(run: Run, out: Path, method: str) -> int:
    out.mkdir(parents=True, exist_ok=True)
    for f in run.freqs:
        _, tr, ss = _simulate_one(run, f)
        with open(out / f"trajectory_{_fmt(f)}hz.csv", "w", encoding="utf-8") as fh:
            export_csv(tr, fh, run.header())
        rec = {"f_hz": f, "resets_per_period": ss.resets_per_period,
               "reset_counts": list(ss.reset_counts),
               "periodicity_residual": ss.residual, "periods": ss.periods,
               "backend": tr.backend, "dt": tr.dt, "config_hash": run.hash}
        (out / f"steady_state_{_fmt(f)}hz.json").write_text(
            json.dumps(rec, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_compare(run: Run, out: Path, method: str, strict: bool = False) -> int:
    methods = ["new", "A", "B"] if method == "all" else [method]
    results = _pmap(_compare_one, [(run, f, methods) for f in run.freqs], run.jobs)
    report = {"version": __version__, "config_hash": run.hash, "results": results}
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for r in results:
        for wmsg in r["warnings"]:
            print(f"warning: {r['f_hz']:g} Hz: {wmsg}", file=sys.stderr)
    if strict and any(not r["two_reset"] for r in results):
        return EXIT_ASSUMPTION
    return EXIT_OK


def cmd_verify(run: Run, out: Path, method: str, strict: bool = False) -> int:
    vcfg = run.cfg.get("verify", {})
    report = {"version": __version__, "config_hash": run.hash}
    deltas = vcfg.get("deltas_s") or sorted({0.5 / f for f in run.freqs}) or [1e-3]
    ol = open_loop_condition(run.rc, deltas)
    report["open_loop_condition"] = json.loads(to_json(ol))
    failed = not ol.passed
    if "beta" in vcfg and "P" in vcfg:
        lo, hi, num = vcfg.get("omega_grid", [1e-1, 1e5, 400])
        grid = np.logspace(np.log10(lo), np.log10(hi), int(num))
        hb = hbeta_check(ClosedLoopSystem(run.rc, run.c_alpha, run.plant),
                         vcfg["beta"], vcfg["P"], grid)
        d = json.loads(to_json(hb))
        d.pop("omega")
        d["passed"] = hb.passed
        report["hbeta"] = d
        failed |= not hb.passed
    if vcfg.get("two_reset", True) and run.freqs:
        tr = []
        for f in run.freqs:
            _, _, ss = _simulate_one(run, f)
            two = all(c == 2 for c in ss.reset_counts)
            tr.append({"f_hz": f, "classification": "two-reset" if two else "multiple-reset",
                       "resets_per_period": ss.resets_per_period,
                       "periodicity_residual": ss.residual})
        report["two_reset"] = tr
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_ASSUMPTION if (strict and failed) else EXIT_OK


COMMANDS = {
    "bode-open": cmd_bode_open,
    "bode-closed": cmd_bode_closed,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="resetfreq", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"resetfreq {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--nh", type=int, default=None, help="highest harmonic order")
        p.add_argument("--freqs", default=None,
                       help="comma-separated excitation frequencies in Hz")
        p.add_argument("--method", choices=["new", "A", "B", "all"], default="new")
        if name in ("compare", "verify"):
            p.add_argument("--strict", action="store_true",
                           help="exit 4 when an analysis assumption is violated")
    return ap


def _load_config(args) -> dict:
    try:
        cfg = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config error at <root>: must be an object")
    if args.nh is not None:
        cfg["n_h"] = args.nh
    if args.freqs is not None:
        try:
            freqs = [float(x) for x in args.freqs.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"config error at --freqs: {exc}") from exc
        cfg.setdefault("excitation", {})["freqs_hz"] = freqs
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        run = Run(cfg)
        out = Path(args.out or cfg.get("output", "."))
        fn = COMMANDS[args.command]
        if args.command in ("compare", "verify"):
            return fn(run, out, args.method, strict=args.strict)
        return fn(run, out, args.method)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except NotConvergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (DivergenceError, ZenoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NotHurwitzError, ResetFixedPointError, AssumptionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
