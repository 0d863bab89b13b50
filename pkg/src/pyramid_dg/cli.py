"""Command-line driver: one study per invocation, CSV out plus a JSON manifest.

Examples::

    pyramid-dg --cmd project --gamma 0.2,0.5,1 --N 1..6 --out proj.csv
    pyramid-dg --cmd wave --N 1..3 --K1D 2,4,8 --out wave.csv
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, experiments
from .errors import InvalidParameterError, PyramidDGError
from .orthopoly import MAX_ORDER

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

COMMANDS = ("project", "cheb", "eig", "advect", "wave", "specradius")

HEADERS = {
    "cheb": ["gamma", "iteration", "residual", "predicted_bound"],
    "eig": ["gamma", "N", "lambda_min", "lambda_max", "dense_min", "dense_max"],
    "advect": ["N", "K1D", "alpha", "l2_error", "energy_drift"],
    "wave": ["N", "K1D", "l2_error", "measured_rate"],
    "specradius": ["N", "K1D", "rho", "rho_times_h_over_const"],
}

DEFAULTS = {
    "N": None,
    "K1D": None,
    "gamma": [0.2, 0.5, 1.0],
    "alpha": 1.0,
    "delta": None,
    "seed": 0,
    "tol": 1e-10,
    "max_iter": 200,
    "final_time": 0.5,
    "out": "results.csv",
}


class ConfigError(InvalidParameterError):
    pass


def parse_int_list(text) -> list[int]:
    """``"3"``, ``"1,2,4"`` or the inclusive range ``"1..6"``."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..")
        vals = list(range(int(lo), int(hi) + 1))
    else:
        vals = [int(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError(f"empty range {text!r}")
    return vals


def parse_float_list(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(v) for v in text]
    vals = [float(v) for v in str(text).split(",") if v.strip()]
    if not vals:
        raise ConfigError(f"empty list {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pyramid-dg", description=__doc__.splitlines()[0])
    p.add_argument("--cmd", choices=COMMANDS)
    p.add_argument("--N", help="order, list '1,2' or range '1..6'")
    p.add_argument("--K1D", help="hexahedra per cube edge, list or range")
    p.add_argument("--gamma", help="comma-separated warp amounts")
    p.add_argument("--alpha", type=float, help="advection upwinding, 0 central .. 1 upwind")
    p.add_argument("--delta", type=float, help="vertex perturbation (default 0.1 * 2 / K1D)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--final-time", dest="final_time", type=float)
    p.add_argument("--out", help="CSV path; the manifest goes next to it")
    p.add_argument("--config", help="JSON file of the same keys; flags take precedence")
    return p


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            cfg.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for key, val in vars(args).items():
        if key != "config" and val is not None:
            cfg[key] = val
    cmd = cfg.get("cmd")
    if cmd not in COMMANDS:
        raise ConfigError(f"--cmd must be one of {', '.join(COMMANDS)}")
    if cfg["N"] is None:
        # the Chebyshev study is meant for a high-order element
        cfg["N"] = [5] if cmd == "cheb" else [1, 2, 3]
    cfg["N"] = parse_int_list(cfg["N"])
    cfg["gamma"] = parse_float_list(cfg["gamma"])
    if cfg["K1D"] is not None:
        cfg["K1D"] = parse_int_list(cfg["K1D"])
    if any(n < 0 or n > MAX_ORDER for n in cfg["N"]):
        raise ConfigError(f"N must lie in 0..{MAX_ORDER}")
    if cfg["K1D"] is not None and any(k < 1 for k in cfg["K1D"]):
        raise ConfigError("K1D must be >= 1")
    if any(g < 0 or g >= 2 for g in cfg["gamma"]):
        raise ConfigError("gamma must lie in [0, 2)")
    if not 0 <= cfg["alpha"] <= 1:
        raise ConfigError("alpha must lie in [0, 1]")
    if cfg["delta"] is not None and cfg["delta"] < 0:
        raise ConfigError("delta must be nonnegative")
    if cfg["tol"] <= 0 or cfg["max_iter"] < 1 or cfg["final_time"] <= 0:
        raise ConfigError("tol, max_iter and final_time must be positive")
    return cfg


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _study_rows(cfg):
    """Yield (header, row) pairs; the header is fixed by the first row."""
    cmd = cfg["cmd"]
    Ns, K1Ds = cfg["N"], cfg["K1D"]
    if cmd == "project":
        if K1Ds is None:
            yield ["basis", "gamma", "N", "l2_error"], None
            yield from ((None, r) for r in experiments.projection_vs_gamma(cfg["gamma"], Ns))
        else:
            yield ["basis", "K1D", "N", "l2_error"], None
            for N in Ns:
                rows = experiments.projection_vs_h(K1Ds, N, cfg["delta"], cfg["seed"])
                yield from ((None, r) for r in rows)
        return
    yield HEADERS[cmd], None
    if cmd == "cheb":
        for g in cfg["gamma"]:
            N = Ns[-1]
            rep = experiments.chebyshev_study(g, N, cfg["tol"], cfg["max_iter"], cfg["seed"])
            for it, (res, pred) in enumerate(zip(rep.iterates, rep.predicted)):
                yield None, (g, it, res, pred)
            if not rep.converged:
                raise NumericalFailure(f"Chebyshev did not converge for gamma={g} in {cfg['max_iter']} iterations")
    elif cmd == "eig":
        yield from ((None, r) for r in experiments.eig_study(cfg["gamma"], Ns))
    elif cmd == "advect":
        for N in Ns:
            for K1D in K1Ds or [2, 4]:
                err, energies = experiments.advection_run(K1D, N, cfg["alpha"], cfg["final_time"],
                                                          delta=cfg["delta"], seed=cfg["seed"])
                yield None, (N, K1D, cfg["alpha"], err, (energies[-1] - energies[0]) / energies[0])
    elif cmd == "wave":
        for N in Ns:
            prev = None
            for K1D in K1Ds or [2, 4]:
                err, _ = experiments.wave_run(K1D, N, cfg["final_time"], cfg["delta"], cfg["seed"])
                rate = "" if prev is None else experiments.convergence_rate([prev[1], err], [prev[0], K1D])[0]
                prev = (K1D, err)
                yield None, (N, K1D, err, rate)
    elif cmd == "specradius":
        delta = 0.0 if cfg["delta"] is None else cfg["delta"]
        for N in Ns:
            for K1D in K1Ds or [2]:
                est, ratio = experiments.spectral_radius(K1D, N, delta, cfg["seed"])
                if not est.converged:
                    raise NumericalFailure(f"Arnoldi did not converge (best estimate {est.rho!r})")
                yield None, (N, K1D, est.rho, ratio)


class NumericalFailure(PyramidDGError):
    pass


def run(cfg: dict) -> int:
    """Run one study; returns the exit status. Rows are flushed as they are produced."""
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    status, message = EXIT_OK, None
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                for header, row in _study_rows(cfg):
                    if header is not None:
                        w.writerow(header)
                    else:
                        if any(isinstance(v, float) and not np.isfinite(v) for v in row):
                            raise NumericalFailure(f"non-finite value in row {row}")
                        w.writerow([fmt(v) for v in row])
                    fh.flush()
        except (PyramidDGError, FloatingPointError, np.linalg.LinAlgError) as exc:
            status = EXIT_CONFIG if isinstance(exc, InvalidParameterError) else EXIT_NUMERICAL
            message = f"{type(exc).__name__}: {exc}"
            w.writerow(["ERROR", message])
    manifest = {
        "config": {k: v for k, v in cfg.items()},
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "status": status,
        "error": message,
    }
    out.with_suffix(".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    if message:
        print(message, file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except InvalidParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
