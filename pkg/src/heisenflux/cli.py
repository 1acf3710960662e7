"""Command-line front end.

    heisenflux {spectrum,flow,wavefn,propagate,pathint,check} [--config FILE] [--set KEY=VALUE ...] [--out PATH]

Parameters come from a JSON config file and ``--set`` overrides (values are
parsed as JSON when possible, e.g. ``--set lambda=0.5 --set slices=[4,8]``).
Unknown keys are rejected. Output goes to ``--out`` (CSV or JSON chosen by
the extension, ``.jsonl`` for batch records) or to stdout. Files are written
atomically once the whole result is available.

Exit codes: 0 ok, 1 failed invariant check, 2 usage, config or domain error.
Errors are reported as a single JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from typing import Any

import numpy as np

from .checks import run_checks
from .errors import HeisenfluxError, InputError
from .hilbert import HamiltonianParams, RadialGrid
from .models import (ScatteringLabel, flow_to_rows, free_wavefunction, oscillator_wavefunction,
                     spectral_flow)
from .propagators import (DEFAULT_WICK_LADDER, PropagatorRequest, TimeContour, propagator_pathintegral,
                          propagator_spectral_free, propagator_spectral_oscillator, wick_extrapolate)

__all__ = ["main", "COMMANDS"]

_PHYS = {"mass": 1.0, "omega": 1.0, "mu": 0.0, "nu": 0.0, "hbar": 1.0}
_POINT = {"r_i": 1.0, "theta_i": 0.0, "r_f": 1.0, "theta_f": 0.0, "delta_t": 1.0,
          "contour": "euclidean", "delta": 0.0, "ell_cutoff": None}

COMMANDS: dict[str, dict[str, Any]] = {
    "spectrum": {**_PHYS, "lambda": 0.0, "n_r_max": 6, "ell_window": 6},
    "flow": {**_PHYS, "lambda_min": 0.0, "lambda_max": 2.0, "n_points": 41, "n_r_max": 12, "ell_window": 20},
    "wavefn": {**_PHYS, "lambda": 0.0, "kind": "oscillator", "n_r": 0, "ell": 0, "energy": 1.0,
               "n_nodes": 2000, "r_min": None, "r_max": None},
    "propagate": {**_PHYS, **_POINT, "lambda": 0.0, "method": "spectral", "extrapolate": False,
                  "wick_ladder": list(DEFAULT_WICK_LADDER), "n_slices": 32, "kernel": "bessel",
                  "workers": 1, "batch": None},
    "pathint": {**_PHYS, **_POINT, "lambda": 0.0, "slices": [4, 8, 16, 32], "kernel": "bessel",
                "workers": 1},
    "check": {"checks": None, "tolerances": {}, "inject_fault": None, "seed": 0},
}


class UsageError(Exception):
    pass


# --- formatting -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".17g")


def _json(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return _fmt(x) if math.isfinite(x) else json.dumps(None)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    folder = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".heisenflux-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _out_format(out: str | None, default: str) -> str:
    if out is None:
        return default
    ext = os.path.splitext(out)[1].lower()
    if ext in (".csv", ".json", ".jsonl"):
        return ext[1:]
    raise UsageError(f"--out must end in .csv, .json or .jsonl, got {out!r}")


# --- configuration --------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(command: str, path: str | None, overrides: list[str]) -> dict:
    cfg = dict(COMMANDS[command])
    given: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed JSON config: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        given.update(data)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        given[key.strip()] = _parse_value(value)
    unknown = sorted(set(given) - set(cfg))
    if unknown:
        raise UsageError(f"unknown config keys for {command!r}: {unknown}")
    cfg.update(given)
    return cfg


def _params(cfg) -> HamiltonianParams:
    return HamiltonianParams(**{k: cfg[k] for k in _PHYS})


def _request(cfg) -> PropagatorRequest:
    data = {k: cfg[k] for k in ("r_i", "theta_i", "r_f", "theta_f", "delta_t", "ell_cutoff", *_PHYS)}
    data["lambda"] = cfg["lambda"]
    data["contour"] = {"kind": cfg["contour"], "delta": cfg["delta"]}
    return PropagatorRequest.from_dict(data)


# --- commands -------------------------------------------------------------------

def cmd_spectrum(cfg, fmt):
    lams = cfg["lambda"] if isinstance(cfg["lambda"], list) else [cfg["lambda"]]
    blocks = spectral_flow(lams, _params(cfg), int(cfg["n_r_max"]), int(cfg["ell_window"]))
    rows = sorted(flow_to_rows(blocks), key=lambda t: (t[0], t[3], t[2], t[1]))
    if fmt == "json":
        return _json([{"lambda": a, "n_r": n, "ell": ell, "energy": e} for a, n, ell, e in rows]) + "\n"
    return _csv(["lambda", "n_r", "ell", "energy"], rows)


def cmd_flow(cfg, fmt):
    n = int(cfg["n_points"])
    if n < 1:
        raise InputError("n_points must be >= 1")
    lams = np.linspace(float(cfg["lambda_min"]), float(cfg["lambda_max"]), n)
    blocks = spectral_flow(lams, _params(cfg), int(cfg["n_r_max"]), int(cfg["ell_window"]))
    if fmt == "json":
        return _json([{"lambda": b.lam, "complete_below": b.complete_below,
                       "levels": [{"n_r": lv.n_r, "ell": lv.ell, "energy": lv.energy} for lv in b.levels]}
                      for b in blocks]) + "\n"
    return _csv(["lambda", "n_r", "ell", "energy"], flow_to_rows(blocks))


def cmd_wavefn(cfg, fmt):
    p = _params(cfg)
    lam = float(cfg["lambda"])
    if cfg["kind"] == "oscillator":
        g = RadialGrid.for_oscillator(p, int(cfg["n_nodes"])) if cfg["r_min"] is None else \
            RadialGrid(cfg["r_min"], cfg["r_max"], int(cfg["n_nodes"]))
        mode = oscillator_wavefunction(int(cfg["n_r"]), int(cfg["ell"]), p, lam, g)
    elif cfg["kind"] == "free":
        g = RadialGrid(cfg["r_min"] or 1e-4, cfg["r_max"] or 20.0, int(cfg["n_nodes"]))
        mode = free_wavefunction(ScatteringLabel(float(cfg["energy"]), int(cfg["ell"])), p, lam, g)
    else:
        raise InputError("kind must be 'oscillator' or 'free'")
    if fmt == "json":
        return _json({"ell": mode.ell, "grid": g.descriptor(), "r": mode.grid.nodes.tolist(),
                      "re_f": mode.samples.real.tolist(), "im_f": mode.samples.imag.tolist()}) + "\n"
    return _csv(["r", "re_f", "im_f"], zip(g.nodes.tolist(), mode.samples.real.tolist(),
                                           mode.samples.imag.tolist()))


def _spectral(req: PropagatorRequest):
    return propagator_spectral_oscillator(req) if req.params.omega > 0.0 else propagator_spectral_free(req)


def _propagate_one(req: PropagatorRequest, cfg) -> dict:
    if cfg["extrapolate"]:
        if req.contour.kind != "wick":
            raise InputError("extrapolate needs contour = 'wick'")
        ladder = [float(d) for d in cfg["wick_ladder"]]
        value, err = wick_extrapolate(lambda q: _spectral(q).value, req, ladder)
        res = _spectral(req.replace(contour=TimeContour("wick", ladder[-1])))
        rec = res.record(req)
        rec.update(value_re=value.real, value_im=value.imag, extrapolation_error=err,
                   contour={"kind": "real", "delta": 0.0, "extrapolated_from": ladder})
    else:
        res = _spectral(req)
        value = res.value
        rec = res.record(req)
    if cfg["method"] == "both":
        pi = propagator_pathintegral(req, int(cfg["n_slices"]), kind=cfg["kernel"], workers=int(cfg["workers"]))
        rec["pathint"] = {"value_re": pi.value.real, "value_im": pi.value.imag, "n_slices": pi.n_slices,
                          "kernel": pi.kind, "ell_cutoff": pi.ell_cutoff}
        rec["difference"] = abs(pi.value - value)
    elif cfg["method"] != "spectral":
        raise InputError("method must be 'spectral' or 'both'")
    return rec


def cmd_propagate(cfg, fmt):
    if cfg["batch"] is not None:
        try:
            with open(cfg["batch"]) as fh:
                lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        except OSError as exc:
            raise UsageError(f"cannot read batch file: {exc}") from None
        recs = []
        for i, line in enumerate(lines, 1):
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UsageError(f"batch line {i}: {exc}") from None
            if not isinstance(data, dict):
                raise UsageError(f"batch line {i}: expected an object")
            recs.append(_propagate_one(PropagatorRequest.from_dict(data), cfg))
        if fmt == "json":
            return _json(recs) + "\n"
        return "".join(_json(r) + "\n" for r in recs)
    rec = _propagate_one(_request(cfg), cfg)
    if fmt == "csv":
        return _csv(["value_re", "value_im", "ell_cutoff", "tail_bound"],
                    [(rec["value_re"], rec["value_im"], rec["ell_cutoff"], rec["tail_bound"])])
    return _json(rec) + "\n"


def cmd_pathint(cfg, fmt):
    req = _request(cfg)
    ref = _spectral(req)
    rows = []
    for n in cfg["slices"]:
        pi = propagator_pathintegral(req, int(n), kind=cfg["kernel"], workers=int(cfg["workers"]))
        err = abs(pi.value - ref.value)
        rows.append((int(n), pi.value.real, pi.value.imag, err, err / abs(ref.value)))
    if fmt == "json":
        return _json({"spectral": {"value_re": ref.value.real, "value_im": ref.value.imag,
                                   "ell_cutoff": ref.ell_cutoff, "tail_bound": ref.tail_bound},
                      "rows": [dict(zip(("n_slices", "value_re", "value_im", "abs_err", "rel_err"), r))
                               for r in rows]}) + "\n"
    return _csv(["n_slices", "value_re", "value_im", "abs_err", "rel_err"], rows)


def cmd_check(cfg, fmt):
    names = cfg["checks"]
    if names is not None and not isinstance(names, list):
        raise UsageError("checks must be a list of check names")
    if not isinstance(cfg["tolerances"], dict):
        raise UsageError("tolerances must be an object")
    results = run_checks(names, cfg["tolerances"], cfg["inject_fault"], int(cfg["seed"]))
    ok = all(r.passed for r in results)
    report = [{k: v for k, v in r.to_dict().items() if k != "seconds"} for r in results]
    if fmt == "csv":
        text = _csv(["name", "residual", "tolerance", "passed"],
                    [(d["name"], d["residual"], d["tolerance"], d["passed"]) for d in report])
    else:
        text = _json({"passed": ok, "checks": report}) + "\n"
    return text, (0 if ok else 1)


_HANDLERS = {"spectrum": (cmd_spectrum, "csv"), "flow": (cmd_flow, "csv"), "wavefn": (cmd_wavefn, "csv"),
             "propagate": (cmd_propagate, "json"), "pathint": (cmd_pathint, "csv"), "check": (cmd_check, "json")}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heisenflux", description="Spectra, propagators and invariant checks "
                                 "for the flux-pierced plane.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"{name} (keys: {', '.join(COMMANDS[name])})")
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--out", help="output path (.csv, .json or .jsonl)")
    return ap


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(_json({"error": kind, "message": message}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else _fail("UsageError", "invalid arguments", 2)
    handler, default_fmt = _HANDLERS[args.command]
    try:
        fmt = _out_format(args.out, default_fmt)
        cfg = load_config(args.command, args.config, args.set)
        result = handler(cfg, fmt)
        text, code = result if isinstance(result, tuple) else (result, 0)
        _write(text, args.out)
    except UsageError as exc:
        return _fail("UsageError", str(exc), 2)
    except HeisenfluxError as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except (TypeError, ValueError, KeyError) as exc:
        return _fail("ConfigError", f"{type(exc).__name__}: {exc}", 2)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
