"""Config-driven experiment runner.

One JSON config file drives every pipeline; flags mirror the top-level
config keys and override the file.  Artifacts: a series CSV with header
``n,value_re,value_im`` (17 significant digits, C locale) and a JSON
report, both written atomically.  Exit status: 0 when the pipeline verdict
passes, 2 when it fails, 1 on configuration or execution errors.

Pipelines: residue, nonmeasurable, connes, integrate, spectral-formula,
modulation, sweep (runs an inner pipeline over a K list in a worker pool,
emitting a consolidated ``K,n,value_re,value_im`` CSV).

The matrix-size budget can be set with the ``RESIDUELAB_MATRIX_BUDGET``
environment variable or the ``budget`` config key.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .quadrature import QuadratureError
from .quantize import BudgetError, SupportLeakageError
from .spectral import modulation_profile, tail_energy
from .symbols import (
    SupportError,
    bessel_weight_radial,
    bump,
    make_classical_symbol,
    make_nonmeasurable_symbol,
    make_product_symbol,
    unit_bump,
    zero_symbol,
)
from .symbols import residue_series
from .traces import (
    SurrogateConfig,
    connes_check,
    double_exp_grid,
    l2_integration_check,
    measurability_verdict,
    prepare_operator,
    torus_spectral_formula_check,
)

SCHEMA_VERSION = 1

PIPELINES = (
    "residue",
    "connes",
    "nonmeasurable",
    "integrate",
    "spectral-formula",
    "modulation",
    "sweep",
)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config schema: {key: (type, validator or None)}; unknown keys rejected

_TOL_KEYS = {
    "measurability": float,
    "relative_gap": float,
    "integrate_relative_gap": float,
    "band_width_min": float,
    "slope": float,
    "absolute_floor": float,
}

DEFAULT_TOLERANCES = {
    "measurability": 0.05,
    "relative_gap": 0.10,
    "integrate_relative_gap": 0.02,
    "band_width_min": 1.5,
    "slope": 0.1,
    "absolute_floor": 0.05,
}

_N_GRID_KINDS = ("double-exp", "linear", "dyadic", "explicit")
_SYMBOL_KINDS = ("classical-bump", "nonmeasurable", "product-bump", "zero")


def default_config() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "pipeline": "connes",
        "d": 1,
        "K": 256,
        "n_grid": None,
        "symbol": {"kind": "classical-bump", "center": 0.0, "width": 2.5,
                   "amplitude": "unit-integral", "cutoff": 1.0},
        "tolerances": dict(DEFAULT_TOLERANCES),
        "output": {"csv": None, "json": None},
        "seed": 0,
        "workers": 1,
        "budget": None,
        "x_quad_nodes": None,
        "n_diag": 100000,
        "levels": 9,
        "sweep": {"pipeline": "connes", "K_list": []},
    }


def _reject_unknown(seen: dict, allowed, path: str):
    for key in seen:
        if key not in allowed:
            raise ConfigError(f"unknown config key {path}{key!r}")


def _merge(base: dict, overlay: dict, path: str = "") -> dict:
    out = dict(base)
    for k, v in overlay.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def validate_config(cfg: dict) -> dict:
    _reject_unknown(cfg, default_config().keys(), "")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}"
        )
    if cfg["pipeline"] not in PIPELINES:
        raise ConfigError(f"pipeline must be one of {PIPELINES}, got {cfg['pipeline']!r}")
    d = cfg["d"]
    if not isinstance(d, int) or d not in (1, 2, 3):
        raise ConfigError(f"d must be 1, 2 or 3, got {d!r}")
    if not isinstance(cfg["K"], int) or cfg["K"] < 1:
        raise ConfigError(f"K must be a positive integer, got {cfg['K']!r}")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("workers must be a positive integer")
    if cfg["budget"] is not None and (not isinstance(cfg["budget"], int) or cfg["budget"] < 1):
        raise ConfigError("budget must be a positive integer or null")
    if not isinstance(cfg["n_diag"], int) or cfg["n_diag"] < 10:
        raise ConfigError("n_diag must be an integer >= 10")
    if not isinstance(cfg["levels"], int) or cfg["levels"] < 1:
        raise ConfigError("levels must be a positive integer")

    tol = cfg["tolerances"]
    _reject_unknown(tol, _TOL_KEYS, "tolerances.")
    for k, v in tol.items():
        if not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"tolerances.{k} must be a nonnegative number")

    sym = cfg["symbol"]
    _reject_unknown(sym, ("kind", "center", "width", "amplitude", "cutoff"), "symbol.")
    if sym.get("kind") not in _SYMBOL_KINDS:
        raise ConfigError(f"symbol.kind must be one of {_SYMBOL_KINDS}")
    if sym.get("kind") in ("classical-bump", "product-bump"):
        width = sym.get("width", 2.5)
        if not isinstance(width, (int, float)) or width <= 0:
            raise ConfigError("symbol.width must be positive")
        cut = sym.get("cutoff", 1.0)
        if not isinstance(cut, (int, float)) or cut < 1.0:
            raise ConfigError("symbol.cutoff must be >= 1")

    grid = cfg["n_grid"]
    if grid is not None:
        _reject_unknown(
            grid,
            ("kind", "t_start", "t_stop", "t_step", "start", "stop", "step", "values"),
            "n_grid.",
        )
        if grid.get("kind") not in _N_GRID_KINDS:
            raise ConfigError(f"n_grid.kind must be one of {_N_GRID_KINDS}")

    out = cfg["output"]
    _reject_unknown(out, ("csv", "json"), "output.")

    sweep = cfg["sweep"]
    _reject_unknown(sweep, ("pipeline", "K_list"), "sweep.")
    if cfg["pipeline"] == "sweep":
        if sweep.get("pipeline") not in PIPELINES or sweep["pipeline"] == "sweep":
            raise ConfigError("sweep.pipeline must name a non-sweep pipeline")
        ks = sweep.get("K_list")
        if not isinstance(ks, list) or not ks:
            raise ConfigError("sweep.K_list must be a non-empty list of increasing integers")
        if any(not isinstance(k, int) or k < 1 for k in ks) or any(
            b <= a for a, b in zip(ks, ks[1:])
        ):
            raise ConfigError("sweep.K_list must be strictly increasing positive integers")
    return cfg


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = default_config()
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config root must be an object")
        cfg = _merge(cfg, raw)
    cfg = _merge(cfg, overrides)
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# symbol and grid construction


def build_symbol(cfg: dict):
    d = cfg["d"]
    spec = cfg["symbol"]
    kind = spec["kind"]
    if kind == "zero":
        return zero_symbol(d)
    if kind == "nonmeasurable":
        return make_nonmeasurable_symbol(d)
    center = spec.get("center", 0.0)
    width = spec.get("width", 2.5)
    amplitude = spec.get("amplitude", "unit-integral")
    if amplitude == "unit-integral":
        w, support = unit_bump(center, width, d)
    else:
        w, _ = bump(center, width, float(amplitude), d)
        c = np.broadcast_to(np.asarray(center, dtype=float), (d,))
        h = np.broadcast_to(np.asarray(width, dtype=float), (d,))
        from .symbols import box as _box

        support = _box(c - h, c + h)
    if kind == "classical-bump":
        cutoff = float(spec.get("cutoff", 1.0))

        def principal(x, s):
            return np.asarray(w(x[..., 0]) if d == 1 else w(x), dtype=complex) + 0.0 * s[..., 0]

        return make_classical_symbol(d, principal, cutoff, support)
    if kind == "product-bump":
        g_r, g_log = bessel_weight_radial(d)
        return make_product_symbol(w, None, d, support, g_radial=g_r, g_radial_log=g_log)
    raise ConfigError(f"unhandled symbol kind {kind!r}")


def build_n_grid(cfg: dict, symbol_level: bool):
    grid = cfg["n_grid"]
    if grid is None:
        if symbol_level:
            ts = np.round(np.arange(0.6, 7.0001, 0.4), 10)
            return double_exp_grid(ts), tuple(ts)
        return None, None
    kind = grid["kind"]
    if kind == "double-exp":
        ts = np.round(
            np.arange(grid.get("t_start", 0.6), grid.get("t_stop", 7.0) + 1e-9,
                      grid.get("t_step", 0.4)), 10,
        )
        if len(ts) == 0 or ts[0] < 0.05 or ts[-1] > 7.5:
            raise ConfigError("double-exp grid t values must lie in [0.05, 7.5]")
        return double_exp_grid(ts), tuple(ts)
    if kind == "linear":
        start, stop, step = grid.get("start", 16), grid.get("stop", 256), grid.get("step", 16)
        ns = list(range(int(start), int(stop) + 1, int(step)))
        if not ns:
            raise ConfigError("linear n_grid is empty")
        return ns, None
    if kind == "dyadic":
        start, stop = int(grid.get("start", 2)), int(grid.get("stop", 2**20))
        ns, n = [], start
        while n <= stop:
            ns.append(n)
            n *= 2
        if not ns:
            raise ConfigError("dyadic n_grid is empty")
        return ns, None
    values = grid.get("values")
    if not values:
        raise ConfigError("explicit n_grid needs non-empty values")
    return [int(v) for v in values], None


# ---------------------------------------------------------------------------
# CSV / JSON emission


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv_atomic(path: str, rows, header: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rlcsv-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str, payload: dict) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rljson-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def series_rows(ns, values):
    return [
        (str(int(n)), _fmt(float(np.real(v))), _fmt(float(np.imag(v))))
        for n, v in zip(ns, values)
    ]


# ---------------------------------------------------------------------------
# pipeline execution


def _surrogates(ts) -> SurrogateConfig:
    return SurrogateConfig(t_grid=ts) if ts is not None else SurrogateConfig()


def run_pipeline(cfg: dict) -> dict:
    """Execute the configured pipeline; returns the report dict (see README)."""
    t0 = time.perf_counter()
    pipeline = cfg["pipeline"]
    tol = cfg["tolerances"]
    d, K = cfg["d"], cfg["K"]

    if pipeline in ("residue", "nonmeasurable"):
        if pipeline == "nonmeasurable":
            sym = make_nonmeasurable_symbol(d)
        else:
            sym = build_symbol(cfg)
        ns, ts = build_n_grid(cfg, symbol_level=True)
        rs = residue_series(sym, ns)
        verdict = measurability_verdict(rs, tol["measurability"], _surrogates(ts))
        width = verdict.band.width
        if pipeline == "residue":
            passed = verdict.measurable
        else:
            passed = (not verdict.measurable) and width >= tol["band_width_min"]
        series = {"ns": list(rs.n_grid), "values": rs.res}
        report = {
            "verdict": {
                "passed": passed,
                "measurable": verdict.measurable,
                "value_re": None if verdict.value is None else verdict.value.real,
                "value_im": None if verdict.value is None else verdict.value.imag,
                "band_width": width,
            },
            "band": verdict.band.as_dict(),
        }
    elif pipeline == "connes":
        sym = build_symbol(cfg)
        ns, _ = build_n_grid(cfg, symbol_level=False)
        rep = connes_check(sym, K, n_window=ns, x_quad_nodes=cfg["x_quad_nodes"])
        passed = rep.passed(tol["relative_gap"])
        series = {"ns": list(rep.lambda_series.ns), "values": rep.lambda_series.values}
        report = {**rep.as_dict(), "verdict": {"passed": passed, "relative_gap": rep.relative_gap}}
    elif pipeline == "integrate":
        f = _integrand_from_symbol_config(cfg)
        rep = l2_integration_check(f, d, K, n_diag=cfg["n_diag"],
                                   x_quad_nodes=cfg["x_quad_nodes"])
        gap = rep.diag_relative_gap()
        passed = gap <= tol["integrate_relative_gap"]
        series = {"ns": list(rep.diag_series.ns), "values": rep.diag_series.values}
        report = {**rep.as_dict(), "verdict": {"passed": passed, "relative_gap": gap}}
    elif pipeline == "spectral-formula":
        sym = build_symbol(cfg)
        prep = prepare_operator(sym, K, cfg["x_quad_nodes"])
        rep = torus_spectral_formula_check(sym, K, prepared=prep)
        scale = abs(rep.residue_value)
        gaps = rep.absolute_gaps()
        # relative comparison at normal scale, absolute floor near zero
        threshold = (
            tol["relative_gap"] * scale if scale > tol["absolute_floor"] else tol["absolute_floor"]
        )
        passed = all(g <= threshold for g in gaps.values()) and (
            scale > tol["absolute_floor"]
            or max(abs(rep.diagonal_value), abs(rep.eigen_value)) <= tol["absolute_floor"]
        )
        window = np.unique(np.geomspace(4, rep.n_end, 32).astype(int))
        diag_csum = np.cumsum(prep.matrix.diagonal())
        series = {
            "ns": window.tolist(),
            "values": diag_csum[window - 1] / np.log1p(window),
        }
        report = {**rep.as_dict(), "verdict": {"passed": passed, "gaps": rep.pairwise_gaps()}}
    elif pipeline == "modulation":
        sym = build_symbol(cfg)
        prep = prepare_operator(sym, K, cfg["x_quad_nodes"])
        from .quantize import laplacian_multiplier

        V = laplacian_multiplier(prep.matrix.basis, float(d))
        mod = modulation_profile(prep.matrix, V, cfg["levels"], tol["slope"])
        N = prep.matrix.size
        tails = tail_energy(prep.matrix, range(max(1, N // 64), N, max(1, N // 64)), tol["slope"])
        passed = mod.trend.verdict == "bounded-trend" and tails.trend.verdict == "bounded-trend"
        series = {"ns": list(mod.levels), "values": mod.values.astype(complex)}
        report = {
            "pipeline": "modulation",
            "inputs": {"d": d, "K": K, "levels": cfg["levels"]},
            "modulation": {
                "values": [float(v) for v in mod.values],
                "scale": mod.scale,
                "slope": mod.trend.slope,
                "sup": mod.sup,
                "truncated": mod.truncated,
                "note": mod.note,
            },
            "tail_energy": {
                "sup": tails.sup,
                "slope": tails.trend.slope,
            },
            "verdict": {"passed": passed,
                        "modulation_verdict": mod.trend.verdict,
                        "tail_verdict": tails.trend.verdict},
        }
    else:  # pragma: no cover - guarded by validate_config
        raise ConfigError(f"unknown pipeline {pipeline!r}")

    report.setdefault("pipeline", pipeline)
    report["schema_version"] = SCHEMA_VERSION
    report.setdefault("inputs", {"d": d, "K": K})
    report["tolerances"] = tol
    report["seed"] = cfg["seed"]
    report["backend"] = _kernels.BACKEND
    report["runtime"] = time.perf_counter() - t0
    report["series"] = [
        {"n": str(int(n)), "re": float(np.real(v)), "im": float(np.imag(v))}
        for n, v in zip(series["ns"], series["values"])
    ]
    report["_csv_rows"] = series_rows(series["ns"], series["values"])
    return report


def _integrand_from_symbol_config(cfg: dict):
    spec = cfg["symbol"]
    d = cfg["d"]
    if spec["kind"] == "zero":
        return lambda x: np.zeros(np.shape(x) if d == 1 else np.shape(x)[:-1])
    if spec["kind"] == "nonmeasurable":
        raise ConfigError("integrate pipeline needs a bump or zero symbol")
    center = spec.get("center", 0.0)
    width = spec.get("width", 2.5)
    amplitude = spec.get("amplitude", "unit-integral")
    if amplitude == "unit-integral":
        w, _ = unit_bump(center, width, d)
        return w
    w, _ = bump(center, width, float(amplitude), d)
    return w


def run(cfg: dict) -> int:
    """Run one pipeline, write artifacts, map verdict to the exit code."""
    try:
        report = run_pipeline(cfg)
    except (ConfigError,) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (BudgetError, SupportError, SupportLeakageError, QuadratureError, ValueError) as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return 1
    csv_rows = report.pop("_csv_rows")
    csv_path = cfg["output"].get("csv")
    json_path = cfg["output"].get("json")
    if csv_path:
        write_csv_atomic(csv_path, csv_rows, "n,value_re,value_im")
    if json_path:
        write_json_atomic(json_path, report)
    passed = bool(report["verdict"]["passed"])
    print(f"{cfg['pipeline']}: {'PASS' if passed else 'FAIL'} "
          f"(runtime {report['runtime']:.2f}s, backend {report['backend']})")
    return 0 if passed else 2


def run_sweep(cfg: dict) -> int:
    """Run the inner pipeline for each K; consolidated CSV, summary in JSON."""
    inner_name = cfg["sweep"]["pipeline"]
    k_list = cfg["sweep"]["K_list"]
    results: dict[int, dict] = {}
    errors: dict[int, str] = {}

    def one(k: int):
        sub = json.loads(json.dumps({**cfg, "pipeline": inner_name, "K": k}))
        sub["output"] = {"csv": None, "json": None}
        return run_pipeline(sub)

    with ThreadPoolExecutor(max_workers=cfg["workers"]) as pool:
        futures = {k: pool.submit(one, k) for k in k_list}
        for k in k_list:  # collect in K order: deterministic output
            try:
                results[k] = futures[k].result()
            except Exception as exc:  # per-K failures recorded, sweep continues
                errors[k] = str(exc)

    rows = []
    summary = []
    for k in k_list:
        if k in errors:
            summary.append({"K": k, "error": errors[k]})
            continue
        rep = results[k]
        for item, row in zip(rep["series"], rep["_csv_rows"]):
            rows.append((str(k),) + row)
        last = rep["series"][-1]
        summary.append({
            "K": k,
            "top_n": last["n"],
            "value_re": last["re"],
            "value_im": last["im"],
            "passed": bool(rep["verdict"]["passed"]),
            "gap": rep["verdict"].get("relative_gap"),
        })

    csv_path = cfg["output"].get("csv")
    if csv_path:
        write_csv_atomic(csv_path, rows, "K,n,value_re,value_im")
    json_path = cfg["output"].get("json")
    if json_path:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "pipeline": "sweep",
            "inner_pipeline": inner_name,
            "K_list": k_list,
            "summary": summary,
            "reports": {
                str(k): {kk: vv for kk, vv in rep.items() if kk != "_csv_rows"}
                for k, rep in results.items()
            },
            "errors": {str(k): v for k, v in errors.items()},
            "seed": cfg["seed"],
        }
        write_json_atomic(json_path, payload)

    any_fail = bool(errors) or any(
        not results[k]["verdict"]["passed"] for k in results
    )
    for item in summary:
        if "error" in item:
            print(f"K={item['K']}: ERROR {item['error']}")
        else:
            print(f"K={item['K']}: {'PASS' if item['passed'] else 'FAIL'} top_n={item['top_n']}")
    return 2 if any_fail else 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="residuelab",
        description="Residue / singular-trace experiment runner",
    )
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--pipeline", choices=PIPELINES)
    p.add_argument("--d", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--budget", type=int, help="matrix-size budget override")
    p.add_argument("--n-diag", type=int, dest="n_diag")
    p.add_argument("--levels", type=int)
    p.add_argument("--csv", help="series CSV output path")
    p.add_argument("--json", help="JSON report output path")
    p.add_argument("--symbol-kind", choices=_SYMBOL_KINDS)
    p.add_argument("--k-list", help="comma-separated sweep K list")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override any config key by dotted path (JSON-parsed value)",
    )
    return p


def _overrides_from_args(args) -> dict:
    ov: dict = {}
    for key in ("pipeline", "d", "K", "seed", "workers", "budget", "n_diag", "levels"):
        val = getattr(args, key)
        if val is not None:
            ov[key] = val
    if args.csv or args.json:
        ov["output"] = {}
        if args.csv:
            ov["output"]["csv"] = args.csv
        if args.json:
            ov["output"]["json"] = args.json
    if args.symbol_kind:
        ov.setdefault("symbol", {})["kind"] = args.symbol_kind
    if args.k_list:
        try:
            ov.setdefault("sweep", {})["K_list"] = [int(s) for s in args.k_list.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --k-list value {args.k_list!r}") from exc
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects PATH=VALUE, got {item!r}")
        path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = ov
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides_from_args(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if cfg["budget"] is not None:
        os.environ["RESIDUELAB_MATRIX_BUDGET"] = str(cfg["budget"])
    try:
        if cfg["pipeline"] == "sweep":
            return run_sweep(cfg)
        return run(cfg)
    except (BudgetError, SupportError, SupportLeakageError, QuadratureError) as exc:
        print(f"execution error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
