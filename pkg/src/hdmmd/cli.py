"""``hd-mmd`` command line interface.

Subcommands
-----------
test           studentized MMD test on two CSV samples
sample         draw a sample from a model (JSON) and write CSV
simulate       Monte Carlo experiment -> summary.json, replicates.csv, qq.csv
predict-power  asymptotic power from population summaries or models
kernel-impact  kernel / bandwidth impact ratios as CSV

Exit codes: 0 success, 1 runtime numeric error, 2 usage or configuration
error (the message names the offending field, row or column).
Numbers are written with 12 significant digits; every JSON document carries
``schema_version``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__, datagen, theory
from ._backend import BACKEND
from .errors import ConfigError, HdMmdError
from .kernels import BandwidthMode, parse_bandwidth, parse_kernel
from .mmd import PooledGram
from .montecarlo import DEFAULT_SEED, ExperimentConfig, run_experiment
from .normal import normal_quantile

SCHEMA_VERSION = "hdmmd/1.0"
SIG_DIGITS = 12

log = logging.getLogger("hdmmd")


class UsageError(Exception):
    """Bad invocation or input file; maps to exit code 2."""


# --------------------------------------------------------------------------
# formatting


def fmt_number(x) -> str:
    """Plain decimal/exponent text with 12 significant digits."""
    return format(float(x), f".{SIG_DIGITS}g")


def _round(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(fmt_number(x))
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_round(v) for v in obj.tolist()]
    return obj


def dump_json(kind: str, payload: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind}
    doc.update(payload)
    return json.dumps(_round(doc), indent=2, allow_nan=False) + "\n"


def _write_text(path, text):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_number(v)
    return v


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


# --------------------------------------------------------------------------
# input parsing


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_matrix_csv(path) -> np.ndarray:
    """Numeric CSV, one observation per row; a first non-numeric row is a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh)]
    except OSError as e:
        raise UsageError(f"{path}: cannot read: {e.strerror}") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if rows and not any(_is_number(c) for c in rows[0]):
        header_rows = 1
        rows = rows[1:]
    else:
        header_rows = 0
    if not rows:
        raise UsageError(f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        line = i + 1 + header_rows
        if len(row) != width:
            raise UsageError(f"{path}: row {line} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise UsageError(
                    f"{path}: row {line}, column {j + 1}: non-numeric value {cell.strip()!r}"
                ) from None
            if not math.isfinite(v):
                raise UsageError(f"{path}: row {line}, column {j + 1}: non-finite value")
            out[i, j] = v
    return out


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise UsageError(f"{path}: cannot read: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}", "config") from None


def resolve_seed(text):
    if text is None:
        return DEFAULT_SEED
    if str(text).lower() == "random":
        return secrets.randbits(63)
    try:
        seed = int(text)
    except ValueError:
        raise ConfigError(f"must be an integer or 'random', got {text!r}", "seed") from None
    if seed < 0:
        raise ConfigError("must be non-negative", "seed")
    return seed


def _parse_floats(text, field):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", field) from None
    if not vals:
        raise ConfigError("empty list", field)
    return vals


# --------------------------------------------------------------------------
# subcommands


def cmd_test(args) -> int:
    X = read_matrix_csv(args.x)
    Y = read_matrix_csv(args.y)
    if X.shape[1] != Y.shape[1]:
        raise UsageError(f"--x has {X.shape[1]} columns but --y has {Y.shape[1]}")
    if X.shape[0] < 4 or Y.shape[0] < 4:
        raise UsageError("each sample needs at least 4 rows")
    if not 0 < args.alpha < 1:
        raise ConfigError("must lie in (0, 1)", "alpha")
    policy = parse_bandwidth(args.bandwidth)
    template = parse_kernel(args.kernel)
    gamma = policy.resolve(X, Y)
    kernel = template.with_bandwidth(gamma)
    res = PooledGram(X, Y, args.threads).test(kernel, args.alpha)
    payload = {
        "n": X.shape[0],
        "m": Y.shape[0],
        "p": X.shape[1],
        "kernel": kernel.name,
        "bandwidth": gamma,
        "bandwidth_policy": policy.label,
    }
    payload.update(res.to_dict())
    if args.format == "csv":
        flat = {k: v for k, v in payload.items() if not isinstance(v, (list, tuple))}
        for name in ("tau_hats", "trace_hats"):
            for i, v in enumerate(payload[name], 1):
                flat[f"{name[:-1]}_{i}"] = v
        _write_text(args.out, _csv_text(list(flat), [list(flat.values())]))
    else:
        _write_text(args.out, dump_json("test_result", payload))
    return 0


def _model_from_args(args):
    if args.model:
        d = read_json(args.model)
    else:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError("model must be a JSON object", "model")
    d = dict(d)
    if args.p is not None:
        d["p"] = args.p
    if "p" not in d:
        raise ConfigError("required (in the model file or via --p)", "p")
    return datagen.ModelSpec.from_dict(d)


def cmd_sample(args) -> int:
    spec = _model_from_args(args)
    if args.n < 1:
        raise ConfigError("must be positive", "n")
    seed = resolve_seed(args.seed)
    X = datagen.sample(spec, args.n, datagen.derive_rng(seed, args.stream))
    header = [f"x{j + 1}" for j in range(spec.p)] if args.header else None
    _write_text(args.out, _csv_text(header, X.tolist()))
    log.info("sampled %d x %d with seed %d", args.n, spec.p, seed)
    return 0


def cmd_simulate(args) -> int:
    d = read_json(args.config)
    if args.seed is not None:
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object", "config")
        d["seed"] = resolve_seed(args.seed)
    cfg = ExperimentConfig.from_dict(d)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise UsageError(f"--out {out}: {e.strerror}") from None

    def progress(gi, gp):
        log.info("grid point %d/%d done (n=%d, m=%d, p=%d)", gi + 1, len(cfg.grid), gp.n, gp.m, gp.p)

    res = run_experiment(cfg, args.threads, progress)
    (out / "summary.json").write_text(dump_json("experiment_summary", {
        "backend": res.backend,
        "config": cfg.to_dict(),
        "summaries": [s.to_dict() for s in res.summaries],
    }), encoding="utf-8")

    header = ["grid_index", "n", "m", "p", "replicate", "kernel", "bandwidth", "statistic",
              "var_hat", "z_score"] + [f"reject_{a:g}" for a in cfg.alphas] + ["failed", "error"]
    rows = []
    for r in res.records:
        gp = cfg.grid[r.grid_index]
        rows.append([r.grid_index, gp.n, gp.m, gp.p, r.replicate_index, r.kernel, r.bandwidth,
                     r.statistic, r.var_hat, r.z_score, *(int(b) for b in r.reject),
                     int(r.failed), r.error])
    (out / "replicates.csv").write_text(_csv_text(header, rows), encoding="utf-8")

    qrows = []
    for s in res.summaries:
        z = np.sort(res.z_scores(s.grid_index, s.kernel))
        z = z[np.isfinite(z)]
        N = z.size
        for i, zi in enumerate(z):
            qrows.append([s.grid_index, s.kernel, i + 1, normal_quantile((i + 0.5) / N), zi])
    (out / "qq.csv").write_text(
        _csv_text(["grid_index", "kernel", "rank", "theoretical", "sample"], qrows),
        encoding="utf-8",
    )
    log.info("wrote %s", out)
    return 0


_PREDICT_KEYS = {
    "p", "summary", "kurt_term1", "kurt_term2", "skew_term", "model_x", "model_y",
    "kernel", "bandwidth", "n", "m", "sizes", "alphas", "regime", "mmd_reps", "seed",
    "full_variance",
}


def cmd_predict_power(args) -> int:
    d = read_json(args.config)
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object", "config")
    extra = set(d) - _PREDICT_KEYS
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", "config")
    models = None
    if "model_x" in d or "model_y" in d:
        if "model_x" not in d or "model_y" not in d:
            raise ConfigError("give both model_x and model_y", "model_y")
        mx_d, my_d = dict(d["model_x"]), dict(d["model_y"])
        if "p" in d:
            mx_d.setdefault("p", d["p"])
            my_d.setdefault("p", d["p"])
        models = (datagen.ModelSpec.from_dict(mx_d), datagen.ModelSpec.from_dict(my_d))
        ti = theory.TheoryInput.from_models(*models)
    elif "summary" in d:
        if "p" not in d:
            raise ConfigError("required with 'summary'", "p")
        ti = theory.TheoryInput.from_summary(
            int(d["p"]), d["summary"], kurt_term1=float(d.get("kurt_term1", 0.0)),
            kurt_term2=float(d.get("kurt_term2", 0.0)), skew_term=float(d.get("skew_term", 0.0)),
        )
    else:
        raise ConfigError("give either 'summary' or 'model_x'/'model_y'", "config")

    policy = parse_bandwidth(d.get("bandwidth", "scaled:2"))
    if policy.mode is BandwidthMode.MEDIAN:
        raise ConfigError("median bandwidth needs data; use fixed or scaled", "bandwidth")
    kernel = parse_kernel(d.get("kernel", "gaussian"), policy.resolve(ti.p))
    if "sizes" in d:
        sizes = [tuple(int(v) for v in s) for s in d["sizes"]]
    elif "n" in d:
        sizes = [(int(d["n"]), int(d.get("m", d["n"])))]
    else:
        raise ConfigError("give 'n' (and optionally 'm') or 'sizes'", "n")
    alphas = d.get("alphas", [0.05])
    regime = theory.Regime(d.get("regime", "local_s1"))
    mmd = None
    kw = {}
    if regime is theory.Regime.HIGHER_ORDER_S2:
        if models is None:
            raise ConfigError("higher-order regime needs model_x/model_y", "regime")
        seed = resolve_seed(args.seed if args.seed is not None else d.get("seed"))
        est, se = theory.population_mmd_monte_carlo(
            models[0], models[1], kernel, int(d.get("mmd_reps", 100_000)), seed
        )
        mmd = {"estimate": est, "std_error": se}
        kw = dict(mmd_pop=est, mmd_se=se)
    preds = []
    for n, m in sizes:
        for a in alphas:
            preds.append(theory.predict_power(
                ti, kernel, n, m, float(a), regime=regime,
                full_variance=bool(d.get("full_variance", False)), **kw,
            ).to_dict())
    _write_text(args.out, dump_json("power_prediction", {
        "kernel": kernel.name,
        "bandwidth": kernel.bandwidth,
        "tau": list(theory.tau_params(ti)),
        "population_mmd": mmd,
        "predictions": preds,
    }))
    return 0


DEFAULT_IMPACT_KERNELS = "gaussian,laplace,rq:0.5,energy"


def cmd_kernel_impact(args) -> int:
    names = [k.strip() for k in args.kernels.split(",") if k.strip()]
    kernels = [parse_kernel(k) for k in names]
    if not args.tau > 0:
        raise ConfigError("must be positive", "tau")
    header = ["kernel", "h1"]
    gammas = []
    if args.gammas is not None:
        if args.trace is None or not args.trace > 0:
            raise ConfigError("--gammas needs a positive --trace (tr Sigma_1)", "trace")
        gammas = _parse_floats(args.gammas, "gammas")
        header += [f"h2_gamma={fmt_number(g)}" for g in gammas]
    rows = []
    for name, k in zip(names, kernels):
        row = [name, theory.h1(k, args.tau)]
        row += [theory.h2(k, g, args.trace) for g in gammas]
        rows.append(row)
    _write_text(args.out, _csv_text(header, rows))
    return 0


# --------------------------------------------------------------------------
# argument parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(
        prog="hd-mmd",
        description="Studentized kernel two-sample testing in high dimension.",
        epilog="Environment: HD_MMD_THREADS caps worker threads; HD_MMD_BACKEND=python|compiled "
               "selects the compute core.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output on stderr")
    ap.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def threads(p):
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: HD_MMD_THREADS or CPU count)")

    def seed(p):
        p.add_argument("--seed", default=None,
                       help=f"integer seed (default {DEFAULT_SEED}) or 'random'")

    p = sub.add_parser("test", help="studentized MMD test on two CSV samples")
    p.add_argument("--x", required=True, help="CSV, one observation per row")
    p.add_argument("--y", required=True, help="CSV, one observation per row")
    p.add_argument("--kernel", default="gaussian", help="gaussian|laplace|rq:<alpha>|energy|linear")
    p.add_argument("--bandwidth", default="scaled:2", help="fixed:<g>|scaled:<c>|median")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default="-", help="output file (default stdout)")
    threads(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("sample", help="draw from a model and write CSV")
    p.add_argument("--model", help="model JSON (default: standard normal, identity)")
    p.add_argument("--p", type=int, default=None, help="dimension (overrides the model file)")
    p.add_argument("--n", type=int, required=True, help="number of rows")
    p.add_argument("--stream", type=int, default=0, help="sub-stream index under the seed")
    p.add_argument("--header", action="store_true", help="write a column header")
    p.add_argument("--out", default="-", help="output file (default stdout)")
    seed(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("simulate", help="Monte Carlo experiment")
    p.add_argument("--config", required=True, help="experiment JSON")
    p.add_argument("--out", required=True, help="output directory")
    seed(p)
    threads(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict-power", help="asymptotic power prediction")
    p.add_argument("--config", required=True, help="theory JSON (summaries or models)")
    p.add_argument("--out", default="-", help="output file (default stdout)")
    seed(p)
    p.set_defaults(func=cmd_predict_power)

    p = sub.add_parser("kernel-impact", help="h1 / h2 kernel impact table as CSV")
    p.add_argument("--tau", type=float, default=2.0, help="profile argument for h1")
    p.add_argument("--kernels", default=DEFAULT_IMPACT_KERNELS, help="comma-separated kernels")
    p.add_argument("--gammas", default=None, help="comma-separated bandwidths for h2")
    p.add_argument("--trace", type=float, default=None, help="tr(Sigma_1) for h2")
    p.add_argument("--out", default="-", help="output file (default stdout)")
    p.set_defaults(func=cmd_kernel_impact)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.ERROR if args.quiet else (logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise ConfigError("must be positive", "threads")
        return args.func(args)
    except (UsageError, ConfigError) as e:
        sys.stderr.write(f"hd-mmd: error: {e}\n")
        return 2
    except (HdMmdError, ArithmeticError) as e:
        sys.stderr.write(f"hd-mmd: numeric error: {type(e).__name__}: {e}\n")
        return 1
    except BrokenPipeError:
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
