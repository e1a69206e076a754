"""Command line entry point: ``ntw align | dtw | metrics | average``.

Exit codes: 0 success, 1 numerical divergence, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from ntw import data_io, metrics
from ntw.training import NtwConfig, Problem, align, finalize
from ntw.warp_net import DEFAULT_HIDDEN, DivergenceError, load_checkpoint, save_checkpoint

logger = logging.getLogger("ntw")

EXIT_OK, EXIT_DIVERGED, EXIT_USAGE = 0, 1, 2

# option name -> default; a --config JSON file may set any of these
ALIGN_DEFAULTS = {
    "input": None,
    "format": "auto",
    "label": None,
    "max_series": 100,
    "seed": 0,
    "updates": 1000,
    "lr": 1e-4,
    "lambda": 1000.0,
    "alpha0": 100.0,
    "alpha_decay": 0.99,
    "z_train": None,
    "z_out": None,
    "znorm": False,
    "threads": 1,
    "hidden": ",".join(map(str, DEFAULT_HIDDEN)),
    "out": "ntw_out",
}
DATA_KEYS = ("input", "format", "label", "max_series", "seed", "znorm")


class UsageError(Exception):
    pass


def _add_data_options(p, required_input=False):
    S = argparse.SUPPRESS
    p.add_argument("--input", default=S, required=required_input, help="UCR-style data file")
    p.add_argument("--format", default=S, choices=["auto", "csv", "tsv"],
                   help="field delimiter (default: auto-detect)")
    p.add_argument("--label", type=int, default=S, help="class label to align (required if the file has several)")
    p.add_argument("--max-series", dest="max_series", type=int, default=S,
                   help="subsample the class to at most this many series (default 100)")
    p.add_argument("--seed", type=int, default=S, help="seed for subsampling and network init (default 0)")
    p.add_argument("--znorm", action="store_true", default=S, help="z-normalize each series before aligning")


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="ntw", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="align one class of a dataset")
    _add_data_options(p)
    p.add_argument("--config", help="JSON file with option values; flags take precedence")
    p.add_argument("--updates", type=int, default=S, help="optimizer updates (default 1000)")
    p.add_argument("--lr", type=float, default=S, help="Adam learning rate (default 1e-4)")
    p.add_argument("--lambda", dest="lambda", type=float, default=S, help="penalty weight (default 1000)")
    p.add_argument("--alpha0", type=float, default=S, help="initial annealing width (default 100)")
    p.add_argument("--alpha-decay", dest="alpha_decay", type=float, default=S,
                   help="annealing multiplier per update (default 0.99)")
    p.add_argument("--z-train", dest="z_train", type=int, default=S,
                   help="trapezoid intervals for training (default max T)")
    p.add_argument("--z-out", dest="z_out", type=int, default=S,
                   help="output warping resolution (default N * max T)")
    p.add_argument("--hidden", default=S, help="hidden widths h1,h2,h3 with h3 = 1+h1+h2 (default 512,512,1025)")
    p.add_argument("--threads", type=int, default=S, help="1 = serial, reproducible (default); >1 parallel")
    p.add_argument("--out", default=S, help="output directory (default ntw_out)")

    p = sub.add_parser("dtw", help="DTW discrepancy between two single-series files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--path", help="write the optimal path as CSV to this file")

    for name, text in (("metrics", "recompute metrics.json"), ("average", "recompute average.csv")):
        p = sub.add_parser(name, help=f"{text} from a finished align run")
        p.add_argument("--run", required=True, help="directory written by 'ntw align'")
        p.add_argument("--out", help="where to write (default: the run directory)")
        _add_data_options(p)
    return parser


def _merge_align_options(ns: argparse.Namespace) -> dict:
    opts = dict(ALIGN_DEFAULTS)
    if getattr(ns, "config", None):
        cfg = data_io.read_config(ns.config)
        for key, value in cfg.items():
            norm = key.replace("-", "_")
            if norm not in ALIGN_DEFAULTS:
                raise UsageError(f"{ns.config}: unknown option {key!r}")
            opts[norm] = value
    for key in ALIGN_DEFAULTS:
        if key in vars(ns):
            opts[key] = getattr(ns, key)
    return opts


def _parse_hidden(text) -> tuple:
    try:
        hidden = tuple(int(h) for h in str(text).split(","))
    except ValueError:
        raise UsageError(f"--hidden must be three integers, got {text!r}") from None
    if len(hidden) != 3 or hidden[2] != 1 + hidden[0] + hidden[1]:
        raise UsageError(f"--hidden must be h1,h2,h3 with h3 = 1+h1+h2, got {text!r}")
    return hidden


def _load_class(opts: dict) -> list:
    if not opts.get("input"):
        raise UsageError("--input is required")
    path = Path(opts["input"])
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    ds = data_io.load_ucr(path, data_io.DELIMITERS.get(opts.get("format") or "auto"))
    label = opts.get("label")
    if label is None:
        labels = ds.labels()
        if len(labels) != 1:
            raise UsageError(f"{path} has labels {labels}; choose one with --label")
        label = labels[0]
    if opts["max_series"] < 2:
        raise UsageError("--max-series must be >= 2")
    series = data_io.select_class(ds, label, opts["max_series"], opts["seed"])
    return data_io.znormalize(series) if opts.get("znorm") else series


def _thread_limits(threads: int):
    import numba
    from threadpoolctl import threadpool_limits

    if threads < 1:
        raise UsageError("--threads must be >= 1")
    numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    return threadpool_limits(limits=threads)


def cmd_align(ns) -> int:
    opts = _merge_align_options(ns)
    if opts["updates"] < 1:
        raise UsageError("updates must be >= 1")
    config = NtwConfig(
        updates=opts["updates"],
        learning_rate=opts["lr"],
        lam=opts["lambda"],
        alpha0=opts["alpha0"],
        alpha_decay=opts["alpha_decay"],
        z_train=opts["z_train"],
        z_out=opts["z_out"],
        seed=opts["seed"],
        hidden=_parse_hidden(opts["hidden"]),
    )
    series = _load_class(opts)
    out = Path(opts["out"])
    start = time.perf_counter()
    with _thread_limits(opts["threads"]):
        result = align(series, config)
        paths = data_io.write_outputs(result, out)
    elapsed = time.perf_counter() - start

    run_config = {k: v for k, v in opts.items() if k != "out"}
    run_config["input"] = str(Path(opts["input"]).resolve())
    run_config["label"] = series[0].label
    run_config["z_train"] = result.z_train
    run_config["z_out"] = result.warping.Z
    paths.append(data_io.write_config(run_config, out / "config.json"))
    paths.append(save_checkpoint(result.net, out / "checkpoint.npz", {
        "updates": config.updates,
        "alpha_final": result.alpha_final,
        "z_train": result.z_train,
        "z_out": result.warping.Z,
    }))
    for p in paths:
        print(p)
    v_mono, v_cont, v_bound = result.validity
    print(f"N={result.N} Z={result.warping.Z} data loss {result.data_loss_initial:.6g} -> "
          f"{result.data_loss_final:.6g}  V_mono {100 * v_mono:.4f}% V_cont {100 * v_cont:.4f}% "
          f"V_bound {100 * v_bound:.4f}%  L_b {result.metrics['barycenter_loss']:.6g}  "
          f"penalty residual {result.penalty_residual:.3g}  {elapsed:.1f}s")
    return EXIT_OK


def cmd_dtw(ns) -> int:
    a = data_io.load_series_file(ns.a)
    b = data_io.load_series_file(ns.b)
    res = metrics.dtw(a, b, return_path=bool(ns.path))
    print(format(res.discrepancy, ".17g"))
    if ns.path:
        data_io._write_csv(Path(ns.path), ["i", "j"], res.path)
    return EXIT_OK


def _load_run(ns):
    run = Path(ns.run)
    if not run.is_dir():
        raise UsageError(f"run directory not found: {run}")
    opts = {k: ALIGN_DEFAULTS[k] for k in DATA_KEYS}
    cfg_path = run / "config.json"
    if cfg_path.is_file():
        cfg = data_io.read_config(cfg_path)
        opts.update({k: cfg[k] for k in DATA_KEYS if k in cfg})
    opts.update({k: getattr(ns, k) for k in DATA_KEYS if k in vars(ns)})
    series = _load_class(opts)
    warp_path = run / "warpings.csv"
    if not warp_path.is_file():
        raise UsageError(f"missing {warp_path}")
    sw = data_io.read_warpings(warp_path)
    lengths = np.array([s.T for s in series])
    if sw.n_series != len(series):
        raise UsageError(f"warpings shape {sw.tau.shape} (N={sw.n_series}) does not match "
                         f"data shape ({len(series)} series, max length {lengths.max() + 1})")
    return run, series, lengths, sw


def cmd_metrics(ns) -> int:
    run, series, lengths, sw = _load_run(ns)
    ckpt = run / "checkpoint.npz"
    if not ckpt.is_file():
        raise UsageError(f"missing {ckpt}")
    net, meta = load_checkpoint(ckpt)
    if net.n_out != len(series) - 1:
        raise UsageError(f"checkpoint is for N={net.n_out + 1} series, data has N={len(series)}")
    if sw.Z != meta["z_out"]:
        raise UsageError(f"row count mismatch: {run / 'warpings.csv'} has {sw.Z + 1} rows, "
                         f"expected {meta['z_out'] + 1}")
    if not np.array_equal(sw.tau[:, -1], lengths):
        raise UsageError(f"warpings end at {sw.tau[:, -1].tolist()} but series lengths are {lengths.tolist()}")
    problem = Problem(series)
    sw = type(sw)(sw.tau, lengths)
    _, residual, final_loss = finalize(problem, net, meta["z_out"], meta["z_train"])
    from ntw.training import aligned_values

    aligned = aligned_values(problem, sw)
    doc = metrics.metrics_document(series, sw, aligned, residual, final_loss,
                                   meta["updates"], meta["alpha_final"])
    out = Path(ns.out) if ns.out else run
    out.mkdir(parents=True, exist_ok=True)
    print(data_io.write_metrics(doc, out / "metrics.json"))
    return EXIT_OK


def cmd_average(ns) -> int:
    run, series, lengths, sw = _load_run(ns)
    ckpt = run / "checkpoint.npz"
    if ckpt.is_file():
        _, meta = load_checkpoint(ckpt)
        if sw.Z != meta["z_out"]:
            raise UsageError(f"row count mismatch: {run / 'warpings.csv'} has {sw.Z + 1} rows, "
                             f"expected {meta['z_out'] + 1}")
    if np.any(sw.tau.max(axis=1) > lengths):
        raise UsageError(f"warp indices exceed series lengths {lengths.tolist()}")
    from ntw.training import aligned_values

    aligned = aligned_values(Problem(series), type(sw)(sw.tau, lengths))
    out = Path(ns.out) if ns.out else run
    out.mkdir(parents=True, exist_ok=True)
    print(data_io.write_average(metrics.warped_average(aligned), metrics.warped_std(aligned),
                                out / "average.csv"))
    return EXIT_OK


COMMANDS = {"align": cmd_align, "dtw": cmd_dtw, "metrics": cmd_metrics, "average": cmd_average}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](ns)
    except DivergenceError as exc:
        print(f"ntw: error: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"ntw: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
