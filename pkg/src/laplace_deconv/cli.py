"""Command-line entry point: ``laplace-deconv <subcommand> [flags]``.

Exit codes: 0 success, 1 domain error, 2 usage error. Outputs go to the
``--out`` path through a temporary file and rename, or to stdout.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import approximation, distances, entropy, posterior, quadrature, rates
from .kernels import Kernel, MixtureDensity, sample_mixture
from .measures import DiscreteMeasure

log = logging.getLogger("laplace_deconv")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# io helpers


def fmt(x: float) -> str:
    return "%.17g" % x


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_text(path: str, flag: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{flag}: file not found: {path}")
    return p.read_text()


def read_measure(path: str, flag: str) -> DiscreteMeasure:
    text = _read_text(path, flag)
    try:
        return DiscreteMeasure.from_json(text)
    except (KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{flag}: {path} is not a measure JSON ({exc})") from None


def read_data(path: str) -> np.ndarray:
    """One real per line; a non-numeric first line is taken as a header."""
    values = []
    for i, row in enumerate(csv.reader(io.StringIO(_read_text(path, "--data")))):
        if not row or not row[0].strip():
            continue
        try:
            values.append(float(row[0]))
        except ValueError:
            if i == 0:
                continue
            raise UsageError(f"--data: line {i + 1} of {path} is not a number: {row[0]!r}") from None
    return np.asarray(values, dtype=float)


def parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def parse_kernel(text: str) -> Kernel:
    try:
        return Kernel.parse(text)
    except ValueError as exc:
        raise UsageError(f"--kernel: {exc}") from None


def parse_order(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_approx(args) -> None:
    G = read_measure(args.g, "--g")
    kernel = parse_kernel(args.kernel)
    if args.metric == "hellinger":
        if kernel.variant != "laplace":
            raise UsageError("--metric hellinger is only available for the laplace kernel")
        res = approximation.approx_hellinger_laplace(G, args.eps, constant=args.constant)
    else:
        res = approximation.approx_lq(G, kernel, args.q, args.eps, constant=args.constant)
    emit(dump_json(res.to_dict()), args.out)


def cmd_distance(args) -> None:
    G = read_measure(args.g, "--g")
    H = read_measure(args.gp, "--gp")
    rep = distances.distance_report(args.metric, G, H, parse_kernel(args.kernel))
    emit(dump_json(rep.to_dict()), args.out)


def _build_net(args, eps: float) -> entropy.NetDescriptor:
    if args.metric == "simplex":
        return entropy.simplex_net(args.dim, eps)
    if args.metric == "wasserstein":
        return entropy.wasserstein_net(args.a, args.k, eps)
    return entropy.mixture_net(args.a, parse_kernel(args.kernel), args.metric, eps, q=args.q)


def cmd_entropy(args) -> None:
    rng = np.random.default_rng(args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps", "log_size", "max_probe_distance", "pass"])
    for eps in parse_floats(args.eps_ladder, "--eps-ladder"):
        net = _build_net(args, eps)
        if args.probes > 0:
            rep = entropy.verify_cover(net, entropy.probes_for(net, rng, args.probes))
            w.writerow([fmt(eps), fmt(net.log_size), fmt(rep.max_distance), int(rep.passed)])
        else:
            w.writerow([fmt(eps), fmt(net.log_size), "nan", ""])
    emit(buf.getvalue(), args.out)


def cmd_posterior(args) -> None:
    x = read_data(args.data)
    if x.size == 0:
        raise UsageError(f"--data: {args.data} contains no observations")
    cfg = posterior.DPConfig(total_mass=args.mass, a=args.a, truncation_level=args.truncation_level)
    out = posterior.run_chain(
        x, cfg, parse_kernel(args.kernel), iters=args.iters, burn_in=args.burn_in, thin=args.thin, seed=args.seed
    )
    doc = {
        "config": cfg.to_dict(),
        "draws": [d.to_dict() for d in out.draws],
        "log_likelihood": [float(v) for v in out.log_likelihood],
        "n_clusters": [int(v) for v in out.n_clusters],
    }
    emit(dump_json(doc), args.out)


PLOT_SCRIPT = """\
# Plot posterior q50 against n on log-log axes from the rates CSV.
import csv, sys
from collections import defaultdict
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv!r}
series = defaultdict(list)
with open(path) as fh:
    for row in csv.DictReader(fh):
        series[(row["metric"], row["replicate"])].append((int(row["n"]), float(row["q50"])))
for (metric, rep), pts in sorted(series.items()):
    pts.sort()
    plt.loglog([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{{metric}} rep {{rep}}")
plt.xlabel("n")
plt.ylabel("posterior q50")
plt.legend(fontsize=7)
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
"""


def cmd_rates(args) -> None:
    try:
        raw = json.loads(_read_text(args.config, "--config"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config: {args.config} is not valid JSON ({exc})") from None
    raw.setdefault("seed", args.seed)
    cfg = rates.ExperimentConfig.from_dict(raw)
    log.info("experiment config: %s", json.dumps(cfg.to_dict(), sort_keys=True))
    table = rates.run_contraction_experiment(cfg, threads=args.threads)
    emit(table.to_csv(), args.out)
    if args.out:
        summary = args.summary or str(Path(args.out).with_suffix(".summary.json"))
        write_atomic(summary, dump_json(table.summary()))
    if args.plot_script:
        write_atomic(args.plot_script, PLOT_SCRIPT.format(csv=args.out or "rates.csv"))


def cmd_simulate(args) -> None:
    G0 = read_measure(args.g0, "--g0")
    if args.n < 0:
        raise UsageError(f"--n must be nonnegative, got {args.n}")
    x = sample_mixture(MixtureDensity(parse_kernel(args.kernel), G0), args.n, args.seed)
    emit("x\n" + "".join(fmt(v) + "\n" for v in x), args.out)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="global random seed")
    common.add_argument("--threads", type=int, default=None, help=f"worker cap (fallback ${rates.THREADS_ENV})")
    common.add_argument("--out", default=None, help="output path; stdout when omitted")
    common.add_argument("--log-level", default="INFO")

    p = argparse.ArgumentParser(prog="laplace-deconv", description="Laplace-mixture deconvolution toolkit")
    sub = p.add_subparsers(dest="subcommand", required=True)

    s = sub.add_parser("approx", parents=[common], help="finite approximation of a mixing measure")
    s.add_argument("--g", required=True, help="measure JSON")
    s.add_argument("--metric", choices=["hellinger", "lq"], default="hellinger")
    s.add_argument("--q", type=parse_order, default=2.0)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--kernel", default="laplace")
    s.add_argument("--constant", type=float, default=None, help="override the frozen constant")
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("distance", parents=[common], help="distance between two measures")
    s.add_argument("--metric", required=True, help="w<k> | hellinger | l<q> | linf | kl | k2 | d<k>")
    s.add_argument("--g", required=True)
    s.add_argument("--gp", required=True)
    s.add_argument("--kernel", default="laplace")
    s.set_defaults(func=cmd_distance)

    s = sub.add_parser("entropy", parents=[common], help="epsilon-nets and coverage checks")
    s.add_argument("--metric", choices=["simplex", "wasserstein", "hellinger", "lq"], required=True)
    s.add_argument("--eps-ladder", required=True, help="comma-separated radii")
    s.add_argument("--probes", type=int, default=200)
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--k", type=float, default=1.0)
    s.add_argument("--q", type=float, default=2.0)
    s.add_argument("--dim", type=int, default=3, help="simplex dimension")
    s.add_argument("--kernel", default="laplace")
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("posterior", parents=[common], help="posterior draws of the mixing measure")
    s.add_argument("--data", required=True, help="CSV, one observation per line")
    s.add_argument("--mass", type=float, default=1.0)
    s.add_argument("--a", type=float, default=1.0)
    s.add_argument("--iters", type=int, default=2000)
    s.add_argument("--burn-in", type=int, default=1000)
    s.add_argument("--thin", type=int, default=5)
    s.add_argument("--truncation-level", type=int, default=200)
    s.add_argument("--kernel", default="laplace")
    s.set_defaults(func=cmd_posterior)

    s = sub.add_parser("rates", parents=[common], help="contraction-rate experiment")
    s.add_argument("--config", required=True, help="experiment JSON")
    s.add_argument("--summary", default=None, help="fitted-summary JSON path")
    s.add_argument("--plot-script", default=None, help="write a matplotlib script for the CSV")
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("simulate", parents=[common], help="sample from a mixture density")
    s.add_argument("--g0", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--kernel", default="laplace")
    s.set_defaults(func=cmd_simulate)
    return p


DOMAIN_ERRORS = (
    ValueError,
    approximation.ApproximationError,
    posterior.ChainError,
    quadrature.QuadratureError,
    rates.ExperimentAborted,
)


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    if args.threads is None and os.environ.get(rates.THREADS_ENV):
        args.threads = rates.resolve_threads(None)
    resolved["threads"] = args.threads
    log.info("resolved config: %s", json.dumps(resolved, sort_keys=True, default=str))
    try:
        args.func(args)
    except UsageError as exc:
        print(f"laplace-deconv {args.subcommand}: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"laplace-deconv {args.subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
