"""Command-line driver.

    famapprox gen planted --n 32 --family 256 --opt 0.1 --seed 7 --out inst/
    famapprox gen wishart --n 16 --seed 1 --out wish/
    famapprox gen butterfly --n 16 --out bfly/
    famapprox approx --instance inst/ --algorithm two-sided --seed 3
    famapprox bench --sizes 16,256,4096 --algorithms one-sided,two-sided --trials 20 --out sweep.csv

``approx`` prints one JSON line and exits 0 (returned), 2 (failed) or
3 (no-candidate).  ``bench`` writes one CSV row per (sweep point,
algorithm, trial), sorted, so only the ``millis`` column varies between
reruns.
"""
import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import instances, refine
from .family import load_manifest, save_manifest
from .linearfam import (
    CoverFamily,
    LinearFamily,
    build_ball_cover,
    covering_approx,
    least_squares_projection,
    linear_family_approx,
    orthonormalize,
)
from .oracle import QueryOracle

FINITE_ALGORITHMS = ("one-shot", "one-sided", "two-sided", "binary-search", "vmv", "covering")
BASIS_ALGORITHMS = ("linear", "covering")
EXIT_CODES = {refine.RETURNED: 0, refine.FAILED: 2, refine.NO_CANDIDATE: 3}

CSV_COLUMNS = ("n", "family_size", "algorithm", "seed", "right_q", "left_q", "vmv_q", "total_q",
               "true_error", "opt", "ratio", "iterations", "termination", "millis")

# default caps for sweeps; override with the --cap-* flags
BENCH_CAPS = {"cap_l": 64, "cap_m": 128, "cap_q": 64}

# margin on a known OPT when no --bound is given
BOUND_MARGIN = 1.05


class CLIError(Exception):
    pass


@dataclass
class ExperimentSpec:
    algorithm: str
    cfg: refine.RefineConfig
    instance: str = None
    trials: int = 1
    sweep: list = field(default_factory=list)
    generator: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise CLIError(f"trials must be >= 1, got {self.trials}")


@dataclass
class ResultRecord:
    algorithm: str
    seed: int
    chosen: int
    termination: str
    right_q: int
    left_q: int
    vmv_q: int
    total_q: int
    iterations: int
    true_error: float = None
    opt: float = None
    ratio: float = None
    bound: float = None
    error_estimate: float = None
    millis: float = None
    extra: dict = field(default_factory=dict)

    def as_json(self, **echo):
        d = {k: v for k, v in asdict(self).items() if v is not None and k != "extra"}
        d.update(self.extra)
        d.update(echo)
        return json.dumps(d, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _config(args, seed=None):
    return refine.RefineConfig(
        eps=args.eps, delta=args.delta, c=args.const_c,
        cap_l=args.cap_l, cap_m=args.cap_m, cap_q=args.cap_q, cap_r=args.cap_r,
        seed=args.seed if seed is None else seed,
    )


def run_finite(algorithm, A, family, cfg, opt=None, bound=None):
    """Run one finite-family algorithm and summarise it as a ResultRecord.

    ``bound`` feeds the one-sided/two-sided selectors; when absent it is
    ``1.05 * opt`` (or a 1e-9 relative floor when opt is 0).
    """
    oracle = QueryOracle(A)
    if algorithm in ("one-sided", "two-sided") and bound is None:
        if opt is None:
            bound = refine.coarse_opt_bound(oracle, family, cfg.delta, cfg.seed, cfg.c)
        else:
            bound = max(BOUND_MARGIN * opt, 1e-9 * float(np.linalg.norm(A)))
    start = time.perf_counter()
    if algorithm == "one-shot":
        res = refine.one_shot_argmin(oracle, family, cfg)
    elif algorithm == "one-sided":
        res = refine.one_sided_refine(oracle, family, bound, cfg)
    elif algorithm == "two-sided":
        res = refine.two_sided_refine(oracle, family, bound, cfg)
    elif algorithm == "binary-search":
        res = refine.binary_search_approx(oracle, family, cfg)
    elif algorithm == "covering":
        res = covering_approx(oracle, family, cfg)
    elif algorithm == "vmv":
        res = refine.vmv_family_argmin(oracle, family, cfg)
    else:
        raise CLIError(f"unknown finite-family algorithm {algorithm!r}")
    millis = 1000 * (time.perf_counter() - start)
    total = oracle.counts()
    true_error = None
    if res.chosen is not None:
        true_error = float(np.linalg.norm(A - family.dense_member(res.chosen)))
    return _record(algorithm, cfg.seed, res, total, true_error, opt, res.bound_used, millis)


def _record(algorithm, seed, res, total, true_error, opt, bound, millis, extra=None):
    ratio = None
    if true_error is not None and opt is not None and opt > 0:
        ratio = true_error / opt
    return ResultRecord(
        algorithm, int(seed), res.chosen, res.termination,
        total.right_queries, total.left_queries, total.vmv_queries, total.total,
        res.iterations, true_error, opt, ratio, bound, res.error_estimate, millis, extra or {},
    )


# -- gen ---------------------------------------------------------------------

def cmd_gen(args):
    out = Path(args.out)
    if args.kind == "planted":
        # --family counts decoys; the planted member comes on top
        inst = instances.gen_planted(args.n, args.family + 1, args.opt, args.gap, args.seed)
        inst.save(out)
        summary = {"kind": "planted", "n": args.n, "members": len(inst.family),
                   "planted_id": inst.planted_id, "opt": inst.opt, "seed": args.seed}
    elif args.kind == "wishart":
        A = instances.gen_wishart(args.n, args.seed)
        save_manifest(out, args.n, matrix=A, generator="wishart", seed=args.seed)
        summary = {"kind": "wishart", "n": args.n, "seed": args.seed,
                   "frobenius_norm": float(np.linalg.norm(A))}
    else:
        family, member = instances.gen_butterfly_block_family(args.n, args.scale, args.seed)
        save_manifest(out, args.n, matrix=member, basis=list(family.basis),
                      generator="butterfly", seed=args.seed)
        summary = {"kind": "butterfly", "n": args.n, "q": family.q, "seed": args.seed}
    summary["out"] = str(out)
    print(json.dumps(summary, sort_keys=True))
    return 0


# -- approx ------------------------------------------------------------------

def cmd_approx(args):
    manifest = load_manifest(args.instance)
    A = manifest["A"]
    if A is None:
        raise CLIError(f"{args.instance}: instance has no hidden matrix")
    kind = manifest.get("kind", "finite")
    cfg = _config(args)
    echo = {"instance": str(args.instance), "config": asdict(cfg)}
    if kind == "basis":
        if args.algorithm not in BASIS_ALGORITHMS:
            raise CLIError(f"algorithm {args.algorithm!r} needs a finite-family manifest")
        record = _run_basis(args, A, LinearFamily(np.stack(manifest["basis_matrices"])), cfg)
    else:
        if args.algorithm not in FINITE_ALGORITHMS:
            raise CLIError(f"algorithm {args.algorithm!r} needs a basis manifest")
        family = manifest["family"]
        if family is None:
            raise CLIError(f"{args.instance}: manifest lists no family members")
        record = run_finite(args.algorithm, A, family, cfg, manifest.get("opt"), args.bound)
        if "planted_id" in manifest:
            echo["planted_id"] = manifest["planted_id"]
    print(record.as_json(**echo))
    return EXIT_CODES[record.termination]


def _run_basis(args, A, L, cfg):
    _, opt = least_squares_projection(A, L)
    if opt <= 1e-12 * float(np.linalg.norm(A)):
        opt = 0.0  # in-span up to rounding
    oracle = QueryOracle(A)
    start = time.perf_counter()
    if args.algorithm == "linear":
        res, coeffs = linear_family_approx(oracle, L, args.alpha, cfg)
        matrix = res.extras.get("matrix")
        extra = {"coefficients": coeffs, "cover_size": res.extras["cover_size"]}
    else:
        if args.radius is None or args.cover_alpha is None:
            raise CLIError("covering on a basis manifest needs --radius and --cover-alpha")
        ortho = orthonormalize(L)
        cover = build_ball_cover(L.q, args.radius, args.cover_alpha)
        family = CoverFamily(ortho.basis, cover.points)
        res = covering_approx(oracle, family, cfg)
        matrix = family.dense_member(res.chosen) if res.chosen is not None else None
        extra = {"cover_size": len(cover)}
        if res.chosen is not None:
            extra["coefficients"] = np.linalg.solve(ortho.triangular, cover.points[res.chosen])
    millis = 1000 * (time.perf_counter() - start)
    true_error = float(np.linalg.norm(A - matrix)) if matrix is not None else None
    return _record(args.algorithm, cfg.seed, res, oracle.counts(), true_error, opt,
                   res.bound_used, millis, extra)


# -- bench -------------------------------------------------------------------

def trial_seed(base, point, trial):
    return int(np.random.SeedSequence([base, point, trial]).generate_state(1, dtype=np.uint32)[0])


def _bench_job(job):
    n, size, point, trial, algorithms, cfg, opt, gap = job
    seed = trial_seed(cfg.seed, point, trial)
    inst = instances.gen_planted(n, size, opt, gap, seed)
    rows = []
    for algorithm in algorithms:
        rec = run_finite(algorithm, inst.A, inst.family, cfg.replace(seed=seed), inst.opt)
        rows.append({
            "n": n, "family_size": size, "algorithm": algorithm, "seed": seed,
            "right_q": rec.right_q, "left_q": rec.left_q, "vmv_q": rec.vmv_q,
            "total_q": rec.total_q,
            "true_error": _fmt(rec.true_error), "opt": _fmt(rec.opt), "ratio": _fmt(rec.ratio),
            "iterations": rec.iterations, "termination": rec.termination,
            "millis": f"{rec.millis:.3f}",
        })
    return rows


def _fmt(x):
    return "" if x is None else repr(float(x))


def run_bench(points, algorithms, cfg, trials, opt=0.1, gap=3.0, jobs=1):
    """Rows for every (point, algorithm, trial), sorted for reproducibility."""
    work = [(n, size, k, trial, tuple(algorithms), cfg, opt, gap)
            for k, (n, size) in enumerate(points) for trial in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            batches = list(pool.map(_bench_job, work))
    else:
        batches = [_bench_job(w) for w in work]
    rows = [row for batch in batches for row in batch]
    rows.sort(key=lambda r: (r["n"], r["family_size"], r["algorithm"], r["seed"]))
    return rows


def write_csv(rows, path):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue())


def cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",")]
    algorithms = [a.strip() for a in args.algorithms.split(",")]
    for a in algorithms:
        if a not in FINITE_ALGORITHMS:
            raise CLIError(f"unknown algorithm {a!r}")
    points = [(args.n, s) for s in sizes]
    rows = run_bench(points, algorithms, _config(args), args.trials, args.opt, args.gap, args.jobs)
    write_csv(rows, args.out)
    print(json.dumps({"rows": len(rows), "out": str(args.out)}))
    return 0


# -- argument parsing ----------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--const-c", type=float, default=4.0, help="universal-constant knob c")
    p.add_argument("--cap-l", type=int, default=None, help="ceiling on right-sketch columns")
    p.add_argument("--cap-m", type=int, default=None, help="ceiling on left-sketch columns")
    p.add_argument("--cap-q", type=int, default=None, help="ceiling on sampled representatives")
    p.add_argument("--cap-r", type=int, default=None, help="ceiling on right sketches per round")


def build_parser():
    parser = argparse.ArgumentParser(prog="famapprox", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write an instance directory")
    gen.add_argument("kind", choices=("planted", "wishart", "butterfly"))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--family", type=int, default=64, help="number of decoy members (planted)")
    gen.add_argument("--opt", type=float, default=0.1, help="planted member's distance to A")
    gen.add_argument("--gap", type=float, default=3.0, help="decoy distance multiplier")
    gen.add_argument("--scale", type=float, default=1.0, help="coefficient scale (butterfly)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    approx = sub.add_parser("approx", help="run one algorithm on an instance")
    approx.add_argument("--instance", required=True)
    approx.add_argument("--algorithm", required=True, choices=FINITE_ALGORITHMS + ("linear",))
    approx.add_argument("--bound", type=float, default=None, help="upper bound M on OPT")
    approx.add_argument("--alpha", type=float, default=0.5, help="additive accuracy (linear)")
    approx.add_argument("--radius", type=float, default=None, help="ball radius (covering on a basis)")
    approx.add_argument("--cover-alpha", type=float, default=None, help="covering radius (covering on a basis)")
    _add_config_flags(approx)
    approx.set_defaults(func=cmd_approx)

    bench = sub.add_parser("bench", help="sweep planted instances and write CSV")
    bench.add_argument("--sizes", default="16,256,4096,65536", help="comma-separated |F| values")
    bench.add_argument("--n", type=int, default=8)
    bench.add_argument("--algorithms", default="one-sided,two-sided")
    bench.add_argument("--trials", type=int, default=20)
    bench.add_argument("--opt", type=float, default=0.1)
    bench.add_argument("--gap", type=float, default=3.0)
    bench.add_argument("--jobs", type=int, default=1)
    bench.add_argument("--out", required=True)
    _add_config_flags(bench)
    # desk-scale sweeps: uncapped q saturates at |F| and m grows with sqrt(log|F|)
    bench.set_defaults(func=cmd_bench, **BENCH_CAPS)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CLIError, ValueError, OSError, KeyError) as err:
        print(f"famapprox: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
