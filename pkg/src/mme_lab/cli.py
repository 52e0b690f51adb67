"""
mme-lab: command line entry point

Usage:
    mme-lab analyze --config basilica --out out/basilica     Full pipeline, JSON report
    mme-lab render --config basilica --resolution 512        Atlas, density and ray PNGs
    mme-lab fixtures                                         All four bundled examples
    mme-lab fixtures --only basilica                         One row
    mme-lab trace-ray --config basilica --theta 1/3          One external ray as CSV
    mme-lab sample --config basilica --n 10000 --seed 7      Backward-iteration samples

--config takes a TOML file or the name of a bundled fixture.  Exit codes:
0 success, 1 hard error, 2 some verdict was UNDECIDED/AMBIGUOUS or a fixture
expectation was not met (outputs are still written).

Environment:
    MME_LAB_THREADS     cap on worker threads for the grid kernels
"""

import argparse
import os
import sys
from pathlib import Path

from . import config as cf
from .errors import MMELabError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNDECIDED = 2


def _log(msg):
    print(f"  .. {msg}", file=sys.stderr)


def _apply_threads():
    val = os.environ.get("MME_LAB_THREADS")
    if not val:
        return
    try:
        n = int(val)
    except ValueError:
        raise MMELabError(f"MME_LAB_THREADS must be a positive integer, got {val!r}") from None
    if n < 1:
        raise MMELabError(f"MME_LAB_THREADS must be a positive integer, got {val!r}")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _config(args, name=None):
    cfg = cf.load_fixture(name) if name else cf.resolve(args.config)
    return cf.replace(
        cfg,
        resolution=getattr(args, "resolution", None),
        n_samples=getattr(args, "n", None),
        rng_seed=getattr(args, "seed", None),
    )


def _out_dir(args, cfg):
    return Path(args.out) if getattr(args, "out", None) else Path(cfg.out)


def cmd_analyze(args):
    """Run the pipeline for one config and write report.json, samples.csv, atlas.bin, ray CSVs."""
    from .pipeline import analyze, write_outputs

    cfg = _config(args)
    out = _out_dir(args, cfg)
    res = analyze(cfg, log=_log)
    for p in write_outputs(res, out):
        print(p)
    s = res.report["summary"]
    print(f"{cfg.name}: {s['classification']}, {s['components_observed']} components, "
          f"{s['boundary_is_j']} dichotomy winner(s), grand orbit {s['grand_orbit']}")
    for w in res.report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    return res.exit_code


def cmd_render(args):
    """Atlas colouring, density overlay and ray overlay PNGs."""
    from .pipeline import layers, render_outputs

    cfg = _config(args)
    out = _out_dir(args, cfg)
    atlas, samples, traces = layers(cfg, log=_log)
    for p in render_outputs(cfg, atlas, samples, traces, out):
        print(p)
    return EXIT_OK


def cmd_fixtures(args):
    """Analyze the bundled examples and print one summary row each."""
    from .pipeline import analyze, summary_row, write_outputs

    names = args.only or list(cf.FIXTURES)
    known = cf.fixture_names()
    for n in names:
        if n not in known:
            raise cf.ConfigError(f"unknown fixture {n!r}; known: {', '.join(known)}")
    base = Path(args.out) if args.out else Path("out")
    rows = []
    code = EXIT_OK
    for n in names:
        print(f"[{n}]", file=sys.stderr)
        res = analyze(_config(args, n), log=_log)
        write_outputs(res, base / n)
        rows.append(summary_row(res))
        code = max(code, res.exit_code)

    header = ("fixture", "classification", "components", "winners", "grand_orbit", "ok")
    print("  ".join(f"{h:<22}" if i == 1 else f"{h:<12}" for i, h in enumerate(header)))
    for r in rows:
        go = "-" if r["grand_orbit"] is None else ("pass" if r["grand_orbit"] else "FAIL")
        vals = (r["name"], r["classification"], r["components"], r["dichotomy_winners"], go,
                "yes" if r["ok"] else "NO")
        print("  ".join(f"{str(v):<22}" if i == 1 else f"{str(v):<12}" for i, v in enumerate(vals)))
    return code


def cmd_trace_ray(args):
    """Trace one external ray and write it as CSV."""
    from .pipeline import ray_filename
    from .rays import LOST, landing, trace_ray, write_ray_csv

    cfg = _config(args)
    ray = trace_ray(cfg.rational_map(), args.theta, steps=args.steps)
    out = Path(args.out) if args.out else Path(cfg.out) / ray_filename(ray.theta)
    if out.suffix != ".csv":
        out = out / ray_filename(ray.theta)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ray_csv(ray, out)
    print(out)
    if ray.status == LOST:
        print(f"theta={ray.theta}: LOST after {len(ray.samples)} samples")
        return EXIT_UNDECIDED
    status, z = landing(ray)
    where = "" if z is None else f" at {z.real:.15g}{z.imag:+.15g}j"
    print(f"theta={ray.theta}: {status}{where}")
    return EXIT_OK


def cmd_sample(args):
    """Backward-iteration samples of the measure of maximal entropy, as CSV."""
    from .maps import conjugate
    from .pipeline import original_samples
    from .sampler import DEFAULT_TEST_FUNCTIONS, invariance_check, sample_backward, write_samples_csv

    cfg = _config(args)
    M = cfg.mobius()
    S = conjugate(cfg.rational_map(), M)
    seed = None if cfg.seed_point is None else M(complex(*cfg.seed_point))
    samples = sample_backward(S, seed, cfg.burn_in, cfg.n_samples, cfg.rng_seed)
    out = Path(args.out) if args.out else Path(cfg.out) / "samples.csv"
    if out.suffix != ".csv":
        out = out / "samples.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_samples_csv(original_samples(cfg, samples), out)
    print(out)
    for name, (d, t) in zip(DEFAULT_TEST_FUNCTIONS, invariance_check(samples, S)):
        print(f"invariance {name}: |delta| = {d:.3e} (threshold {t:.3e}) {'pass' if d <= t else 'FAIL'}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mme-lab", description="Measure of maximal entropy lab")
    subparsers = parser.add_subparsers(dest="command")

    def common(p, out_help):
        p.add_argument("--config", "-c", required=True, help="TOML config file or bundled fixture name")
        p.add_argument("--out", "-o", help=out_help)

    p = subparsers.add_parser("analyze", help="Run the full pipeline and write a JSON report")
    common(p, "output directory (default: the config's output dir)")
    p.add_argument("--seed", type=int, help="sampler RNG seed")
    p.add_argument("--resolution", type=int, help="atlas grid size")
    p.add_argument("--n", type=int, help="number of samples")
    p.set_defaults(func=cmd_analyze)

    p = subparsers.add_parser("render", help="Write atlas, density and ray PNGs")
    common(p, "output directory")
    p.add_argument("--seed", type=int, help="sampler RNG seed")
    p.add_argument("--resolution", type=int, help="image size in pixels")
    p.add_argument("--n", type=int, help="number of samples")
    p.set_defaults(func=cmd_render)

    p = subparsers.add_parser("fixtures", help="Analyze the bundled examples and print a summary table")
    p.add_argument("--only", action="append", metavar="NAME", help="run only this fixture (repeatable)")
    p.add_argument("--out", "-o", help="parent directory for per-fixture outputs (default: out)")
    p.add_argument("--seed", type=int, help="sampler RNG seed")
    p.add_argument("--resolution", type=int, help="atlas grid size")
    p.add_argument("--n", type=int, help="number of samples")
    p.set_defaults(func=cmd_fixtures)

    p = subparsers.add_parser("trace-ray", help="Trace one external ray of a polynomial")
    common(p, "CSV path or directory")
    p.add_argument("--theta", required=True, help="angle in turns, e.g. 1/3 or 0.25")
    p.add_argument("--steps", type=int, default=400, help="potential levels to visit")
    p.set_defaults(func=cmd_trace_ray)

    p = subparsers.add_parser("sample", help="Write backward-iteration samples as CSV")
    common(p, "CSV path or directory")
    p.add_argument("--seed", type=int, help="sampler RNG seed")
    p.add_argument("--n", type=int, help="number of samples")
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return EXIT_ERROR
    try:
        _apply_threads()
        return args.func(args)
    except (MMELabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
