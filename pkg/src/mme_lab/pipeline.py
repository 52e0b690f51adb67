"""End-to-end analysis of one experiment config: cycles, atlas, samples, measures, rays."""

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import measure as ms
from .atlas import build_atlas, complete_invariance_check, connectivity_of_J_polynomial, write_atlas
from .cycles import find_cycles, point_to_json
from .errors import NotAForwardCycle
from .maps import INF, conjugate
from .rays import COLAND, DISTINCT, LOST, UNDECIDED, as_angle, colanding_pair, landing, trace_ray, write_ray_csv
from .render import render_all
from .sampler import MMESampleSet, invariance_check, sample_backward, write_samples_csv

SCHEMA_VERSION = 1


@dataclass
class Analysis:
    config: object
    report: dict
    atlas: object = None
    samples: object = None
    rays: list = field(default_factory=list)
    exit_code: int = 0


def _pt(z):
    return point_to_json(INF if z is INF else complex(z))


def _grand_orbit_groups(atlas, principal):
    """Principal components grouped by cycle, for cycles with more than one."""
    groups = {}
    for cid in principal:
        groups.setdefault(atlas.components[cid].cycle_id, []).append(cid)
    return [g for g in groups.values() if len(g) > 1]


def analyze(cfg, log=None):
    """Run the full pipeline; returns an Analysis with the JSON-ready report."""
    say = log or (lambda msg: None)
    t0 = time.time()
    R = cfg.rational_map()
    M = cfg.mobius()
    Minv = M.inverse()
    warnings = []

    say("cycles")
    cycles = find_cycles(R, cfg.k_max)
    classification = ms.classify_map(R, cycles)

    S = conjugate(R, M)
    chart_cycles = cycles if M.is_identity else find_cycles(S, cfg.k_max)

    say("atlas")
    atlas = build_atlas(S, cfg.window(), chart_cycles, max_iter=cfg.max_iter, tol_par=cfg.tol_par)

    say("samples")
    seed = None if cfg.seed_point is None else M(complex(*cfg.seed_point))
    samples = sample_backward(S, seed, cfg.burn_in, cfg.n_samples, cfg.rng_seed)
    inv = invariance_check(samples, S)

    say("measures")
    principal = ms.principal_components(atlas)
    estimates = []
    residual = []
    for eps in cfg.epsilons:
        for cid in principal:
            estimates.append(ms.boundary_measure(samples, atlas, cid, eps))
        residual.append(ms.residual_mass(samples, atlas, eps))
    dich = ms.dichotomy_report(samples, atlas, cfg.epsilons, components=None)
    warnings.extend(dich.warnings)
    verdicts = [v for _, _, v in dich.rows]

    grand = []
    for group in _grand_orbit_groups(atlas, principal):
        try:
            grand.append(ms.grand_orbit_equality(samples, atlas, group, cfg.grand_orbit_epsilon))
        except NotAForwardCycle as exc:
            warnings.append(f"components {group}: {exc}")

    invariance = []
    for cid in principal:
        ok = complete_invariance_check(S, atlas, cid, cfg.invariance_probes)
        invariance.append({"component": cid, "completely_invariant": ok})

    components = []
    for cid in principal:
        comp = atlas.components[cid]
        anchor = ms.component_anchor(atlas, cid)
        d = comp.to_dict()
        d["anchor"] = _pt(anchor)
        d["anchor_original"] = _pt(Minv(anchor))
        components.append(d)

    connectivity = None
    ray_rows = []
    pair_rows = []
    traces = []
    if R.is_polynomial:
        connectivity = connectivity_of_J_polynomial(R)
        if connectivity == "CONNECTED" and (cfg.angles or cfg.pairs):
            say("rays")
            for a in cfg.angles:
                ray = trace_ray(R, a)
                traces.append(ray)
                row = {"theta": str(as_angle(a)), "status": ray.status, "samples": len(ray.samples)}
                if ray.status != LOST:
                    st, p = landing(ray)
                    row["landing"] = None if p is None else _pt(p)
                ray_rows.append(row)
            for a, b in cfg.pairs:
                st, val = colanding_pair(R, a, b)
                row = {"thetas": [str(as_angle(a)), str(as_angle(b))], "verdict": st}
                if st == COLAND:
                    row["point"] = _pt(val)
                elif st == DISTINCT:
                    row["points"] = [_pt(v) for v in val]
                pair_rows.append(row)
        elif cfg.angles or cfg.pairs:
            warnings.append("rays skipped: the Julia set is not connected")

    escaping = sum(1 for d in classification.dispositions if d.escapes)
    summary = {
        "classification": classification.verdict,
        "components_observed": len(atlas.components),
        "boundary_is_j": len(dich.winners()),
        "grand_orbit": all(g.passed for g in grand) if grand else None,
        "escaping_critical": escaping,
        "connectivity": connectivity,
    }
    mismatches = []
    for key, want in cfg.expect.items():
        got = summary.get(key)
        if got != want:
            mismatches.append({"check": key, "expected": want, "observed": got})
            warnings.append(f"expected {key} = {want!r}, observed {got!r}")

    report = {
        "schema": SCHEMA_VERSION,
        "map": {
            "name": cfg.name,
            "description": cfg.description,
            "numerator": cfg.numerator,
            "denominator": cfg.denominator,
            "degree": R.degree,
            "fingerprint": R.fingerprint(),
            "chart": None if M.is_identity else M.to_list(),
        },
        "classification": classification.to_dict(),
        "cycles": [c.to_dict() for c in cycles],
        "atlas": {
            "window": {
                "center": [atlas.window.center.real, atlas.window.center.imag],
                "half_width": atlas.window.half_width,
                "resolution": atlas.window.resolution,
            },
            "component_count": len(atlas.components),
            "unresolved_fraction": atlas.unresolved_fraction,
            "has_unbounded_component": atlas.has_unbounded_component,
        },
        "samples": {
            "n": samples.n,
            "burn_in": samples.burn_in,
            "rng_seed": samples.rng_seed,
            "seed_point": _pt(samples.seed_point),
            "invariance": [{"delta": d, "threshold": t, "pass": d <= t} for d, t in inv],
        },
        "components": components,
        "estimates": [e.to_dict() for e in estimates],
        "residual": [e.to_dict() for e in residual],
        "dichotomy": dich.to_list(),
        "grand_orbit": [g.to_dict() for g in grand],
        "complete_invariance": invariance,
        "connectivity": connectivity,
        "rays": ray_rows,
        "ray_pairs": pair_rows,
        "summary": summary,
        "expectations": mismatches,
        "warnings": warnings,
        "metadata": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "seconds": round(time.time() - t0, 2)},
    }
    undecided = (
        ms.AMBIGUOUS in verdicts
        or classification.verdict == ms.UNDETERMINED
        or any(r["verdict"] == UNDECIDED for r in pair_rows)
        or bool(mismatches)
    )
    return Analysis(cfg, report, atlas, samples, traces, 2 if undecided else 0)


def layers(cfg, log=None):
    """Atlas, samples and ray traces only: what a render needs, without the measures."""
    say = log or (lambda msg: None)
    R = cfg.rational_map()
    M = cfg.mobius()
    S = conjugate(R, M)
    say("cycles")
    cycles = find_cycles(S, cfg.k_max)
    say("atlas")
    atlas = build_atlas(S, cfg.window(), cycles, max_iter=cfg.max_iter, tol_par=cfg.tol_par)
    say("samples")
    seed = None if cfg.seed_point is None else M(complex(*cfg.seed_point))
    samples = sample_backward(S, seed, cfg.burn_in, cfg.n_samples, cfg.rng_seed)
    traces = []
    if R.is_polynomial and cfg.angles and connectivity_of_J_polynomial(R) == "CONNECTED":
        say("rays")
        traces = [trace_ray(R, a) for a in cfg.angles]
    return atlas, samples, traces


def original_samples(cfg, samples):
    """Chart samples pulled back to the coordinate of the configured map."""
    M = cfg.mobius()
    if M.is_identity:
        return samples
    pts = M.inverse().apply_array(samples.points)
    return MMESampleSet(np.ascontiguousarray(pts), samples.seed_point, samples.burn_in, samples.n,
                        samples.rng_seed, cfg.rational_map().fingerprint())


def ray_filename(theta):
    t = as_angle(theta)
    return f"ray_{t.numerator}_{t.denominator}.csv"


def write_report(report, path):
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=False) + "\n")


def write_outputs(analysis, out_dir):
    """report.json, samples.csv (map coordinate), atlas.bin (chart) and one CSV per ray."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "samples.csv", out / "atlas.bin"]
    write_report(analysis.report, paths[0])
    write_samples_csv(original_samples(analysis.config, analysis.samples), paths[1])
    write_atlas(analysis.atlas, paths[2])
    for ray in analysis.rays:
        p = out / ray_filename(ray.theta)
        write_ray_csv(ray, p)
        paths.append(p)
    return paths


def render_outputs(cfg, atlas, samples, traces, out_dir):
    """PNG renders in the chart coordinate (rays are mapped through the chart)."""
    M = cfg.mobius()
    rays = [M.apply_array(np.array([z for _, z in t.samples])) for t in traces]
    return render_all(atlas, samples.points, out_dir, rays)


def summary_row(analysis):
    s = analysis.report["summary"]
    return {
        "name": analysis.config.name,
        "classification": s["classification"],
        "components": s["components_observed"],
        "dichotomy_winners": s["boundary_is_j"],
        "grand_orbit": s["grand_orbit"],
        "ok": analysis.exit_code == 0,
    }


def strip_metadata(report):
    return {k: v for k, v in report.items() if k != "metadata"}
