"""Command-line entry point.

Subcommands: risk, mine, quantiles, synth, mask, selfcheck. Exit codes:
0 success, 2 input/schema error, 3 synthesis failure, 4 I/O error.
Seeds come from --seed or the RFG_SEED environment variable.
"""

import argparse
import glob
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import RiskgenError, SchemaError, SynthesisError
from .masks import BlobParams, LatentVolume, MaskKind, MaskVolume, fuse_masks, \
    geometric_mask, motion_mask, export_masks
from .mining import ScalarMode, mine_report, write_mine_report, write_profile_csv, \
    risk_quantiles
from .risk import RiskParams, risk_profile
from .scenario import load_scenario
from .synth import RiskTarget, SynthesisConfig, load_motions, synthesize, \
    write_motions_json
from .tensor import load_tensor

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SYNTH = 3
EXIT_IO = 4


def _seed(args):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("RFG_SEED")
    if env is not None:
        return int(env)
    return 0


def _load_params(args):
    if getattr(args, "params", None):
        return RiskParams.from_json(args.params)
    return RiskParams()


def cmd_risk(args):
    sc = load_scenario(args.scenario)
    params = _load_params(args)
    if args.agg:
        params.aggregation = params.aggregation.__class__(args.agg)
    profile = risk_profile(sc, params)
    write_profile_csv(profile, args.out)
    if args.breakdown:
        events = {
            "scenario": sc.scenario_id,
            "frames": [
                {"frame": t, "risk": float(profile.values[t]),
                 "top_agent": profile.per_frame_top_agent[t][0],
                 "top_agent_risk": float(profile.per_frame_top_agent[t][1])}
                for t in range(sc.horizon)
            ],
        }
        with open(args.breakdown, "w", encoding="utf-8") as fh:
            json.dump(events, fh, sort_keys=True, indent=1)
            fh.write("\n")
    print(f"wrote {sc.horizon}-row profile to {args.out}")
    return EXIT_OK


def cmd_mine(args):
    paths = sorted(glob.glob(os.path.join(args.dir, "*.json")))
    if not paths:
        print(f"error: no scenario files in {args.dir}", file=sys.stderr)
        return EXIT_INPUT
    params = _load_params(args)
    profiles = [risk_profile(load_scenario(p), params) for p in paths]
    probs = [float(q) for q in args.quantiles.split(",")]
    report = mine_report(
        profiles, args.threshold, args.min_duration, probs,
        mode=ScalarMode(args.pool_mode),
    )
    write_mine_report(report, args.out)
    print(f"mined {len(profiles)} scenarios -> {args.out}")
    return EXIT_OK


def cmd_quantiles(args):
    with open(args.pool, "r", encoding="utf-8") as fh:
        pool = json.load(fh)
    probs = [float(q) for q in args.quantiles.split(",")]
    values = risk_quantiles(pool, probs)
    for p, v in zip(probs, values):
        print(f"{p:g},{v:.9g}")
    return EXIT_OK


def cmd_synth(args):
    sc = load_scenario(args.scenario)
    params = _load_params(args)
    target = RiskTarget.scalar_target(args.target_risk, tau=args.tau)
    config = SynthesisConfig(
        num_modes=args.modes,
        iterations=args.iterations,
        population=args.population,
        seed=_seed(args),
    )
    result = synthesize(sc, target, params, config)
    write_motions_json(result, args.out)
    print(
        f"R_min={result.r_min:.9g} R_max={result.r_max:.9g} "
        f"loss={result.loss:.9g} -> {args.out}"
    )
    return EXIT_OK


def _mask_volumes(sc, motions, blob, latent_path, lat_h, lat_w):
    geo = geometric_mask(sc, motions, blob, (lat_h, lat_w))
    if latent_path:
        latent = LatentVolume(load_tensor(latent_path))
    else:
        # default latent: the geometric mask itself as a one-channel video,
        # so motion cues reflect actual agent displacement
        latent = LatentVolume(geo.data[:, :, None, :, :, :])
    mot = motion_mask(latent, blob)
    if mot.data.shape != geo.data.shape:
        raise SchemaError(
            f"latent mask shape {mot.data.shape} does not match "
            f"geometric mask shape {geo.data.shape}"
        )
    return geo, mot, fuse_masks(geo, mot)


def _manifest(sc, names, args, digest):
    return {
        "files": names,
        "num_cameras": len(sc.cameras),
        "num_frames": sc.horizon,
        "parameters": {
            "latent": args.latent or "",
            "latent_size": [args.latent_height, args.latent_width],
            "mode": args.mode,
            "points_per_agent": args.points_per_agent,
            "sigma_h": args.sigma_h,
            "sigma_w": args.sigma_w,
            "soft_threshold": args.soft_threshold,
        },
        "scenario": sc.scenario_id,
        "sha256": digest,
        "version": __version__,
    }


def cmd_mask(args):
    sc = load_scenario(args.scenario)
    hypotheses = load_motions(args.motions, sc.dt)
    idx = args.mode if args.mode >= 0 else len(hypotheses) - 1
    if not 0 <= idx < len(hypotheses):
        print(f"error: mode index {args.mode} out of range", file=sys.stderr)
        return EXIT_INPUT
    blob = BlobParams(
        sigma_w=args.sigma_w,
        sigma_h=args.sigma_h,
        soft_threshold=args.soft_threshold,
        points_per_agent=args.points_per_agent,
    )
    geo, mot, fused = _mask_volumes(
        sc, hypotheses[idx].motions, blob, args.latent,
        args.latent_height, args.latent_width,
    )
    kind = {"geometric": geo, "motion": mot, "fused": fused}[args.kind]
    try:
        names = export_masks(kind, args.out_dir)
    except OSError as exc:
        print(f"error: cannot write masks: {exc}", file=sys.stderr)
        return EXIT_IO
    digest = hashlib.sha256()
    for name in names:
        with open(os.path.join(args.out_dir, name), "rb") as fh:
            digest.update(fh.read())
    manifest = _manifest(sc, names, args, digest.hexdigest())
    manifest_path = os.path.join(args.out_dir, "manifest.json")
    if args.verify:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            previous = json.load(fh)
        if previous != manifest:
            print("error: manifest mismatch on --verify", file=sys.stderr)
            return EXIT_INPUT
        print("manifest verified")
        return EXIT_OK
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    print(f"wrote {len(names)} masks + manifest to {args.out_dir}")
    return EXIT_OK


def cmd_selfcheck(args):
    from .selfcheck import run_all

    failures = run_all()
    if failures:
        print(f"selfcheck FAILED: {', '.join(failures)}")
        return 1
    print("selfcheck passed")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="riskgen",
        description="Risk-field analysis, risk-controllable motion synthesis, "
        "and multi-view mask generation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("risk", help="per-frame risk profile of one scenario")
    p.add_argument("scenario")
    p.add_argument("--params", help="risk_params.json")
    p.add_argument("--agg", choices=["sum", "max"], default=None)
    p.add_argument("--out", default="risk_profile.csv")
    p.add_argument("--breakdown", help="optional per-frame breakdown JSON")
    p.set_defaults(fn=cmd_risk)

    p = sub.add_parser("mine", help="events + pool quantiles over a scenario dir")
    p.add_argument("dir")
    p.add_argument("--params")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-duration", type=int, default=3, dest="min_duration")
    p.add_argument("--quantiles", default="0.2,0.8,0.95")
    p.add_argument("--pool-mode", choices=["max_frame", "mean_frame"],
                   default="max_frame", dest="pool_mode")
    p.add_argument("--out", default="mine_report.json")
    p.set_defaults(fn=cmd_mine)

    p = sub.add_parser("quantiles", help="quantiles of a JSON list of scalars")
    p.add_argument("pool", help="JSON file holding a list of numbers")
    p.add_argument("--quantiles", default="0.2,0.8,0.95")
    p.set_defaults(fn=cmd_quantiles)

    p = sub.add_parser("synth", help="risk-targeted motion synthesis")
    p.add_argument("scenario")
    p.add_argument("--params")
    p.add_argument("--target-risk", type=float, required=True, dest="target_risk")
    p.add_argument("--tau", type=float, default=2.0)
    p.add_argument("--modes", type=int, default=4)
    p.add_argument("--iterations", type=int, default=60)
    p.add_argument("--population", type=int, default=32)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="motions.json")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("mask", help="multi-view corruption masks from motions")
    p.add_argument("scenario")
    p.add_argument("motions", help="motions.json from the synth subcommand")
    p.add_argument("--mode", type=int, default=-1,
                   help="hypothesis index (-1 = highest risk)")
    p.add_argument("--kind", choices=["geometric", "motion", "fused"],
                   default="fused")
    p.add_argument("--latent", help="optional latent tensor (RFGT binary)")
    p.add_argument("--latent-width", type=int, default=60, dest="latent_width")
    p.add_argument("--latent-height", type=int, default=34, dest="latent_height")
    p.add_argument("--sigma-w", type=float, default=2.0, dest="sigma_w")
    p.add_argument("--sigma-h", type=float, default=2.0, dest="sigma_h")
    p.add_argument("--soft-threshold", type=float, default=0.0, dest="soft_threshold")
    p.add_argument("--points-per-agent", type=int, default=9, dest="points_per_agent")
    p.add_argument("--out-dir", default="masks", dest="out_dir")
    p.add_argument("--verify", action="store_true",
                   help="recompute and compare against an existing manifest")
    p.set_defaults(fn=cmd_mask)

    p = sub.add_parser("selfcheck", help="run every invariant/gradient suite")
    p.set_defaults(fn=cmd_selfcheck)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SynthesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTH
    except (OSError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RiskgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
