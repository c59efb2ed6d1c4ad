"""Command-line front end.

Subcommands:
  check     build the certificate only
  simulate  integrate the configured ensemble and write trajectory CSVs
  bounds    print/write the explicit bounds a certificate implies
  iterate   run the level-by-level bounding scheme (stage models)
  verify    full pipeline: certificate, ensemble, tail stats, verdicts
  probe     random order-preservation sampling

Exit codes: 0 success, 1 failed (or disallowed inconclusive) verdicts,
2 configuration/parse errors, 3 numeric blow-up.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .certificates import certificate_for
from .errors import BlowUpError, ConfigError, FdekitError
from .harness import (
    EXIT_BLOW_UP,
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_VERDICT_FAILED,
    load_config,
    run,
    run_iteration,
    run_probe,
    write_certificate,
)
from .integrator import integrate, write_trajectory_csv


def _add_common(parser):
    parser.add_argument("config", help="path to a JSON experiment config")
    parser.add_argument("--out-dir", default="out", help="directory for report files")
    parser.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    parser.add_argument("--horizon", type=float, default=None, help="override the horizon")
    parser.add_argument("--step", type=float, default=None, help="override the step size")
    parser.add_argument(
        "--allow-inconclusive",
        action="store_true",
        default=None,
        help="exit 0 even when some verdicts are inconclusive",
    )


def _load(args):
    overrides = {
        "seed": args.seed,
        "horizon": args.horizon,
        "step": args.step,
        "allow_inconclusive": args.allow_inconclusive,
    }
    return load_config(args.config, overrides=overrides)


def _cmd_check(args):
    config = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cert = certificate_for(config.model)
    write_certificate(cert, config.analysis, out / "certificate.json")
    print(f"model: {cert.theorem}")
    for cond in cert.conditions:
        state = "inconclusive" if cond.inconclusive else ("holds" if cond.holds else "fails")
        print(f"  {cond.name}: {state} (margin {cond.margin:.6g})")
    print(
        f"persistent={cert.persistent} permanent={cert.permanent} attractor={cert.attractor}"
    )
    if not (cert.persistent or cert.permanent):
        print("not certified")
    print(f"wrote {out / 'certificate.json'}")
    return EXIT_OK


def _cmd_simulate(args):
    config = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, hist in enumerate(config.initial):
        traj = integrate(config.model, hist, config.integrator)
        path = out / f"trajectory_{k:03d}.csv"
        write_trajectory_csv(traj, path, stride=config.integrator.output_stride)
        d = traj.diagnostics
        print(
            f"trajectory {k}: T={traj.horizon:g} min_component={d.min_component:.6g} "
            f"junction_residual={d.max_junction_residual:.3g} "
            f"wall={d.wall_clock_seconds:.2f}s -> {path}"
        )
    return EXIT_OK


def _cmd_bounds(args):
    config = _load(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cert = certificate_for(config.model)
    record = cert.to_json()["bounds"]
    record["theorem"] = cert.theorem
    with open(out / "bounds.json", "w") as fh:
        json.dump(record, fh, indent=2)
        fh.write("\n")
    for key in ("m0", "M0", "equilibrium", "growth_at_equilibrium", "delta",
                "first_level_lower", "first_level_upper"):
        if record.get(key) is not None:
            print(f"{key} = {record[key]}")
    print(f"wrote {out / 'bounds.json'}")
    return EXIT_OK


def _cmd_iterate(args):
    config = _load(args)
    iterates, verdict, files = run_iteration(config, args.out_dir)
    last = iterates[-1]
    print(
        f"levels={verdict.levels} gap={verdict.gap:.6g} "
        f"lower={last.lower.tolist()} upper={last.upper.tolist()}"
    )
    print(f"equilibrium={verdict.equilibrium.tolist()} gap_to_eq={verdict.equilibrium_gap:.3g}")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def _cmd_verify(args):
    config = _load(args)
    result = run(config, args.out_dir)
    if result.failure:
        print(result.failure, file=sys.stderr)
        return result.exit_code
    for v in result.verdicts:
        print(f"[{v.status}] {v.claim} (trajectory {v.trajectory}): margin {v.margin:.6g}")
    if not result.verdicts:
        print("no certified claims; nothing to verify")
    for f in result.files:
        print(f"wrote {f}")
    return result.exit_code


def _cmd_probe(args):
    config = _load(args)
    report, files = run_probe(config, args.out_dir)
    if report.passed:
        print(f"order preservation held on {report.n_pairs} sampled pairs")
    else:
        w = report.witness
        print(
            f"order preservation FAILED: component {w['component']} "
            f"gap {w['gap']:.6g} (see probe.json)"
        )
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fdekit",
        description="simulate delay population models and verify their "
        "persistence/permanence certificates",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("check", _cmd_check),
        ("simulate", _cmd_simulate),
        ("bounds", _cmd_bounds),
        ("iterate", _cmd_iterate),
        ("verify", _cmd_verify),
        ("probe", _cmd_probe),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOW_UP
    except FdekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERDICT_FAILED


if __name__ == "__main__":
    sys.exit(main())
