"""Command-line entry points: headless runs, the live service, the payload
report, and workspace sampling."""

from __future__ import annotations

import argparse
import json
import sys

from .dynamics import (
    LinkParams,
    gravity_torques,
    inertia_moments,
    max_payload_dynamic,
    max_payload_static,
    torque_capacities,
)
from .kinematics import sample_workspace
from .scenario import ScenarioError, load_scenario
from .sim import run_headless


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_headless(scenario, args.duration, out_dir=args.out, snapshot_every=args.snapshot_every)
    print(json.dumps(result.summary(), indent=2, sort_keys=True))
    return 0


def _cmd_serve(args) -> int:
    from .server import serve

    scenario = load_scenario(args.scenario)
    serve(scenario, port=args.port, speed=args.speed, host=args.host)
    return 0


def _cmd_payload(args) -> int:
    p = LinkParams()
    caps = torque_capacities(p)
    i2, i3 = inertia_moments(p)
    hold = gravity_torques(p, payload_weight=0.0)
    static = max_payload_static(p)
    dynamic = max_payload_dynamic(p)
    print("torque capacity (N*m): " + "  ".join(f"joint{i + 1}={c:.4f}" for i, c in enumerate(caps)))
    print(f"gravity holding torques, no payload (N*m): t2={hold.t2g:.4f}  t3={hold.t3g:.4f}  t4={hold.t4g:.4f}")
    print(f"link moments of inertia (kg*m^2): I2={i2:.8f}  I3={i3:.8f}")
    print(f"max static payload:  {static.payload_weight:.4f} N  (binding joint {static.binding_joint})")
    print(
        f"max dynamic payload: {dynamic.payload_weight:.4f} N  "
        f"(binding joint {dynamic.binding_joint}, accel margin {p.alpha_max} rad/s^2)"
    )
    return 0


def _cmd_workspace(args) -> int:
    cloud = sample_workspace(args.n, args.seed)
    cloud.to_csv(args.out)
    print(f"wrote {cloud.count} workspace points to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robofeed",
        description="Deterministic simulation of a 4-joint assistive feeding arm.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario headless and print the summary")
    p_run.add_argument("--scenario", required=True, help="scenario JSON file")
    p_run.add_argument("--duration", type=float, default=60.0, help="simulated seconds")
    p_run.add_argument("--out", default=None, help="directory for run.jsonl / trace.jsonl / summary.json")
    p_run.add_argument("--snapshot-every", type=int, default=1, help="keep every k-th tick snapshot")
    p_run.set_defaults(func=_cmd_run)

    p_serve = sub.add_parser("serve", help="serve the simulation over HTTP/WebSocket")
    p_serve.add_argument("--scenario", required=True, help="scenario JSON file")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--speed", type=float, default=1.0, help="simulated seconds per wall second")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.set_defaults(func=_cmd_serve)

    p_payload = sub.add_parser("payload", help="print the torque and payload report")
    p_payload.set_defaults(func=_cmd_payload)

    p_ws = sub.add_parser("workspace", help="sample the reachable workspace to CSV")
    p_ws.add_argument("--n", type=int, default=2000)
    p_ws.add_argument("--seed", type=int, default=0)
    p_ws.add_argument("--out", default="workspace.csv")
    p_ws.set_defaults(func=_cmd_workspace)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        from .server import ServerError

        if isinstance(exc, ServerError):
            print(f"server error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
