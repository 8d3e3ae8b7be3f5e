"""Command-line front end: ``lmcf run|list|flow|spectrum|secondvar|calibrate|residual|correspond``.

The task subcommands build a scenario from an optional base (``--scenario``
file or built-in name) plus flags that mirror scenario fields one to one,
then run it exactly like ``lmcf run``.

Exit codes: 0 success, 2 invalid scenario, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from typing import Any

from .errors import LmcfError, ScenarioError
from .scenarios import SCHEMA, TASKS, execute, list_scenarios, load_scenario, validate_scenario

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _key_values(items: list[str] | None, flag: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in items or []:
        for part in item.split(","):
            if "=" not in part:
                raise ScenarioError(f"{flag}: expected key=value, got {part!r}")
            key, value = part.split("=", 1)
            out[key.strip()] = _parse_value(value.strip())
    return out


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="base scenario: JSON file or built-in name")
    p.add_argument("--name", help="scenario name (output subdirectory)")
    p.add_argument("--potential", help="ambient.potential")
    p.add_argument("--m", type=int, help="ambient.m")
    p.add_argument("--T", type=_parse_value, help="ambient.T as a JSON list")
    p.add_argument("--family", help="geometry.family")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="geometry.params entry (repeatable)")
    p.add_argument("--resolution", type=_parse_value, help="geometry.resolution (int or [n1, n2])")
    p.add_argument("--backend", choices=["analytic", "polyline"], help="geometry.backend")
    p.add_argument("--truncation", type=float, help="geometry.truncation")
    p.add_argument("--seed", type=int, help="seed")
    p.add_argument("--out", help="output.dir")
    p.add_argument("--formats", help="output.formats, comma separated")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmcf", description="f-minimal Lagrangians and generalized LMCF experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file or built-in")
    p.add_argument("scenario", help="scenario JSON file or built-in name")
    p.add_argument("--out-root", help="output root (overrides output.dir)")

    p = sub.add_parser("list", help="list built-in scenarios")
    p.add_argument("--json", action="store_true", help="print the catalog as JSON")

    p = sub.add_parser("schema", help="print the scenario JSON schema")

    p = sub.add_parser("residual", help="f-minimality residual and first variation")
    _add_common(p)
    p.add_argument("--variation", choices=["none", "normal", "outward_normal"])
    p.add_argument("--fd-step", type=float, dest="fd_step")
    p.add_argument("--richardson-step", type=float, dest="richardson_step")
    p.add_argument("--refinement", type=_parse_value, help="JSON list of polyline resolutions")
    p.add_argument("--identities", type=_parse_value, help="true/false")

    p = sub.add_parser("spectrum", help="Witten Laplacian eigenvalues")
    _add_common(p)
    p.add_argument("-k", type=int, dest="k", help="number of eigenpairs")

    p = sub.add_parser("secondvar", help="second variation report")
    _add_common(p)
    p.add_argument("--mode", choices=["analytic", "fd", "both"])
    p.add_argument("--fd-step", type=float, dest="fd_step")
    p.add_argument("--headline-mode", type=int, dest="headline_mode")
    p.add_argument("--fourier-modes", type=int, dest="fourier_modes")
    p.add_argument("--random", type=int)
    p.add_argument("--random-modes", type=int, dest="random_modes")

    p = sub.add_parser("flow", help="GLMCF time stepping")
    _add_common(p)
    p.add_argument("--dt", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--scheme", choices=["explicit", "semi-implicit"])
    p.add_argument("--record-every", type=int, dest="record_every")
    p.add_argument("--redistribute-every", type=int, dest="redistribute_every")
    p.add_argument("--snapshots", type=int)
    p.add_argument("--correspond", action="store_true", default=None)
    p.add_argument("--perturb", action="append", metavar="u=NAME,eps=V", help="perturbation profile and size")

    p = sub.add_parser("calibrate", help="calibration inequality and f-SLag checks")
    _add_common(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--compat-points", type=int, dest="compat_points")
    p.add_argument("--radius", type=float)

    p = sub.add_parser("correspond", help="GLMCF / coupled-flow correspondence")
    _add_common(p)
    p.add_argument("--horizon", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--compare-every", type=int, dest="compare_every")
    p.add_argument("--scheme", choices=["explicit", "semi-implicit"])
    return parser


TASK_FLAGS = {
    "residual": ("variation", "fd_step", "richardson_step", "refinement", "identities"),
    "spectrum": ("k",),
    "secondvar": ("mode", "fd_step", "headline_mode", "fourier_modes", "random", "random_modes"),
    "flow": ("dt", "steps", "scheme", "record_every", "redistribute_every", "snapshots", "correspond"),
    "calibrate": ("samples", "compat_points", "radius"),
    "correspond": ("horizon", "dt", "compare_every", "scheme"),
}


def scenario_from_args(args: argparse.Namespace) -> dict:
    """Merge a base scenario with command-line overrides for a task subcommand."""
    task = args.command
    base = copy.deepcopy(load_scenario(args.scenario)) if args.scenario else {}
    sc: dict[str, Any] = {
        "name": base.get("name", f"cli-{task}"),
        "seed": base.get("seed", 0),
        "ambient": dict(base.get("ambient", {"potential": "constant", "m": 1})),
        "geometry": dict(base.get("geometry", {"family": "circle", "resolution": 256})),
    }
    for key in ("description", "output"):
        if key in base:
            sc[key] = copy.deepcopy(base[key])
    old_task = base.get("task", {})
    sc["task"] = dict(old_task) if old_task.get("type") == task else {"type": task}
    if args.name:
        sc["name"] = args.name
    if args.seed is not None:
        sc["seed"] = args.seed
    for flag, key in (("potential", "potential"), ("m", "m"), ("T", "T")):
        if getattr(args, flag) is not None:
            sc["ambient"][key] = getattr(args, flag)
    geo = sc["geometry"]
    if args.family is not None and args.family != geo.get("family"):
        geo = {"family": args.family, "resolution": geo.get("resolution", 256)}
    for key in ("resolution", "backend", "truncation"):
        if getattr(args, key) is not None:
            geo[key] = getattr(args, key)
    params = _key_values(args.param, "--param")
    if params:
        geo["params"] = {**geo.get("params", {}), **params}
    sc["geometry"] = geo
    for key in TASK_FLAGS[task]:
        value = getattr(args, key, None)
        if value is not None:
            sc["task"][key] = value
    if task == "flow" and args.perturb:
        spec = _key_values(args.perturb, "--perturb")
        if "u" in spec:
            spec["profile"] = spec.pop("u")
        sc["task"]["perturb"] = spec
    if args.out is not None or args.formats is not None:
        sc["output"] = dict(sc.get("output", {}))
        if args.out is not None:
            sc["output"]["dir"] = args.out
        if args.formats is not None:
            sc["output"]["formats"] = [f.strip() for f in args.formats.split(",") if f.strip()]
    return sc


def run_scenario(ref, out_root=None, stream=None) -> int:
    """Run a scenario (path, built-in name or dict) and return the exit status."""
    stream = sys.stderr if stream is None else stream
    try:
        sc = load_scenario(ref)
        manifest, directory = execute(sc, out_root)
    except ScenarioError as exc:
        print(f"lmcf: invalid scenario: {exc}", file=stream)
        return EXIT_INVALID
    except LmcfError as exc:
        print(f"lmcf: numerical failure ({type(exc).__name__}): {exc}", file=stream)
        return EXIT_NUMERIC
    print(str(directory / "manifest.json"))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "list":
        catalog = list_scenarios()
        if args.json:
            print(json.dumps(catalog, indent=2))
        else:
            width = max(len(c["name"]) for c in catalog)
            for c in catalog:
                print(f"{c['name']:<{width}}  {c['task']:<10}  {c['description']}")
        return EXIT_OK
    if args.command == "schema":
        print(json.dumps(SCHEMA, indent=2))
        return EXIT_OK
    if args.command == "run":
        return run_scenario(args.scenario, args.out_root)
    if args.command in TASKS:
        try:
            sc = scenario_from_args(args)
            validate_scenario(sc)
        except ScenarioError as exc:
            print(f"lmcf: invalid scenario: {exc}", file=sys.stderr)
            return EXIT_INVALID
        return run_scenario(sc)
    parser.error(f"unknown command {args.command!r}")
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
