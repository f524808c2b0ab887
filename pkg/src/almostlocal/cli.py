"""Command-line interface.

Every subcommand reads a JSON payload (``--config``), then applies its own
flags and finally ``--set key=value`` overrides (dotted keys reach into
nested objects, values are parsed as JSON when possible)::

    almostlocal make-sphere --level 2 --radius 0.4 --out s04.off
    almostlocal geodesic --config run.json --set metric.k=2 --set timesteps=40
    almostlocal sphere-ode --set metric=ScaleInvariant --set r0=0.1 --set r1=0.2 --set csvOut=r.csv
    almostlocal analyze --frame-dir out/frames --set metric=G0 --set csvOut=diag.csv
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .diagnostics import analyze_path, bound_constants, swept_area_bounds
from .errors import (
    AlmostLocalError,
    ConfigError,
    FitFailure,
    GeometryError,
    IntegrationError,
    MeshError,
    MeshIOError,
    NoAnalyticForm,
)
from .mesh import make_icosphere, read_frames, read_mesh, write_frames, write_mesh
from .metric import from_dict
from .optimizer import SolverConfig, solve_geodesic
from .sphere_analytics import (
    closed_form_radius,
    geodesic_radius,
    integrate_radius_ode,
    write_radius_csv,
)

logger = logging.getLogger("almostlocal")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MESH = 4
EXIT_GEOMETRY = 5
EXIT_MODEL = 6
EXIT_INTEGRATION = 7

EXIT_CODES_HELP = """exit status:
  0  success
  1  unexpected internal error
  2  invalid command line or configuration
  3  file could not be read, parsed or written
  4  invalid mesh or combinatorics (non-manifold, degenerate, mismatched)
  5  degenerate geometry (zero vector area, zero-length edge, ...)
  6  weight outside its domain or unsupported for the requested analysis
  7  radius ODE integration failed (blow-up or step failure)
"""

DEFAULTS = {
    "geodesic": {
        "startMesh": None,
        "endMesh": None,
        "timesteps": 20,
        "metric": {"type": "G0"},
        "penaltyFactor": 1.0,
        "penaltyExponent": 2,
        "solver": {},
        "outputDir": "geodesic_out",
        "initialPath": None,
    },
    "sphereOde": {
        "metric": {"type": "G0"},
        "r0": None,
        "r1": None,
        "rdot0": None,
        "tEnd": 1.0,
        "samples": 101,
        "csvOut": "radius.csv",
    },
    "analyze": {"frameDir": None, "metric": {"type": "G0"}, "csvOut": "diagnostics.csv"},
    "makeSphere": {"level": 2, "radius": 1.0, "center": [0.0, 0.0, 0.0], "out": "sphere.off"},
}

SUBCOMMANDS = {"geodesic": "geodesic", "sphere-ode": "sphereOde", "analyze": "analyze", "make-sphere": "makeSphere"}


# -- configuration ---------------------------------------------------------------


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> None:
    """Apply one ``key.sub=value`` assignment in place."""
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, text = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"empty key in --set {assignment!r}")
    node = config
    for p in parts[:-1]:
        child = node.get(p)
        if isinstance(child, str) and p == "metric":
            child = {"type": child}
        if not isinstance(child, dict):
            child = {}
        node[p] = child
        node = child
    node[parts[-1]] = _parse_value(text)


def load_config(section: str, path, flags: dict, overrides) -> dict:
    config = json.loads(json.dumps(DEFAULTS[section]))
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise MeshIOError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        payload = data.get(section, data)
        if not isinstance(payload, dict):
            raise ConfigError(f"config section {section!r} must be an object")
        config.update(payload)
    config.update({k: v for k, v in flags.items() if v is not None})
    for assignment in overrides or ():
        apply_override(config, assignment)
    unknown = set(config) - set(DEFAULTS[section])
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")
    return config


def _require(config: dict, *keys):
    missing = [k for k in keys if config.get(k) is None]
    if missing:
        raise ConfigError(f"missing required setting(s): {', '.join(missing)}")


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- subcommands -----------------------------------------------------------------


def run_make_sphere(config: dict) -> dict:
    center = config["center"]
    if not (isinstance(center, list) and len(center) == 3):
        raise ConfigError("center must be a list of three numbers")
    mesh = make_icosphere(int(config["level"]), float(config["radius"]), center)
    write_mesh(mesh, config["out"])
    logger.info("wrote %s (%d vertices, %d faces)", config["out"], mesh.n_vertices, mesh.n_faces)
    return {"vertices": mesh.n_vertices, "faces": mesh.n_faces}


def _diagnostics_summary(path, w) -> dict:
    diag = analyze_path(path, w)
    bounds = swept_area_bounds(path, w, **bound_constants(path, w))
    return {
        "sweptArea": diag.total_swept_area,
        "pathLength": diag.path_length,
        "maxHorizontality": float(diag.horizontality.max()),
        "bounds": {b.name: {"lhs": float(b.lhs), "rhs": float(b.rhs), "holds": b.holds} for b in bounds},
    }, diag


def run_geodesic(config: dict) -> dict:
    _require(config, "startMesh", "endMesh")
    n = config["timesteps"]
    if not isinstance(n, int) or n < 2:
        raise ConfigError("timesteps must be an integer >= 2")
    w = from_dict(config["metric"])
    solver = SolverConfig.from_dict(config["solver"] or {})
    start = read_mesh(config["startMesh"])
    end = read_mesh(config["endMesh"])
    initial = read_frames(config["initialPath"]) if config.get("initialPath") else None
    path, report = solve_geodesic(
        start,
        end,
        n,
        w,
        penalty_factor=float(config["penaltyFactor"]),
        penalty_exponent=config["penaltyExponent"],
        config=solver,
        initial_path=initial,
        progress=True,
    )
    out = Path(config["outputDir"])
    out.mkdir(parents=True, exist_ok=True)
    write_frames(path, out / "frames")
    summary, diag = _diagnostics_summary(path, w)
    diag.to_csv(out / "diagnostics.csv")
    result = {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "config": config,
        "metric": w.to_dict(),
        "mesh": {"vertices": start.n_vertices, "faces": start.n_faces},
        "timesteps": n,
        "solve": report.to_dict(),
        "diagnostics": summary,
    }
    _write_json(out / "report.json", result)
    logger.info(
        "%s after %d iterations: energy %.12g penalty %.12g",
        report.termination.value,
        report.iterations,
        report.breakdown.energy,
        report.breakdown.penalty,
    )
    return result


def run_sphere_ode(config: dict) -> dict:
    _require(config, "r0")
    w = from_dict(config["metric"])
    samples = int(config["samples"])
    if samples < 2:
        raise ConfigError("samples must be at least 2")
    r0 = float(config["r0"])
    if config.get("r1") is not None:
        r1 = float(config["r1"])
        try:
            sol = closed_form_radius(w, r0, r1)
        except (NoAnalyticForm, FitFailure):
            sol = geodesic_radius(w, r0, r1)
        t, r, r_t = sol.sample(samples)
        kind = sol.kind
    elif config.get("rdot0") is not None:
        traj = integrate_radius_ode(w, r0, float(config["rdot0"]), float(config["tEnd"]), samples=samples)
        t, r, r_t = traj.t, traj.r, traj.r_t
        kind = "collapsed" if traj.collapsed else "integrated"
    else:
        raise ConfigError("sphere-ode needs r1 (boundary values) or rdot0 (initial velocity)")
    write_radius_csv(config["csvOut"], t, r, r_t)
    logger.info("wrote %s (%d samples, %s)", config["csvOut"], len(t), kind)
    return {"samples": len(t), "kind": kind}


def run_analyze(config: dict) -> dict:
    _require(config, "frameDir")
    w = from_dict(config["metric"])
    path = read_frames(config["frameDir"])
    summary, diag = _diagnostics_summary(path, w)
    diag.to_csv(config["csvOut"])
    logger.info("wrote %s (%d timesteps)", config["csvOut"], path.n_timesteps)
    return summary


RUNNERS = {
    "geodesic": run_geodesic,
    "sphereOde": run_sphere_ode,
    "analyze": run_analyze,
    "makeSphere": run_make_sphere,
}


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON configuration file")
    common.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE", help="override a setting (repeatable)")
    common.add_argument("--threads", type=int, metavar="N", help="limit numerical library threads")
    common.add_argument("--quiet", action="store_true", help="suppress progress output on stderr")

    parser = argparse.ArgumentParser(
        prog="almostlocal",
        description="Geodesics between triangulated surfaces under almost-local metrics.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    kw = dict(parents=[common], epilog=EXIT_CODES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)

    p = sub.add_parser("geodesic", help="solve the geodesic boundary-value problem", **kw)
    p.add_argument("--start", dest="startMesh", metavar="MESH")
    p.add_argument("--end", dest="endMesh", metavar="MESH")
    p.add_argument("--timesteps", type=int)
    p.add_argument("--metric", type=_parse_value, help='weight JSON, e.g. \'{"type":"GAPower","A":0.0625,"k":2}\'')
    p.add_argument("--penalty-factor", dest="penaltyFactor", type=float)
    p.add_argument("--output-dir", dest="outputDir", metavar="DIR")

    p = sub.add_parser("sphere-ode", help="radius trajectory of concentric-sphere geodesics", **kw)
    p.add_argument("--metric", type=_parse_value)
    p.add_argument("--r0", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--rdot0", type=float)
    p.add_argument("--t-end", dest="tEnd", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--csv-out", dest="csvOut", metavar="FILE")

    p = sub.add_parser("analyze", help="diagnostics of an existing frame sequence", **kw)
    p.add_argument("--frame-dir", dest="frameDir", metavar="DIR")
    p.add_argument("--metric", type=_parse_value)
    p.add_argument("--csv-out", dest="csvOut", metavar="FILE")

    p = sub.add_parser("make-sphere", help="write an icosphere as OFF", **kw)
    p.add_argument("--level", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--center", type=float, nargs=3)
    p.add_argument("--out", metavar="FILE")
    return parser


_GLOBAL = ("command", "config", "overrides", "threads", "quiet")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (MeshIOError, OSError)):
        return EXIT_IO
    if isinstance(exc, MeshError):
        return EXIT_MESH
    if isinstance(exc, GeometryError):
        return EXIT_GEOMETRY
    if isinstance(exc, IntegrationError):
        return EXIT_INTEGRATION
    if isinstance(exc, AlmostLocalError):
        return EXIT_MODEL
    return EXIT_INTERNAL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(message)s", force=True)
    logging.getLogger("almostlocal").setLevel(logging.WARNING if args.quiet else logging.INFO)
    section = SUBCOMMANDS[args.command]
    flags = {k: v for k, v in vars(args).items() if k not in _GLOBAL}
    if flags.get("center") is not None:
        flags["center"] = list(flags["center"])
    try:
        config = load_config(section, args.config, flags, args.overrides)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=args.threads):
                RUNNERS[section](config)
        else:
            RUNNERS[section](config)
    except (AlmostLocalError, OSError) as exc:
        code = exit_code_for(exc)
        print(f"almostlocal: error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return code
    except ValueError as exc:
        # malformed values in the configuration surface here
        print(f"almostlocal: error [ConfigError]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
