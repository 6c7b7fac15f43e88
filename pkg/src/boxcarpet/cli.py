"""Command-line front end.

Subcommands map onto the library layers:

* ``decompose``   coefficient table plus convergence diagnostics (CSV + JSON)
* ``carpet``      density and velocity rasters plus the symmetry report
* ``trajectories`` seeded Bohmian ensemble in long-format CSV
* ``point``       pointwise field queries (CSV: x,t,rho,v,q,flags)
* ``verify``      the acceptance suite, one PASS/FAIL line per check

Runs are configured by a JSON file (--config) overridden by flags; every
command writes the resolved configuration next to its artifacts so a run
can be reproduced from its own output directory.  Outputs are
deterministic: identical configurations produce byte-identical CSV and
PGM files.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields as dc_fields
from pathlib import Path

import numpy as np

from .bohm import (TrajectorySpec, ensemble_diagnostics, export_trajectories,
                   integrate_ensemble, seed_uniform)
from .carpet import render_grid, symmetry_report, write_pgm
from .errors import AccuracyError, BoxcarpetError, DomainError, FitError, IntegrationError
from .fields import sample
from .spectral import (coefficients_analytic, decay_exponent, expected_energy,
                       export_coefficients, overlap_probability, recurrence_time,
                       spread_count)
from .verify import run_acceptance
from .well import ApertureShape, WellConfig

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_ACCEPTANCE = 3


@dataclass
class RunConfig:
    """Resolved run configuration (defaults, then config file, then flags)."""

    shape: str = "square"
    L: float = 50.0
    w: float = 10.0
    m: float = 1.0
    hbar: float = 1.0
    sigma0: float | None = None
    n_modes: int = 200
    nx: int = 501
    nt: int = 501
    t_max: float | None = None
    seeds: int = 20
    seed_halfwidth: float | None = None
    jobs: int = 1
    out: str = "out"

    def well(self) -> WellConfig:
        return WellConfig(L=self.L, w=self.w, m=self.m, hbar=self.hbar)

    def aperture(self) -> ApertureShape:
        return ApertureShape.from_name(self.shape, self.sigma0)

    def state(self):
        if self.n_modes < 1:
            raise DomainError(f"n_modes must be >= 1, got {self.n_modes}")
        return coefficients_analytic(self.aperture(), self.n_modes, self.well())

    def horizon(self) -> float:
        return self.t_max if self.t_max is not None else recurrence_time(self.well())

    @classmethod
    def resolve(cls, args: argparse.Namespace) -> "RunConfig":
        values = {}
        if getattr(args, "config", None):
            path = Path(args.config)
            if not path.is_file():
                raise DomainError(f"config file not found: {path}")
            loaded = json.loads(path.read_text())
            unknown = set(loaded) - {f.name for f in dc_fields(cls)}
            if unknown:
                raise DomainError(f"unknown config keys: {sorted(unknown)}")
            values.update(loaded)
        for f in dc_fields(cls):
            flag = getattr(args, f.name, None)
            if flag is not None:
                values[f.name] = flag
        return cls(**values)


def _prepare_out(config: RunConfig) -> Path:
    out = Path(config.out)
    if not out.parent.exists():
        raise DomainError(f"parent of output directory does not exist: {out.parent}")
    out.mkdir(exist_ok=True)
    config_path = out / "run_config.json"
    with open(config_path, "w") as fh:
        json.dump(asdict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_decompose(config: RunConfig) -> int:
    state = config.state()
    out = _prepare_out(config)
    export_coefficients(state, out / "coefficients.csv", out / "coefficients.json")
    n_axis = list(range(1, state.n_modes + 1))
    weights = np.abs(state.coefficients) ** 2
    p_curve = np.cumsum(weights)
    h_curve = np.cumsum(weights * state.energies) / p_curve
    try:
        fit = decay_exponent(state, (10, min(100, state.n_modes)))
        fit_info = {"slope": fit.slope, "n_points": fit.n_points,
                    "is_power_law": fit.is_power_law}
    except (_FitError, DomainError) as exc:
        fit_info = {"error": str(exc)}
    report = {
        "tau_r": recurrence_time(state.well),
        "P_N": overlap_probability(state),
        "H_N": expected_energy(state),
        "spread_count_25pct": spread_count(state, 25.0),
        "decay_fit": fit_info,
        "n": n_axis,
        "P_curve": p_curve.tolist(),
        "H_curve": h_curve.tolist(),
    }
    with open(out / "decompose.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"decompose: N={state.n_modes} P_N={report['P_N']:.9f} "
          f"H_N={report['H_N']:.6g} -> {out}")
    return EXIT_OK


def cmd_carpet(config: RunConfig) -> int:
    state = config.state()
    out = _prepare_out(config)
    T = config.horizon()
    dens = render_grid(state, "density", config.nx, config.nt, T, jobs=config.jobs)
    velo = render_grid(state, "velocity", config.nx, config.nt, T, jobs=config.jobs)
    write_pgm(dens, out / "density.pgm", out / "density.json", state)
    write_pgm(velo, out / "velocity.pgm", out / "velocity.json", state)
    nx_sym = config.nx if config.nx % 2 == 1 else config.nx + 1
    nt_sym = config.nt if config.nt % 2 == 1 else config.nt + 1
    rep = symmetry_report(state, nx_sym, nt_sym, jobs=config.jobs)
    with open(out / "symmetry.json", "w") as fh:
        json.dump(rep.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"carpet: {config.nx}x{config.nt} over T={T:.6g}; "
          f"mirror={rep.mirror_error:.3e} reversal={rep.time_reversal_error:.3e} "
          f"-> {out}")
    return EXIT_OK


def cmd_trajectories(config: RunConfig) -> int:
    state = config.state()
    out = _prepare_out(config)
    T = config.horizon()
    halfwidth = (config.seed_halfwidth if config.seed_halfwidth is not None
                 else 0.5 * config.w)
    seeds = seed_uniform(config.seeds, halfwidth, state.well)
    sample_times = np.linspace(0.0, T, config.nt)
    specs = [TrajectorySpec(x0, (0.0, T), sample_times=sample_times) for x0 in seeds]
    ens = integrate_ensemble(state, specs, jobs=config.jobs)
    export_trajectories(ens, out / "trajectories.csv")
    with open(out / "trajectories.json", "w") as fh:
        json.dump(ensemble_diagnostics(ens), fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_failed = sum(1 for s in ens.statuses if s != "ok")
    print(f"trajectories: {len(seeds)} seeds over T={T:.6g}; "
          f"{n_failed} failed; non-crossing={'ok' if ens.non_crossing_ok else 'VIOLATED'} "
          f"-> {out}")
    return EXIT_OK


def cmd_point(config: RunConfig, xs, ts) -> int:
    state = config.state()
    out = _prepare_out(config)
    with open(out / "fields.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "t", "rho", "v", "q", "flags"])
        for xv in xs:
            for tv in ts:
                s = sample(state, xv, tv)
                writer.writerow([repr(xv), repr(tv), repr(s.rho), repr(s.v),
                                 repr(s.q), "near_node" if s.near_node else ""])
    print(f"point: {len(xs) * len(ts)} samples -> {out / 'fields.csv'}")
    return EXIT_OK


def cmd_verify(config: RunConfig, only=None) -> int:
    out = _prepare_out(config)
    results = run_acceptance(jobs=config.jobs, only=only)
    for res in results:
        print(res.line())
    n_failed = sum(1 for r in results if not r.passed)
    payload = {
        "passed": n_failed == 0,
        "n_checks": len(results),
        "n_failed": n_failed,
        "checks": [r.as_dict() for r in results],
    }
    with open(out / "verification.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"verify: {len(results) - n_failed}/{len(results)} checks passed -> {out}")
    return EXIT_OK if n_failed == 0 else EXIT_ACCEPTANCE


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_VALIDATION)


def _add_common(p: _Parser):
    p.add_argument("--config", help="JSON file with RunConfig values")
    p.add_argument("--shape", help="square | triangle | parabola | half-cosine | "
                                   "half-cosine-squared | gaussian")
    p.add_argument("--L", type=float, help="box length")
    p.add_argument("--w", type=float, help="aperture width")
    p.add_argument("--m", type=float, help="mass")
    p.add_argument("--hbar", type=float, help="action constant")
    p.add_argument("--sigma0", type=float, help="gaussian width (default w/2pi)")
    p.add_argument("--n-modes", dest="n_modes", type=int, help="truncation N")
    p.add_argument("--nx", type=int, help="spatial grid points")
    p.add_argument("--nt", type=int, help="time grid points / trajectory samples")
    p.add_argument("--t-max", dest="t_max", type=float,
                   help="time horizon (default: recurrence time)")
    p.add_argument("--seeds", type=int, help="trajectory count")
    p.add_argument("--seed-halfwidth", dest="seed_halfwidth", type=float,
                   help="seed band half-width (default w/2)")
    p.add_argument("--jobs", type=int, help="worker count")
    p.add_argument("--out", help="output directory")


def build_parser() -> _Parser:
    parser = _Parser(prog="boxcarpet",
                     description="Quantum carpets and Bohmian trajectories in a 1-D box")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("decompose", "coefficients and convergence diagnostics"),
        ("carpet", "density/velocity rasters and symmetry report"),
        ("trajectories", "seeded Bohmian ensemble"),
        ("point", "pointwise field queries"),
        ("verify", "run the acceptance suite"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        if name == "point":
            p.add_argument("--x", required=True,
                           help="comma-separated positions")
            p.add_argument("--t", required=True,
                           help="comma-separated times")
        if name == "verify":
            p.add_argument("--only", help="comma-separated check ids")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = RunConfig.resolve(args)
        if args.command == "decompose":
            return cmd_decompose(config)
        if args.command == "carpet":
            return cmd_carpet(config)
        if args.command == "trajectories":
            return cmd_trajectories(config)
        if args.command == "point":
            xs = [float(v) for v in args.x.split(",") if v]
            ts = [float(v) for v in args.t.split(",") if v]
            if not xs or not ts:
                raise DomainError("point queries need at least one x and one t")
            return cmd_point(config, xs, ts)
        if args.command == "verify":
            only = ([int(v) for v in args.only.split(",") if v]
                    if getattr(args, "only", None) else None)
            return cmd_verify(config, only)
        raise DomainError(f"unknown command {args.command!r}")
    except (DomainError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (AccuracyError, IntegrationError, FitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BoxcarpetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"filesystem error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
