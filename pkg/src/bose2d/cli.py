"""Command-line surface: EOS tables, reference comparisons, the cubic-term
fit, DMC runs, and breathing-mode sweeps.

Exit codes: 0 success, 2 scientific-check failure, 64 usage, 65 data,
70 internal numeric.  All tabular output is CSV (or JSON) with numbers at
17 significant digits so files round-trip exactly.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

from . import eos, trap
from .dmc import (
    append_run,
    dmc_run,
    extrapolate_timestep,
    parse_run_file,
    vmc_run,
)
from .errors import (
    Bose2dError,
    ConvergenceError,
    DomainError,
    InsufficientDataError,
    NumericError,
    OutOfRegimeError,
    PopulationControlError,
)

EXIT_OK = 0
EXIT_SCIENTIFIC = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NUMERIC = 70


class _UsageError(Exception):
    pass


@dataclass
class OutputRecord:
    """One command's tabular result: schema id, columns, numeric rows."""

    schema_id: str
    columns: list
    rows: list
    notes: list = field(default_factory=list)

    @staticmethod
    def _cell(value):
        if value is None:
            return ""
        if isinstance(value, str):
            return value
        if isinstance(value, (int,)) and not isinstance(value, bool):
            return str(value)
        return format(float(value), ".17g")

    def write_csv(self, fh):
        fh.write(f"# schema: {self.schema_id}\n")
        for note in self.notes:
            fh.write(f"# note: {note}\n")
        fh.write(",".join(self.columns) + "\n")
        for row in self.rows:
            fh.write(",".join(self._cell(v) for v in row) + "\n")

    def write_json(self, fh):
        def jsonable(v):
            if v is None or isinstance(v, (str, int)):
                return v
            return float(format(float(v), ".17g"))

        json.dump(
            {
                "schema": self.schema_id,
                "notes": self.notes,
                "columns": self.columns,
                "rows": [[jsonable(v) for v in row] for row in self.rows],
            },
            fh,
            indent=1,
        )
        fh.write("\n")

    def write(self, fh, fmt):
        if fmt == "json":
            self.write_json(fh)
        else:
            self.write_csv(fh)


def _parse_linear_grid(spec):
    try:
        start, stop, step = (float(tok) for tok in spec.split(":"))
    except ValueError as exc:
        raise _UsageError(f"grid spec {spec!r}: expected start:stop:step") from exc
    if step <= 0 or stop < start:
        raise _UsageError(f"grid spec {spec!r}: need stop >= start and step > 0")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(count)]


def _parse_geometric_grid(spec):
    try:
        start, stop, count = spec.split(":")
        start, stop, count = float(start), float(stop), int(count)
    except ValueError as exc:
        raise _UsageError(f"grid spec {spec!r}: expected start:stop:count") from exc
    if start <= 0 or stop <= start or count < 2:
        raise _UsageError(f"grid spec {spec!r}: need 0 < start < stop, count >= 2")
    ratio = (stop / start) ** (1.0 / (count - 1))
    return [start * ratio**k for k in range(count)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_eos(theory_names, lnl_grid):
    """Correction table D(L) per theory plus the universal-energy ordinate."""
    specs = []
    for name in theory_names:
        if name not in eos.THEORIES:
            raise _UsageError(
                f"unknown theory {name!r}; known: {', '.join(sorted(eos.THEORIES))}"
            )
        specs.append(eos.THEORIES[name])
    columns = (
        ["ln_lnna2"]
        + [f"{s.name}_D" for s in specs]
        + ["universal_D", "universal_D_band"]
    )
    rows = []
    notes = {}
    for ln_l in lnl_grid:
        g = eos.GasParameter(-math.exp(ln_l))
        row = [ln_l]
        for s in specs:
            try:
                row.append(eos.theory_correction(s, g))
            except (OutOfRegimeError, DomainError) as exc:
                row.append(None)
                notes.setdefault(s.name, f"null cells: {exc}")
        try:
            row.append(eos.universal_energy_correction(g))
            row.append(eos.UNIVERSAL.c2_mu_err / g.L)
        except OutOfRegimeError as exc:
            row.extend([None, None])
            notes.setdefault("universal", f"null cells: {exc}")
        rows.append(row)
    return OutputRecord(
        "eos_table_v1", columns, rows, [notes[k] for k in sorted(notes)]
    )


def cmd_compare(data_path):
    """Reference energies against every catalogued correction.

    Returns the record and the count of in-regime rows (ln L >= 3) whose
    universal-energy prediction misses the 3-sigma band.
    """
    try:
        rows = eos.load_reference_rows(data_path)
    except (OSError, ValueError, InsufficientDataError) as exc:
        raise _UsageError(f"cannot read reference data: {exc}") from exc
    names = list(eos.THEORIES)
    columns = (
        ["n_r02", "L", "ln_lnna2", "y", "y_err"]
        + [f"{name}_D" for name in names]
        + ["universal_D", "universal_within_3sigma"]
    )
    out = []
    failures = 0
    for row in rows:
        g = eos.from_density_dipoles(row.n_r02)
        eps, _ = eos.reference_epsilon(row)
        y = eos.fig1_ordinate(eps, g)
        y_err = (1.0 / eps) * (row.err / row.e_per_n)
        rec = [row.n_r02, g.L, math.log(g.L), y, y_err]
        for name in names:
            try:
                rec.append(eos.theory_correction(eos.THEORIES[name], g))
            except (OutOfRegimeError, DomainError):
                rec.append(None)
        try:
            d_univ = eos.universal_energy_correction(g)
            within = abs(d_univ - y) <= 3.0 * y_err
            rec.extend([d_univ, int(within)])
            if math.log(g.L) >= 3.0 and not within:
                failures += 1
        except OutOfRegimeError:
            rec.extend([None, None])
        out.append(rec)
    return OutputRecord("compare_v1", columns, out), failures


def cmd_fit_c3(data_path, max_na2):
    """Cubic-coefficient fit over the selected density window."""
    try:
        rows = eos.load_reference_rows(data_path)
    except (OSError, ValueError, InsufficientDataError) as exc:
        raise _UsageError(f"cannot read reference data: {exc}") from exc
    result = eos.fit_c3(rows, max_na2=max_na2)
    return OutputRecord(
        "fit_c3_v1",
        ["c3", "c3_err", "chi2_per_dof", "rows_used"],
        [[result.c3, result.c3_err, result.chi2_per_dof, result.rows_used]],
    )


def cmd_dmc(config_path, dry_run=False, output_dir=None):
    """Run the configured VMC/DMC protocol and log results to runs.csv."""
    spec = parse_run_file(config_path)
    if dry_run:
        lines = [f"potential = {spec.potential.kind}",
                 f"range = {spec.potential.range:g}"]
        c0 = spec.configs[0]
        for key in ("n_particles", "density", "target_walkers", "equil_blocks",
                    "measure_blocks", "steps_per_block", "seed"):
            lines.append(f"{key} = {getattr(c0, key)}")
        lines.append(f"timesteps = {', '.join(str(c.timestep) for c in spec.configs)}")
        lines.append(f"match_radius = {c0.match_radius:g}")
        lines.append(f"run_vmc = {spec.run_vmc}")
        lines.append(f"workers = {spec.workers}")
        return OutputRecord("dmc_dry_run_v1", ["line"], [[ln] for ln in lines])

    out_dir = output_dir or os.environ.get("BOSE2D_OUTDIR") or "."
    os.makedirs(out_dir, exist_ok=True)
    runs_path = os.path.join(out_dir, "runs.csv")
    columns = list(("potential", "n_r2", "N", "timestep", "walkers",
                    "mean", "err", "tag", "seed"))
    rows = []
    results = []
    if spec.run_vmc:
        est = vmc_run(spec.configs[0], spec.potential, workers=spec.workers)
        append_run(runs_path, spec.potential, spec.configs[0], est)
        rows.append(_run_row(spec, spec.configs[0], est))
    for config in spec.configs:
        est = dmc_run(config, spec.potential, workers=spec.workers)
        append_run(runs_path, spec.potential, config, est)
        rows.append(_run_row(spec, config, est))
        results.append((config.timestep, est))
    if len({t for t, _ in results}) >= 2:
        final = extrapolate_timestep(results)
        append_run(runs_path, spec.potential, spec.configs[0], final)
        rows.append(_run_row(spec, spec.configs[0], final, timestep=0.0))
    return OutputRecord("dmc_runs_v1", columns, rows)


def _run_row(spec, config, est, timestep=None):
    return [
        spec.potential.kind,
        config.density,
        config.n_particles,
        config.timestep if timestep is None else timestep,
        config.target_walkers,
        est.mean,
        est.err,
        est.tag,
        config.seed,
    ]


def cmd_breathing(eos_name, param_grid, n_particles=1000.0):
    """Breathing-mode ratio Omega^2/omega^2 over a grid of LDA parameters."""
    if eos_name not in trap.EOS_CHOICES:
        raise _UsageError(
            f"unknown eos {eos_name!r}; known: {', '.join(trap.EOS_CHOICES)}"
        )
    rows = []
    for p in param_grid:
        cfg = trap.config_for_lda_parameter(p, eos_name, n_particles=n_particles)
        rows.append([p, trap.breathing_frequency(cfg), eos_name])
    return OutputRecord("breathing_v1", ["lda_param", "omega2_ratio", "eos"], rows)


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="bose2d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eos", help="beyond-mean-field correction table")
    p.add_argument("--theories", default=",".join(eos.THEORIES),
                   help="comma-separated theory names")
    p.add_argument("--lnL", default="1:5:0.1", dest="lnl",
                   help="grid in ln|ln na^2| as start:stop:step")
    _output_args(p)

    p = sub.add_parser("compare", help="reference energies vs predictions")
    p.add_argument("--data", default=None, help="CSV with n_r02,e_per_n,err")
    _output_args(p)

    p = sub.add_parser("fit-c3", help="cubic-coefficient fit")
    p.add_argument("--data", default=None, help="CSV with n_r02,e_per_n,err")
    p.add_argument("--max-na2", type=float, default=1e-6,
                   help="density window upper bound in na^2")
    _output_args(p)

    p = sub.add_parser("dmc", help="run a configured VMC/DMC protocol")
    p.add_argument("--config", required=True, help="run file path")
    p.add_argument("--dry-run", action="store_true",
                   help="validate and echo the config only")
    p.add_argument("--output-dir", default=None,
                   help="directory for runs.csv (default $BOSE2D_OUTDIR or .)")
    _output_args(p)

    p = sub.add_parser("breathing", help="breathing-mode sweep")
    p.add_argument("--eos", required=True, help="|".join(trap.EOS_CHOICES))
    p.add_argument("--params", default="1e-10:1e-2:13",
                   help="LDA parameter grid as start:stop:count (geometric)")
    p.add_argument("--n-particles", type=float, default=1000.0)
    _output_args(p)
    return parser


def _output_args(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None, help="output file (default stdout)")


def _write(record, args):
    path = args.output
    if path is not None:
        out_dir = os.environ.get("BOSE2D_OUTDIR")
        if out_dir and not os.path.isabs(path):
            path = os.path.join(out_dir, path)
        with open(path, "w", encoding="utf-8") as fh:
            record.write(fh, args.format)
    else:
        record.write(sys.stdout, args.format)


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"bose2d: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "eos":
            record = cmd_eos(
                [t.strip() for t in args.theories.split(",") if t.strip()],
                _parse_linear_grid(args.lnl),
            )
            _write(record, args)
            return EXIT_OK
        if args.command == "compare":
            record, failures = cmd_compare(args.data)
            _write(record, args)
            return EXIT_SCIENTIFIC if failures else EXIT_OK
        if args.command == "fit-c3":
            record = cmd_fit_c3(args.data, args.max_na2)
            _write(record, args)
            return EXIT_OK
        if args.command == "dmc":
            record = cmd_dmc(args.config, dry_run=args.dry_run,
                             output_dir=args.output_dir)
            _write(record, args)
            return EXIT_OK
        if args.command == "breathing":
            record = cmd_breathing(
                args.eos, _parse_geometric_grid(args.params), args.n_particles
            )
            _write(record, args)
            return EXIT_OK
        raise _UsageError(f"unknown command {args.command!r}")
    except _UsageError as exc:
        print(f"bose2d: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DomainError) as exc:
        print(f"bose2d: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientDataError as exc:
        print(f"bose2d: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, NumericError, PopulationControlError,
            OutOfRegimeError) as exc:
        print(f"bose2d: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Bose2dError as exc:
        print(f"bose2d: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
