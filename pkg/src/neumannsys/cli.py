"""Command-line entry point.

Subcommands: thresholds, check-hypotheses, solve, sweep, perturb, verify.
Exit codes: 0 ok, 2 config error, 3 threshold search failure,
4 hypothesis failure, 5 certificate or verification failure.
"""
import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, resolve_values
from .discretization import DiscreteSystem, StatePair
from .domain import build_coefficients, build_uniform_grid, norms
from .errors import DomainError, NumericError, SearchError, UsageError
from .expr import ExpressionError
from .nonlinearity import check_hypotheses, resolve
from .solvers import (deflated_search, nonexistence_certificate,
                      perturbation_stability, sweep)
from .thresholds import compute_thresholds

EXIT_OK, EXIT_CONFIG, EXIT_SEARCH, EXIT_HYPOTHESES, EXIT_CERTIFICATE = 0, 2, 3, 4, 5

SWEEP_COLUMNS = ("lambda", "lambda_times_sF", "lambda_times_SF", "n_nontrivial",
                 "min_energy", "max_residual", "status")

log = logging.getLogger("neumannsys")


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def fmt(x):
    """Round-trip decimal form used in every emitted file."""
    return "%.17g" % x


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _finite_or_none(x):
    return x if isinstance(x, float) and math.isfinite(x) else (None if isinstance(x, float) else x)


def write_json(path, payload):
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")


class Context:
    """Config plus the objects built from it, created lazily."""

    def __init__(self, cfg, out_dir, quiet):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.quiet = quiet
        self._thresholds = None
        try:
            self.grid = build_uniform_grid(cfg.dim, cfg.lengths, cfg.counts)
            self.coeffs = build_coefficients(self.grid, cfg.a, cfg.b, cfg.c)
            self.nl = resolve(cfg.F)
        except (DomainError, UsageError, ExpressionError) as exc:
            raise _Exit(EXIT_CONFIG, f"config error: {exc}") from None
        self.nb = norms(self.coeffs)

    def say(self, text=""):
        if not self.quiet:
            print(text)

    @property
    def thresholds(self):
        if self._thresholds is None:
            try:
                self._thresholds = compute_thresholds(
                    self.nl, self.nb, self.cfg.search, check=True,
                    override=self.cfg.override_hypotheses)
            except SearchError as exc:
                raise _Exit(EXIT_SEARCH, f"threshold search failed: {exc}") from None
        return self._thresholds

    def values(self, text, what, **extra):
        th = self.thresholds
        try:
            return resolve_values(text, s_F=th.s_F, S_F=th.S_F, **extra)
        except (ExpressionError, ZeroDivisionError, ValueError) as exc:
            raise _Exit(EXIT_CONFIG, f"config error in {what}: {exc}") from None

    def system(self, lam):
        try:
            return DiscreteSystem(self.grid, self.coeffs, self.nl, lam)
        except (DomainError, UsageError) as exc:
            raise _Exit(EXIT_CONFIG, f"config error: {exc}") from None


# -- state files -------------------------------------------------------

def write_state(path, grid, state):
    """Header lines then one ``x [y] u v`` row per node."""
    lines = [
        "# neumannsys state",
        f"# dim {grid.dim}",
        "# counts " + " ".join(str(n) for n in grid.counts),
        "# lengths " + " ".join(fmt(L) for L in grid.lengths),
        "# columns " + ("x y u v" if grid.dim == 2 else "x u v"),
    ]
    coords = grid.coordinates()
    cols = list(coords) + [state.u, state.v]
    for row in zip(*cols):
        lines.append(" ".join(fmt(float(c)) for c in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_state(path):
    """Return ``(dim, counts, lengths, StatePair)`` from a state file."""
    header, rows = {}, []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) >= 2:
                header[parts[0]] = parts[1:]
        elif line.strip():
            rows.append([float(v) for v in line.split()])
    try:
        dim = int(header["dim"][0])
        counts = tuple(int(v) for v in header["counts"])
        lengths = tuple(float(v) for v in header["lengths"])
    except (KeyError, ValueError, IndexError) as exc:
        raise UsageError(f"{path}: malformed header ({exc})") from None
    data = np.array(rows, dtype=float)
    if data.shape != (int(np.prod(counts)), dim + 2):
        raise UsageError(f"{path}: expected {int(np.prod(counts))} rows of {dim + 2} columns")
    return dim, counts, lengths, StatePair(data[:, dim], data[:, dim + 1])


# -- subcommands -------------------------------------------------------

def cmd_thresholds(ctx):
    th = ctx.thresholds
    ctx.say(f"s_F = {th.s_F:.10g}   argmax (s, t) = ({th.argmax_sF[0]:.8g}, {th.argmax_sF[1]:.8g})")
    ctx.say(f"S_F = {th.S_F:.10g}   argmax (s, t) = ({th.argmax_SF[0]:.8g}, {th.argmax_SF[1]:.8g})")
    ctx.say(f"stationarity residual at s_F argmax: {th.stationarity_residual:.3e}")
    ctx.say(f"only the trivial solution for lambda < 1/S_F = {th.lambda_lower:.10g}")
    ctx.say(f"at least two nontrivial solutions for lambda > 1/s_F = {th.lambda_upper:.10g}")
    write_json(ctx.out / "thresholds.json", th.as_dict())
    return EXIT_OK


def cmd_check_hypotheses(ctx):
    rep = check_hypotheses(ctx.nl, angles_per_radius=ctx.cfg.hyp_angles, tol=ctx.cfg.hyp_tol)
    ctx.say(f"nonlinearity: {ctx.nl.name}")
    ctx.say(f"verdict: {rep.verdict}" + ("  (F vanishes on all samples: degenerate)" if rep.degenerate else ""))
    ctx.say(f"F >= 0 on samples: {rep.f_plus_ok}")
    if rep.M_estimate is not None:
        ctx.say(f"sampled bound F <= M (s^2 + t^2): M ~ {rep.M_estimate:.6g}")
    for msg in rep.failures:
        ctx.say(f"  - {msg}")
    write_json(ctx.out / "hypotheses.json", rep.as_dict())
    return EXIT_OK if rep.passed else EXIT_HYPOTHESES


def _solution_records(ctx, lam, sols, stem, certify, th):
    records, failed = [], []
    for k, sol in enumerate(sols):
        path = ctx.out / f"{stem}_{k:03d}.txt"
        write_state(path, ctx.grid, sol.state)
        rec = {
            "lambda": lam,
            "classification": sol.classification,
            "energy": sol.energy,
            "residual": sol.residual_norm,
            "state_file": path.name,
        }
        if certify and sol.nontrivial:
            cert = nonexistence_certificate(ctx.system(lam), sol.state, S_F=th.S_F)
            rec["certificate"] = cert.as_dict()
            if cert.verdict == "inequality-violated":
                failed.append(f"solution {k}: certificate inequality violated")
        records.append(rec)
    return records, failed


def _probe_certificate(ctx, system, th):
    """Certificate at the constant state through the s_F maximizer."""
    s0, t0 = th.argmax_sF
    if s0 == 0 and t0 == 0:
        s0 = t0 = 1.0
    return nonexistence_certificate(system, StatePair.constant(ctx.grid, s0, t0), S_F=th.S_F)


def cmd_solve(ctx):
    th = ctx.thresholds
    lams = ctx.values(ctx.cfg.lam, "[solver] lambda")
    if len(lams) != 1:
        raise _Exit(EXIT_CONFIG, f"config error in [solver] lambda: solve needs one value, got {len(lams)}")
    lam = lams[0]
    system = ctx.system(lam)
    sols = deflated_search(system, ctx.cfg.solve, th)
    records, failed = _solution_records(ctx, lam, sols, "solution", ctx.cfg.certify, th)
    manifest = {
        "kind": "solve",
        "lambda": lam,
        "s_F": th.s_F,
        "S_F": th.S_F,
        "rng_seed": ctx.cfg.solve.rng_seed,
        "nonlinearity": ctx.nl.name,
        "solutions": records,
    }
    if ctx.cfg.certify:
        cert = _probe_certificate(ctx, system, th)
        manifest["certificate"] = cert.as_dict()
        if cert.verdict == "inequality-violated":
            failed.append("probe certificate: inequality violated")
        if cert.verdict == "nonexistence-certified" and any(s.nontrivial for s in sols):
            failed.append("nontrivial solution found although lambda*S_F < 1")
    write_json(ctx.out / "solutions.json", manifest)

    ctx.say(f"lambda = {lam:.10g}  (lambda*s_F = {lam * th.s_F:.6g}, lambda*S_F = {lam * th.S_F:.6g})")
    for rec in records:
        ctx.say(f"  {rec['classification']:<30} energy {rec['energy']: .10e}  "
                f"residual {rec['residual']:.3e}  {rec['state_file']}")
    if "certificate" in manifest:
        ctx.say(f"certificate: {manifest['certificate']['verdict']}")
    for msg in failed:
        print(f"certificate failure: {msg}", file=sys.stderr)
    return EXIT_CERTIFICATE if failed else EXIT_OK


def sweep_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in report.rows:
        writer.writerow([fmt(row.lam), fmt(row.lam * row.s_F), fmt(row.lam * row.S_F),
                         str(row.n_nontrivial), fmt(row.min_energy), fmt(row.max_residual),
                         row.status])
    return buf.getvalue()


def cmd_sweep(ctx):
    th = ctx.thresholds
    lams = ctx.values(ctx.cfg.lambdas, "[solver] lambdas")
    if not lams:
        raise _Exit(EXIT_CONFIG, "config error in [solver] lambdas: empty lambda list")
    base = ctx.system(lams[0])
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            report = sweep(base, lams, ctx.cfg.solve, th)
    except UsageError as exc:
        raise _Exit(EXIT_CONFIG, f"config error in [solver] lambdas: {exc}") from None
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    text = sweep_csv(report)
    path = ctx.out / ctx.cfg.csv_name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))
    if not ctx.quiet:
        sys.stdout.write(text.replace("\r\n", "\n"))
    return EXIT_OK if all(r.status == "ok" for r in report.rows) else EXIT_SEARCH


def cmd_perturb(ctx):
    th = ctx.thresholds
    lams = ctx.values(ctx.cfg.lam, "[solver] lambda")
    if len(lams) != 1:
        raise _Exit(EXIT_CONFIG, "config error in [solver] lambda: perturb needs one value")
    lam = lams[0]
    mus = ctx.values(ctx.cfg.mus, "[perturbation] mus", **{"lambda": lam})
    d = ctx.cfg.d if ctx.cfg.d is not None else "1"
    try:
        G = resolve(ctx.cfg.G)
        rep = perturbation_stability(ctx.system(lam), G, d, mus, ctx.cfg.solve, th)
    except (DomainError, UsageError, ExpressionError) as exc:
        raise _Exit(EXIT_CONFIG, f"config error: {exc}") from None
    rows = []
    ctx.say(f"lambda = {lam:.10g}, unperturbed nontrivial count = {rep.base_count}, "
            f"G growth constant ~ {rep.growth_constant:.4g}")
    for k, row in enumerate(rep.rows):
        records, _ = _solution_records(ctx, lam, row.solutions, f"perturb_{k:02d}", False, th)
        rows.append({
            "mu": row.mu,
            "n_nontrivial": row.n_nontrivial,
            "count_preserved": row.count_preserved,
            "max_drift": _finite_or_none(row.max_drift),
            "drifts": [_finite_or_none(x) for x in row.drifts],
            "status": row.status,
            "solutions": records,
        })
        ctx.say(f"  mu = {row.mu:<12.6g} nontrivial = {row.n_nontrivial:<3d} "
                f"preserved = {str(row.count_preserved):<5} max drift = {row.max_drift:.3e}  {row.status}")
    write_json(ctx.out / "perturb.json", {"kind": "perturb", "lambda": lam,
                                          "base_count": rep.base_count, "rows": rows})
    return EXIT_OK


def cmd_verify(ctx):
    """Reload every state in ``solutions.json`` and recheck its residual."""
    manifest_path = ctx.out / "solutions.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise _Exit(EXIT_CONFIG, f"cannot read {manifest_path}: {exc}") from None
    bad = 0
    for rec in manifest["solutions"]:
        dim, counts, lengths, state = read_state(ctx.out / rec["state_file"])
        grid = build_uniform_grid(dim, lengths, counts)
        if grid.counts != ctx.grid.counts or grid.lengths != ctx.grid.lengths:
            raise _Exit(EXIT_CONFIG, f"{rec['state_file']}: grid does not match the config")
        system = DiscreteSystem(ctx.grid, ctx.coeffs, ctx.nl, rec["lambda"])
        res = float(np.linalg.norm(system.gradient(state.flat())))
        ok = res <= rec["residual"] + 1e-12
        bad += not ok
        ctx.say(f"{rec['state_file']}: residual {res:.3e} (recorded {rec['residual']:.3e}) "
                f"{'ok' if ok else 'FAILED'}")
    return EXIT_OK if bad == 0 else EXIT_CERTIFICATE


COMMANDS = {
    "thresholds": cmd_thresholds,
    "check-hypotheses": cmd_check_hypotheses,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "perturb": cmd_perturb,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="neumannsys",
                                     description="Thresholds and solutions of a Neumann system.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="INI config file (defaults used when omitted)")
    parser.add_argument("--seed", type=int, help="override [solver] rng_seed")
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("--quiet", action="store_true", help="suppress stdout reports")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.solve = dataclasses.replace(cfg.solve, rng_seed=args.seed)
        ctx = Context(cfg, args.out or cfg.out_dir, args.quiet)
        return COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Exit as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_SEARCH


if __name__ == "__main__":
    sys.exit(main())
