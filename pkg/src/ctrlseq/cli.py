"""Command-line entry point.

Every command is a pure function of its parameters and seed.  Parameters are
resolved as defaults, then the JSON config file, then command-line flags.
Numbers are written with 12 significant digits; CSV uses ``\\n`` line endings.

Exit codes: 0 success, 1 invalid input, 2 numeric failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .baselines import (
    heisenberg_qfi,
    raised_cosine_prior,
    shot_noise_limit,
    van_trees_bound,
)
from .estimation import (
    DEFAULT_PRIOR,
    adaptive_run,
    adaptive_runner,
    fixed_protocol_runner,
    interior_sampler,
    monotone_window,
    precision_study,
    run_seed,
)
from .fisher import (
    cfi_two_outcome,
    fisher_landscape,
    outcome_probability,
    qfi_controlled_closed,
)
from .protocol import build_protocol, protocol_qfi, waveplate_settings

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

CONFIG_KEYS = ("x_true", "N", "t", "n", "K", "iterations", "batch_size", "seed", "prior")

QFI_CURVE_HEADER = ("T", "N", "sqrtJ", "sqrtJ_snl", "sqrtJ_heis")
FRINGE_HEADER = ("x", "p_plus", "p_minus")
ADAPTIVE_HEADER = ("batch", "x_hat_design", "n_plus", "n_total", "estimate")
RUNS_HEADER = ("run", "estimate")
SHOT_NOISE_HEADER = ("T", "J_shot", "N_opt", "J_heisenberg")
PROTOCOL_HEADER = ("plate", "rad", "deg")
FIG3B_HEADER = ("T", "N", "delta_emp", "delta_err", "delta_qcrb", "delta_vt")
FIG4B_HEADER = ("x", "sqrtF_sweet", "sqrtF_nonsweet")
FIGS5_HEADER = ("T", "J_shot", "N_opt", "J_shot_over_T")

FIGURES = ("fig3a", "fig3b", "fig4a", "fig4b", "figS2", "figS3", "figS5")


class ValidationError(Exception):
    pass


class NumericError(Exception):
    pass


# --- formatting -------------------------------------------------------------


def fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _check_finite(v: Any) -> None:
    if isinstance(v, (float, np.floating)) and not math.isfinite(v):
        raise NumericError(f"non-finite value {v}")


def _round(v: Any) -> Any:
    """JSON value with floats cut to 12 significant digits."""
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        _check_finite(v)
        return float(f"{float(v):.12g}")
    return v


@dataclass
class Table:
    header: Sequence[str]
    rows: list[Sequence[Any]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            for v in row:
                _check_finite(v)
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def records(self) -> list[dict]:
        return [dict(zip(self.header, row)) for row in self.rows]


@dataclass
class Result:
    """A command's output: a JSON record, a table, or both."""

    record: dict | None = None
    table: Table | None = None
    default_format: str = "csv"

    def render(self, fmt_: str | None) -> str:
        fmt_ = fmt_ or self.default_format
        if fmt_ == "csv":
            if self.table is None:
                table = Table(list(self.record), [list(self.record.values())])
            else:
                table = self.table
            return table.to_csv()
        payload = self.record if self.record is not None else {"rows": self.table.records()}
        return json.dumps(_round(payload), indent=2) + "\n"


# --- parameter handling -----------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals:
        raise ValidationError("empty list")
    return vals


def _prior(value) -> tuple[float, float]:
    if isinstance(value, str):
        value = value.split(",")
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"prior must be two numbers lo,hi; got {value!r}") from exc
    if not hi > lo:
        raise ValidationError("prior needs hi > lo")
    return lo, hi


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"expected a boolean, got {text!r}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def resolve(defaults: dict, config: dict, flags: dict) -> dict:
    """Defaults < config file < explicit flags (``None`` means not given)."""
    out = dict(defaults)
    out.update({k: v for k, v in config.items() if k in defaults})
    out.update({k: v for k, v in flags.items() if k in defaults and v is not None})
    return out


def _positive_int(name, v) -> int:
    if isinstance(v, bool) or int(v) != v or int(v) < 1:
        raise ValidationError(f"{name} must be a positive integer, got {v!r}")
    return int(v)


def _positive(name, v) -> float:
    v = float(v)
    if not v > 0 or not math.isfinite(v):
        raise ValidationError(f"{name} must be positive, got {v!r}")
    return v


def _seed(v) -> int:
    if isinstance(v, bool) or int(v) != v or not 0 <= int(v) < 2**64:
        raise ValidationError(f"seed must be an integer in [0, 2^64), got {v!r}")
    return int(v)


# --- commands ---------------------------------------------------------------


def qfi_curve(N: Sequence[int], Tmax: float, steps: int) -> Table:
    """Optimal-control QFI with the shot-noise and Heisenberg envelopes over ``(0, Tmax]``."""
    Ts = np.arange(1, steps + 1) * (Tmax / steps)
    table = Table(QFI_CURVE_HEADER)
    for n in N:
        J = qfi_controlled_closed(n, Ts)
        for T, j in zip(Ts, J):
            table.rows.append(
                [float(T), int(n), math.sqrt(j), math.sqrt(shot_noise_limit(T)[0]), math.sqrt(heisenberg_qfi(T))]
            )
    return table


def fringe_scan(N: int, sweet: bool, xhat: float, points: int, t: float | None = None) -> Table:
    """``P_+`` over ``x in [-pi/2, 0]``; the non-sweet scan uses half the sweet block time."""
    if t is None:
        t = np.pi / 2 if sweet else np.pi / 4
    x = np.linspace(-np.pi / 2, 0.0, points)
    p = outcome_probability(x, xhat, t, N)
    return Table(FRINGE_HEADER, [[float(a), float(b), float(1 - b)] for a, b in zip(x, p)])


def landscape(N, xhat, xmin, xmax, xsteps, Tmax, Tsteps) -> Table:
    x = np.linspace(xmin, xmax, xsteps)
    Ts = np.arange(1, Tsteps + 1) * (Tmax / Tsteps)
    land = fisher_landscape(x, Ts, N, xhat)
    return Table(
        ("x", "T", "N", "qfi", "cfi", "p_plus"),
        [[p.x, p.T, p.N, p.qfi, p.cfi, p.p_plus] for p in land.points()],
    )


def adaptive_sim(p: dict) -> Result:
    prior = _prior(p["prior"])
    x_true = p["x_true"]
    if x_true is None:
        seq_x, _ = run_seed(p["seed"], 0)
        x_true = interior_sampler(prior)(np.random.default_rng(seq_x))
    run = adaptive_run(
        float(x_true), p["N"], p["t"], p["iterations"], p["batch_size"], p["seed"], prior
    )
    summary = run.summary()
    summary.update(N=p["N"], t=p["t"], prior=list(prior))
    table = Table(ADAPTIVE_HEADER)
    for i, (b, est) in enumerate(zip(run.batches, run.estimates)):
        table.rows.append([i + 1, b.protocol.x_hat, b.n_plus, b.n_total, est])
    return Result(summary, table, default_format="json")


def precision(p: dict) -> Result:
    """Fixed ideal design at ``x_true`` (``iterations`` unset or 1) or the adaptive scheme."""
    N, t, n, K = p["N"], p["t"], p["n"], p["K"]
    iterations = p["iterations"]
    adaptive = iterations is not None and iterations > 1
    if adaptive:
        prior = _prior(p["prior"] if p["prior"] is not None else DEFAULT_PRIOR)
        if p["batch_size"] is not None:
            n = iterations * p["batch_size"]
        if n % iterations:
            raise ValidationError(f"n={n} is not divisible by iterations={iterations}")
        runner = adaptive_runner(N, t, iterations, prior)
        x_true = p["x_true"] if p["x_true"] is not None else interior_sampler(prior)
        mode = "adaptive"
    else:
        x0 = 0.0 if p["x_true"] is None else float(p["x_true"])
        prior = _prior(p["prior"]) if p["prior"] is not None else monotone_window(N, t, x0)
        runner = fixed_protocol_runner(build_protocol(x0, N, t), prior)
        x_true = x0
        mode = "ideal"
    stats = precision_study(x_true, runner, n, K, p["seed"])
    record = {"mode": mode, "N": N, "t": t, "T": N * t, "prior": list(prior), "seed": p["seed"]}
    record.update(stats.as_dict())
    record["sqrtJ_ideal"] = math.sqrt(float(qfi_controlled_closed(N, N * t)))
    table = Table(RUNS_HEADER, [[k, float(e)] for k, e in enumerate(stats.estimates)])
    return Result(record, table, default_format="json")


def shot_noise(T: float) -> Result:
    J, n_opt = shot_noise_limit(T)
    return Result({"T": T, "J_shot": J, "N_opt": n_opt, "J_heisenberg": float(heisenberg_qfi(T))},
                  default_format="json")


def bounds(p: dict) -> Result:
    """Limits at total time ``T = N t`` plus the van Trees bound of the design at the prior midpoint."""
    N, t, n = p["N"], p["t"], p["n"]
    T = N * t
    rec = shot_noise(T).record
    rec["N"] = N
    rec["J_controlled"] = float(qfi_controlled_closed(N, T))
    lo, hi = _prior(p["prior"])
    prior = raised_cosine_prior(lo, hi)
    config = build_protocol(0.5 * (lo + hi), N, t)
    rec["n"] = n
    rec["prior"] = [lo, hi]
    rec["van_trees"] = van_trees_bound(prior, n, lambda x: protocol_qfi(config, x))
    return Result(rec, default_format="json")


def protocol_angles(xhat: float, t: float) -> Result:
    angles = waveplate_settings(xhat, t).as_dict()
    table = Table(PROTOCOL_HEADER, [[k, v["rad"], v["deg"]] for k, v in angles.items()])
    return Result({"x_hat": xhat, "t": t, "angles": angles}, table, default_format="json")


# --- figure data --------------------------------------------------------------


def fig3b_table(K: int = 200, n: int = 50, seed: int = 0, steps: int = 12) -> Table:
    """Monte Carlo precision against the quantum and van Trees bounds.

    ``x_true`` is drawn from a raised-cosine prior on the unambiguous window of
    the design at 0 (at most ``[-pi/4, pi/4]``); the design is fixed at 0.
    Near ``T = k pi`` with ``N = 1`` the QFI vanishes, and only the prior keeps
    the error finite.
    """
    table = Table(FIG3B_HEADER)
    Ts = np.arange(1, steps + 1) * (2 * np.pi / steps)
    for N in (1, 2, 4):
        for T in Ts:
            t = T / N
            lo, hi = monotone_window(N, t)
            half = min(hi, np.pi / 4)
            prior = raised_cosine_prior(-half, half)
            config = build_protocol(0.0, N, t)
            stats = precision_study(
                lambda rng: prior.sample(rng),
                fixed_protocol_runner(config, (-half, half)),
                n, K, seed,
            )
            j0 = float(protocol_qfi(config, 0.0))
            qcrb = 1 / math.sqrt(n * j0) if j0 > 1e-12 else float("inf")
            vt = van_trees_bound(prior, n, lambda x: protocol_qfi(config, x))
            table.rows.append([float(T), N, stats.rmse, stats.rmse_err, qcrb, vt])
    return table


def _inf_ok(table: Table) -> Table:
    """Infinite QCRB entries are meaningful here; write them as ``inf``."""
    table.rows = [[("inf" if isinstance(v, float) and math.isinf(v) else v) for v in r] for r in table.rows]
    return table


def figure_tables(name: str, seed: int = 0, K: int = 200) -> dict[str, Table]:
    if name == "fig3a":
        return {"fig3a.csv": qfi_curve([1, 2, 4], 2 * np.pi, 200)}
    if name == "fig3b":
        return {"fig3b.csv": _inf_ok(fig3b_table(K=K, seed=seed))}
    if name == "fig4a":
        out = {}
        for N in (1, 2, 4, 8):
            out[f"fig4a_N{N}_sweet.csv"] = fringe_scan(N, True, 0.0, 401)
            out[f"fig4a_N{N}_nonsweet.csv"] = fringe_scan(N, False, 0.0, 401)
        return out
    if name == "fig4b":
        x = np.linspace(-np.pi / 2, 0.0, 401)
        sweet = np.sqrt(cfi_two_outcome(x, 0.0, np.pi / 2, 8))
        non = np.sqrt(cfi_two_outcome(x, 0.0, np.pi / 4, 8))
        return {"fig4b.csv": Table(FIG4B_HEADER, [list(map(float, r)) for r in zip(x, sweet, non)])}
    if name in ("figS2", "figS3"):
        table = landscape(1, np.pi / 4, 0.0, np.pi / 2, 61, 2 * np.pi, 60)
        if name == "figS2":
            table = Table(("x", "T", "N", "p_plus"), [[r[0], r[1], r[2], r[5]] for r in table.rows])
        else:
            table = Table(("x", "T", "N", "qfi", "cfi"), [r[:5] for r in table.rows])
        return {f"{name}.csv": table}
    if name == "figS5":
        Ts = np.arange(1, 201) * 0.5
        rows = []
        for T in Ts:
            J, n_opt = shot_noise_limit(T)
            rows.append([float(T), J, n_opt, J / T])
        return {"figS5.csv": Table(FIGS5_HEADER, rows)}
    raise ValidationError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")


def emit_figure_data(name: str, out_dir: str | os.PathLike = ".", seed: int = 0, K: int = 200) -> list[Path]:
    """Write one CSV per panel of ``name`` into ``out_dir``; returns the paths."""
    tables = figure_tables(name, seed, K)
    texts = {fn: t.to_csv() for fn, t in tables.items()}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for fn, text in texts.items():
        path = out / fn
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths


# --- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="64-bit study seed")
    common.add_argument("--out", help="output file (default: stdout); directory for 'figure'")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="ctrlseq", description="Control-enhanced sequential estimation on a qubit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("qfi-curve", parents=[common], help="optimal QFI vs total time")
    p.add_argument("--N", dest="N_list")
    p.add_argument("--Tmax", type=float)
    p.add_argument("--steps", type=int)

    p = sub.add_parser("fringe-scan", parents=[common], help="outcome probability over x")
    p.add_argument("--N", type=int)
    p.add_argument("--sweet")
    p.add_argument("--xhat", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--points", type=int)

    for name, helptext in (("adaptive-sim", "one adaptive estimation run"),
                           ("precision-study", "repeated estimation statistics"),
                           ("bounds", "precision limits and the van Trees bound")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--N", type=int)
        p.add_argument("--t", type=float)
        p.add_argument("--prior")
        if name != "bounds":
            p.add_argument("--x-true", dest="x_true", type=float)
            p.add_argument("--iterations", type=int)
            p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--n", type=int)
        if name == "precision-study":
            p.add_argument("--K", type=int)

    p = sub.add_parser("landscape", parents=[common], help="QFI/CFI/probability table over (x, T)")
    p.add_argument("--N", type=int)
    p.add_argument("--xhat", type=float)
    p.add_argument("--xmin", type=float)
    p.add_argument("--xmax", type=float)
    p.add_argument("--xsteps", type=int)
    p.add_argument("--Tmax", type=float)
    p.add_argument("--Tsteps", type=int)

    p = sub.add_parser("shot-noise", parents=[common], help="shot-noise and Heisenberg limits")
    p.add_argument("--T", type=float)

    p = sub.add_parser("protocol", parents=[common], help="waveplate angles for a design")
    p.add_argument("--xhat", type=float)
    p.add_argument("--t", type=float)

    p = sub.add_parser("figure", parents=[common], help="emit figure data tables")
    p.add_argument("name", choices=FIGURES)
    p.add_argument("--K", type=int)
    return parser


DEFAULTS: dict[str, dict] = {
    "qfi-curve": {"N": [1, 2, 4], "Tmax": 2 * np.pi, "steps": 200},
    "fringe-scan": {"N": 8, "sweet": True, "xhat": 0.0, "t": None, "points": 401},
    "adaptive-sim": {"x_true": None, "N": 1, "t": np.pi / 2, "iterations": 5, "batch_size": 10,
                     "seed": 0, "prior": list(DEFAULT_PRIOR)},
    "precision-study": {"x_true": None, "N": 1, "t": np.pi / 2, "n": 50, "K": 1000,
                        "iterations": None, "batch_size": None, "seed": 0, "prior": None},
    "landscape": {"N": 1, "xhat": np.pi / 4, "xmin": 0.0, "xmax": np.pi / 2, "xsteps": 61,
                  "Tmax": 2 * np.pi, "Tsteps": 60},
    "shot-noise": {"T": None},
    "bounds": {"N": 1, "t": np.pi, "n": 50, "prior": list(DEFAULT_PRIOR)},
    "protocol": {"xhat": 0.0, "t": np.pi / 2},
    "figure": {"seed": 0, "K": 200},
}


def _params(args: argparse.Namespace) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out", "format", "verbose")}
    if "N_list" in flags:
        flags["N"] = _int_list(flags.pop("N_list")) if flags["N_list"] is not None else None
    config = load_config(args.config)
    if args.command == "qfi-curve" and isinstance(config.get("N"), int):
        config["N"] = [config["N"]]
    p = resolve(DEFAULTS[args.command], config, flags)
    return p


def execute(args: argparse.Namespace) -> Result | dict[str, Table]:
    p = _params(args)
    cmd = args.command
    if "seed" in p:
        p["seed"] = _seed(p["seed"])
    for key in ("N", "steps", "points", "xsteps", "Tsteps", "K", "n"):
        if key in p and p[key] is not None:
            if isinstance(p[key], list):
                p[key] = [_positive_int(key, v) for v in p[key]]
            else:
                p[key] = _positive_int(key, p[key])
    for key in ("iterations", "batch_size"):
        if p.get(key) is not None:
            p[key] = _positive_int(key, p[key])
    for key in ("t", "Tmax", "T"):
        if p.get(key) is not None:
            p[key] = _positive(key, p[key])

    if cmd == "qfi-curve":
        return Result(table=qfi_curve(p["N"], p["Tmax"], p["steps"]))
    if cmd == "fringe-scan":
        return Result(table=fringe_scan(p["N"], _bool(p["sweet"]), p["xhat"], p["points"], p["t"]))
    if cmd == "landscape":
        if not p["xmax"] > p["xmin"]:
            raise ValidationError("need xmax > xmin")
        return Result(table=landscape(p["N"], p["xhat"], p["xmin"], p["xmax"], p["xsteps"],
                                      p["Tmax"], p["Tsteps"]))
    if cmd == "adaptive-sim":
        return adaptive_sim(p)
    if cmd == "precision-study":
        if p["n"] < 2 or p["K"] < 2:
            raise ValidationError("precision-study needs n >= 2 and K >= 2")
        return precision(p)
    if cmd == "shot-noise":
        if p["T"] is None:
            raise ValidationError("shot-noise requires --T")
        return shot_noise(p["T"])
    if cmd == "bounds":
        return bounds(p)
    if cmd == "protocol":
        return protocol_angles(p["xhat"], p["t"])
    if cmd == "figure":
        return figure_tables(args.name, p["seed"], p["K"])
    raise ValidationError(f"unknown command {cmd!r}")


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = execute(args)
        if isinstance(result, dict):
            texts = {fn: t.to_csv() for fn, t in result.items()}
            out = Path(args.out or ".")
            out.mkdir(parents=True, exist_ok=True)
            for fn, text in texts.items():
                _write(text, str(out / fn))
                print(out / fn)
        else:
            _write(result.render(args.format), args.out)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
