"""
Experiment harness: synthetic low-rank data, multi-seed runs over a grid
of (solver, strategy) cells, pointwise median aggregation, plot-ready
``.dat``/``.csv`` tables and an exact operation-count report.
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .compress import CompressorSpec, Kind, flops_project, flops_rpi
from .nmf import NmfConfig, Solver, run_nmf
from .rng import DATA, RandomSource, nonneg_uniform_matrix

logger = logging.getLogger(__name__)

OUT_DIR_ENV = "GCSNMF_OUT_DIR"

MAX_ITER_GRID = (1, 2, 5, 10, 25)


def default_grid():
    """Vanilla, RSI, GC, the GCS Max_Iter sweep, wide GCS cells and one CountGauss cell."""
    grid = [
        CompressorSpec(),
        CompressorSpec(Kind.RSI, nu=10, q=4),
        CompressorSpec(Kind.GAUSSIAN, nu=10),
        CompressorSpec(Kind.GAUSSIAN, nu=50),
        CompressorSpec(Kind.COUNTGAUSS, nu=10, mu=50),
    ]
    for nu_i in (10, 50):
        grid += [CompressorSpec(Kind.STREAM, nu_i=nu_i, max_iter=k) for k in MAX_ITER_GRID]
    grid += [CompressorSpec(Kind.STREAM, nu_i=nu_i, max_iter=1) for nu_i in (100, 150)]
    return tuple(grid)


def standard_grid(nu, q=4, nu_i=None, max_iter=1, mu=None):
    """Vanilla, GC, RSI and GCS at one oversampling level (and CountGauss if `mu`)."""
    nu_i = nu if nu_i is None else nu_i
    grid = [
        CompressorSpec(),
        CompressorSpec(Kind.GAUSSIAN, nu=nu),
        CompressorSpec(Kind.RSI, nu=nu, q=q),
        CompressorSpec(Kind.STREAM, nu_i=nu_i, max_iter=max_iter),
    ]
    if mu is not None:
        grid.append(CompressorSpec(Kind.COUNTGAUSS, nu=nu, mu=mu))
    return tuple(grid)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 200
    m: int = 200
    p: int = 5
    num_seeds: int = 15
    outer_iters: int = 100
    solvers: tuple = (Solver.ACTIVE_SET, Solver.NESTEROV)
    strategies: tuple = field(default_factory=default_grid)
    base_seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        if self.num_seeds < 1:
            raise ValueError("num_seeds must be >= 1")
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be >= 1")
        if not self.solvers or not self.strategies:
            raise ValueError("need at least one solver and one strategy")
        object.__setattr__(self, "solvers", tuple(Solver(s) for s in self.solvers))
        for spec in self.strategies:
            spec.validate(self.n, self.m, self.p)


def synth_lowrank(n, m, p, src: RandomSource):
    """X = G* F* with G*, F* entrywise uniform on [0, 1)."""
    if p > min(n, m):
        raise ValueError(f"rank p={p} exceeds min(n, m)={min(n, m)}")
    g = nonneg_uniform_matrix(src.substream(0), n, p)
    f = nonneg_uniform_matrix(src.substream(1), p, m)
    return g @ f


def median_trace(traces):
    """Pointwise median of equal-length traces."""
    return np.median(np.vstack(traces), axis=0)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    medians: dict  # (solver, strategy label) -> ndarray or None
    finals: dict  # (solver, strategy label) -> list of per-seed final RREs
    errors: list

    def median_final(self, solver, strategy):
        key = (Solver(solver).value, _label(strategy))
        trace = self.medians.get(key)
        return math.nan if trace is None else float(trace[-1])


def _label(strategy):
    return strategy.label if isinstance(strategy, CompressorSpec) else CompressorSpec.parse(strategy).label


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """
    Run every (solver, strategy) cell on `num_seeds` synthetic problems.

    Seed ``s`` draws X from substream ``s`` of ``base_seed``; all cells for
    that seed share the same initial factors. A failing run is logged and
    invalidates its cell (its median becomes ``None``).
    """
    cells = [(solver, spec) for solver in cfg.solvers for spec in cfg.strategies]
    per_cell = {(solver.value, spec.label): [] for solver, spec in cells}
    broken = set()
    errors = []
    for s in range(cfg.num_seeds):
        x = synth_lowrank(cfg.n, cfg.m, cfg.p, RandomSource(cfg.base_seed, s).substream(DATA))
        for solver, spec in cells:
            key = (solver.value, spec.label)
            ncfg = NmfConfig(
                p=cfg.p,
                outer_iters=cfg.outer_iters,
                solver=solver,
                compressor=spec,
                seed=cfg.base_seed,
                stream_id=s,
            )
            try:
                _, _, trace = run_nmf(x, ncfg)
            except Exception as exc:  # report and keep going
                msg = f"seed {s} {key[0]} {key[1]}: {type(exc).__name__}: {exc}"
                logger.error(msg)
                errors.append(msg)
                broken.add(key)
                continue
            per_cell[key].append(trace.values)
            logger.debug("seed %d %s %s final RRE %.3e", s, key[0], key[1], trace.final)
        logger.info("seed %d/%d done", s + 1, cfg.num_seeds)

    medians = {}
    finals = {}
    for key, traces in per_cell.items():
        finals[key] = [float(t[-1]) for t in traces]
        medians[key] = None if key in broken or not traces else median_trace(traces)
    return ExperimentResult(cfg, medians, finals, errors)


# -- .dat / .csv tables ------------------------------------------------------

_SOLVER_PREFIX = {Solver.ACTIVE_SET.value: "aS", Solver.NESTEROV.value: "neNMF"}
_SUFFIX_ORDER = ("V", "GC", "RSI", "GC_RE", "CG")


def dat_column_key(column):
    """Sort key: solver prefix first (aS before neNMF), then strategy suffix."""
    prefix, _, suffix = column.partition("_")
    prefixes = list(_SOLVER_PREFIX.values())
    p_rank = prefixes.index(prefix) if prefix in prefixes else len(prefixes)
    s_rank = _SUFFIX_ORDER.index(suffix) if suffix in _SUFFIX_ORDER else len(_SUFFIX_ORDER)
    return (p_rank, prefix, s_rank, suffix)


def _fmt(value):
    value = float(value)
    return "nan" if math.isnan(value) else f"{value:.17g}"


def _table(traces):
    lengths = {len(v) for v in traces.values() if v is not None}
    if len(lengths) > 1:
        raise ValueError(f"traces must share one length, got {sorted(lengths)}")
    if not lengths:
        raise ValueError("no valid trace to emit")
    length = lengths.pop()
    columns = sorted(traces, key=dat_column_key)
    rows = []
    for i in range(length):
        rows.append([_fmt(math.nan if traces[c] is None else traces[c][i]) for c in columns])
    return columns, rows


def emit_dat(traces, path):
    """
    Write traces as a whitespace-separated table.

    `traces` maps column keys (``aS_V``, ``neNMF_GC_RE``, ...) to equal-length
    sequences, or to ``None`` for a failed cell, which is written as ``nan``.
    Columns are ordered by :func:`dat_column_key`; values carry 17
    significant digits so that :func:`parse_dat` recovers them exactly.
    """
    columns, rows = _table(traces)
    path = Path(path)
    try:
        with path.open("w") as fh:
            fh.write(" ".join(columns) + "\n")
            for row in rows:
                fh.write(" ".join(row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_csv(traces, path):
    columns, rows = _table(traces)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def parse_dat(path):
    """Read a table written by :func:`emit_dat` back into a dict of arrays."""
    with Path(path).open() as fh:
        header = fh.readline().split()
        data = [[float(tok) for tok in line.split()] for line in fh if line.strip()]
    values = np.array(data, dtype=np.float64).reshape(len(data), len(header))
    return {name: values[:, j] for j, name in enumerate(header)}


def dat_tables(result: ExperimentResult):
    """
    Group median traces into the per-figure tables.

    One table per GCS cell ``(nu_i, max_iter)``; each holds, for every
    solver, the vanilla (V), Gaussian (GC, same nu), RSI, stream (GC_RE)
    and CountGauss (CG, same nu) medians. Returns ``{file stem: traces}``.
    """
    specs = result.config.strategies
    rsi = next((s for s in specs if s.kind is Kind.RSI), None)
    tables = {}
    for spec in specs:
        if spec.kind is not Kind.STREAM:
            continue
        mi = "inf" if math.isinf(spec.max_iter) else str(int(spec.max_iter))
        stem = f"nu_{spec.nu_i}_maxiter_{mi}"
        gc = CompressorSpec(Kind.GAUSSIAN, nu=spec.nu_i)
        cg = next((s for s in specs if s.kind is Kind.COUNTGAUSS and s.nu == spec.nu_i), None)
        members = {"V": CompressorSpec(), "GC": gc, "RSI": rsi, "GC_RE": spec, "CG": cg}
        traces = {}
        for solver in result.config.solvers:
            prefix = _SOLVER_PREFIX[solver.value]
            for suffix, member in members.items():
                if member is None or member not in specs:
                    if suffix in ("CG",):
                        continue
                    traces[f"{prefix}_{suffix}"] = None
                    continue
                traces[f"{prefix}_{suffix}"] = result.medians.get((solver.value, member.label))
        tables[stem] = traces
    return tables


def emit_all_traces(result: ExperimentResult, path):
    """Every cell's median trace in one CSV, one column per ``solver/strategy``."""
    keys = [(s.value, spec.label) for s in result.config.solvers for spec in result.config.strategies]
    length = result.config.outer_iters + 1
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration"] + [f"{solver}/{label}" for solver, label in keys])
        for i in range(length):
            row = [str(i)]
            for key in keys:
                trace = result.medians.get(key)
                row.append(_fmt(math.nan if trace is None else trace[i]))
            writer.writerow(row)
    return path


def read_all_traces(path):
    """Inverse of :func:`emit_all_traces`: ``{(solver, label): ndarray}``."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row[1:]] for row in reader]
    values = np.array(rows, dtype=np.float64)
    out = {}
    for j, name in enumerate(header[1:]):
        solver, _, label = name.partition("/")
        out[(solver, label)] = values[:, j]
    return out


# -- operation counts ----------------------------------------------------------

@dataclass(frozen=True)
class CostLine:
    strategy: str
    setup: Fraction
    per_refresh: int
    refreshes: int

    @property
    def total(self) -> Fraction:
        return self.setup + self.per_refresh * self.refreshes


def refresh_count(outer_iters, max_iter):
    if math.isinf(max_iter):
        return 1
    return -(-int(outer_iters) // int(max_iter))


def cost_line(spec: CompressorSpec, n, m, p, outer_iters) -> CostLine:
    """
    Exact operation counts of one strategy over `outer_iters` updates.

    Projection of X on both sides costs ``2 * flops_project`` per pair of
    compressors. RSI adds two compressor constructions up front. GCS pays
    the projection again at each refresh. The CountGauss count (bucket pass
    plus the small Gaussian product, per side) has no closed form in the
    source model and is our own tally.
    """
    if spec.kind is Kind.NONE:
        return CostLine(spec.label, Fraction(0), 0, 0)
    if spec.kind is Kind.GAUSSIAN:
        return CostLine(spec.label, Fraction(0), 2 * flops_project(n, m, p, spec.nu), 1)
    if spec.kind is Kind.RSI:
        setup = 2 * flops_rpi(n, m, p, spec.nu, spec.q)
        return CostLine(spec.label, setup, 2 * flops_project(n, m, p, spec.nu), 1)
    if spec.kind is Kind.STREAM:
        return CostLine(
            spec.label,
            Fraction(0),
            2 * flops_project(n, m, p, spec.nu_i),
            refresh_count(outer_iters, spec.max_iter),
        )
    if spec.kind is Kind.COUNTGAUSS:
        k, s = p + spec.nu, p + spec.mu
        per_side_left = n * m + k * s * m
        per_side_right = n * m + n * s * k
        return CostLine(spec.label, Fraction(0), per_side_left + per_side_right, 1)
    raise ValueError(f"no cost model for {spec.label}")


def crossover_refresh(stream: CostLine, reference: CostLine):
    """Smallest refresh count r with ``r * per_refresh > reference.total``."""
    if stream.per_refresh <= 0:
        return None
    bound = reference.total / stream.per_refresh
    return math.floor(bound) + 1


def _num(value):
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    whole, rest = divmod(value.numerator, value.denominator)
    return f"{whole} {rest}/{value.denominator}"


def cost_report(n, m, p, outer_iters, strategies):
    """Plain-text table of exact operation counts, with GCS/RSI crossovers."""
    priced = [(s, cost_line(s, n, m, p, outer_iters)) for s in strategies if s.kind is not Kind.NONE]
    head = ("strategy", "setup", "per_refresh", "refreshes", "total")
    rows = [(c.strategy, _num(c.setup), _num(c.per_refresh), str(c.refreshes), _num(c.total)) for _, c in priced]
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(len(head))]
    out = [f"operation counts for n={n} m={m} p={p} outer_iters={outer_iters}"]
    out.append("  ".join(h.ljust(w) for h, w in zip(head, widths)).rstrip())
    for r in rows:
        out.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())

    streams = [(s, c) for s, c in priced if s.kind is Kind.STREAM]
    rsis = [c for s, c in priced if s.kind is Kind.RSI]
    if streams and rsis:
        out.append("")
        for spec, stream in streams:
            for ref in rsis:
                if math.isinf(spec.max_iter):
                    out.append(
                        f"crossover: {stream.strategy} projects once ({_num(stream.total)}) "
                        f"and never overtakes {ref.strategy} ({_num(ref.total)})"
                        if stream.total <= ref.total
                        else f"crossover: {stream.strategy} ({_num(stream.total)}) exceeds "
                        f"{ref.strategy} ({_num(ref.total)}) from the first refresh"
                    )
                    continue
                r = crossover_refresh(stream, ref)
                it = (r - 1) * int(spec.max_iter) + 1
                reached = "reached" if r <= stream.refreshes else "not reached"
                out.append(
                    f"crossover: {stream.strategy} exceeds {ref.strategy} ({_num(ref.total)}) "
                    f"at refresh {r} (iteration {it}); {reached} within {outer_iters} iterations"
                )
    return "\n".join(out) + "\n"


def emit_cost_report(cfg: ExperimentConfig, path=None):
    text = cost_report(cfg.n, cfg.m, cfg.p, cfg.outer_iters, cfg.strategies)
    if path is not None:
        Path(path).write_text(text)
    return text


# -- config files ------------------------------------------------------------

_CONFIG_KEYS = {
    "n": ("n", int),
    "m": ("m", int),
    "p": ("p", int),
    "seeds": ("num_seeds", int),
    "iters": ("outer_iters", int),
    "seed": ("base_seed", int),
    "solvers": ("solvers", None),
    "strategies": ("strategies", None),
    "out": ("output_dir", str),
}


def _split_list(text):
    items = []
    for line in text.replace(";", "\n").splitlines():
        line = line.strip()
        if line:
            items.append(line)
    return items


def load_config(path):
    """
    Read an experiment config file.

    The format is INI-style ``key = value`` lines, optionally under an
    ``[experiment]`` header; ``#`` starts a comment. Keys: n, m, p, seeds,
    iters, seed, out, solvers (comma separated: as, nenmf) and strategies
    (one label per line or ``;`` separated, e.g. ``gcs:nu_i=10,max_iter=1``).
    Returns a dict of :class:`ExperimentConfig` field overrides.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    if not any(line.strip().startswith("[") for line in text.splitlines()):
        text = "[experiment]\n" + text
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ValueError(f"bad config {path}: {exc}") from exc
    if not parser.has_section("experiment"):
        raise ValueError(f"bad config {path}: missing [experiment] section")
    out = {}
    for key, raw in parser.items("experiment"):
        if key not in _CONFIG_KEYS:
            raise ValueError(f"bad config {path}: unknown key {key!r}")
        name, conv = _CONFIG_KEYS[key]
        if key == "solvers":
            out[name] = tuple(Solver(s.strip().lower()) for s in raw.split(",") if s.strip())
        elif key == "strategies":
            out[name] = tuple(CompressorSpec.parse(s) for s in _split_list(raw))
        else:
            out[name] = conv(raw.strip())
    return out


def write_outputs(result: ExperimentResult, out_dir):
    """Write all tables, the cost report and any run errors to `out_dir`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [emit_all_traces(result, out_dir / "all_traces.csv")]
    for stem, traces in sorted(dat_tables(result).items()):
        written.append(emit_dat(traces, out_dir / f"{stem}.dat"))
        written.append(emit_csv(traces, out_dir / f"{stem}.csv"))
    cost_path = out_dir / "cost_report.txt"
    emit_cost_report(result.config, cost_path)
    written.append(cost_path)
    summary = out_dir / "summary.txt"
    summary.write_text(_summary(result))
    written.append(summary)
    if result.errors:
        err = out_dir / "errors.txt"
        err.write_text("\n".join(result.errors) + "\n")
        written.append(err)
    return written


def _summary(result):
    cfg = result.config
    lines = [
        f"n={cfg.n} m={cfg.m} p={cfg.p} seeds={cfg.num_seeds} iters={cfg.outer_iters} base_seed={cfg.base_seed}",
        "median final RRE:",
    ]
    for solver in cfg.solvers:
        for spec in cfg.strategies:
            value = result.median_final(solver, spec)
            lines.append(f"  {solver.value:6s} {spec.label:28s} {_fmt(value)}")
    return "\n".join(lines) + "\n"


def resolve_output_dir(flag_value, config_value=None):
    if flag_value:
        return flag_value
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return env
    return config_value or ExperimentConfig.output_dir


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
