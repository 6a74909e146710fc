"""Batch front end: config files, named demos and CSV reports.

Config files are flat ``key = value`` text, one key per line, ``#`` starts
a comment.  Lists use ``;``; the parts of a multi-direction operator use
``|``.  Example::

    dimension = 2
    operator = single
    symbol = exp
    direction = 1, 0
    targets = x1^2; 1 + x2
    epsilon = 0.2

Exit codes: 0 success, 2 bad config, 3 region search failure, 4 tolerance
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .core import DimensionError, ExpPoly, NormTag, Point, dumps, loads, parse_expr
from .density import RegionSearchError, approx_in_region, find_region_point
from .dynamics import criterion_report, csv_text, format_number, orbit_tour, transitivity_witness
from .operators import DirectionRule, MultiOp, Region, RegionError, SingleOp, VaryingOp
from .seminorm import BallSpec, SamplerConfig, sup_lower
from .symbols import Symbol, ToleranceError

EXIT_OK, EXIT_CONFIG, EXIT_REGION, EXIT_TOLERANCE = 0, 2, 3, 4

REPORT_COLUMNS = ("n", "sampled_T", "certified_T", "sampled_S", "certified_S")
APPROX_COLUMNS = ("terms", "truncation_error", "rounding_error", "certified_error", "sampled_error")


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class ExperimentConfig:
    dimension: int = 1
    norm: NormTag = NormTag.L2
    operator: str = "single"
    symbol: tuple = ("exp",)
    direction: tuple = ()  # empty means the first basis vector
    varying_rule: str = "harmonic"
    bound_B: Optional[float] = None
    targets: tuple = ("z^2",)
    target_files: tuple = ()
    source: str = "0"
    source_file: Optional[str] = None
    region: str = "V"
    epsilon: float = 0.1
    radius: float = 1.0
    margin: float = 0.2
    seed: int = 0
    sample_count: int = 1024
    budget: int = 8
    n_max: int = 50
    output: str = "results"
    base_dir: str = field(default=".", compare=False)

    # builders -------------------------------------------------------------
    def build_operator(self):
        symbols = [Symbol.parse(s) for s in self.symbol]
        dirs = [Point(d, self.norm) for d in self.direction]
        if not dirs:
            dirs = [Point(tuple(float(i == 0) for i in range(self.dimension)), self.norm)] * len(symbols)
        for d in dirs:
            if d.dim != self.dimension:
                raise ConfigError(f"direction {d.coords} does not have dimension {self.dimension}")
        if self.operator == "single":
            return SingleOp(symbols[0], dirs[0])
        if self.operator == "multi":
            if len(symbols) != len(dirs):
                raise ConfigError("multi operator needs as many symbols as directions")
            return MultiOp(tuple(zip(symbols, dirs)))
        return VaryingOp(symbols[0], DirectionRule(dirs[0], self.varying_rule), self.bound_B)

    def build_targets(self) -> list[ExpPoly]:
        out = [parse_expr(t, self.dimension, self.norm) for t in self.targets]
        for path in self.target_files:
            out.append(_load_terms(self._path(path), self.dimension, self.norm))
        if not out:
            raise ConfigError("no targets given")
        return out

    def build_source(self) -> ExpPoly:
        if self.source_file is not None:
            return _load_terms(self._path(self.source_file), self.dimension, self.norm)
        return parse_expr(self.source, self.dimension, self.norm)

    @property
    def ball(self) -> BallSpec:
        return BallSpec(self.radius, self.norm)

    @property
    def sampler(self) -> SamplerConfig:
        return SamplerConfig(self.sample_count, self.seed)

    def _path(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)


def _load_terms(path: str, dim: int, norm: NormTag) -> ExpPoly:
    with open(path) as fh:
        return loads(fh.read(), dim, norm)


def _split(value: str, sep: str) -> tuple:
    return tuple(p.strip() for p in value.split(sep) if p.strip())


def _coords(value: str) -> tuple:
    return tuple(complex(c.replace(" ", "").replace("i", "j")) for c in _split(value, ","))


def _positive(kind):
    def conv(v):
        x = kind(v)
        if not x > 0:
            raise ValueError(f"must be positive, got {v}")
        return x
    return conv


def _choice(*names):
    def conv(v):
        if v not in names:
            raise ValueError(f"expected one of {', '.join(names)}")
        return v
    return conv


_KEYS = {
    "dimension": ("dimension", _positive(int)),
    "norm": ("norm", NormTag.parse),
    "operator": ("operator", _choice("single", "multi", "varying")),
    "symbol": ("symbol", lambda v: _split(v, "|")),
    "direction": ("direction", lambda v: tuple(_coords(p) for p in _split(v, "|"))),
    "varying_rule": ("varying_rule", _choice("const", "alternating", "harmonic")),
    "bound_B": ("bound_B", _positive(float)),
    "targets": ("targets", lambda v: _split(v, ";")),
    "target_files": ("target_files", lambda v: _split(v, ";")),
    "source": ("source", str.strip),
    "source_file": ("source_file", str.strip),
    "region": ("region", lambda v: _choice("U", "V")(v.upper())),
    "epsilon": ("epsilon", _positive(float)),
    "radius": ("radius", _positive(float)),
    "margin": ("margin", _positive(float)),
    "seed": ("seed", int),
    "sample_count": ("sample_count", _positive(int)),
    "budget": ("budget", _positive(int)),
    "n_max": ("n_max", _positive(int)),
    "output": ("output", str.strip),
}


def parse_config(text: str, source: str = "<config>", base: ExperimentConfig = ExperimentConfig(),
                 base_dir: str = ".") -> ExperimentConfig:
    """Parse ``key = value`` lines on top of ``base``; errors carry the line number."""
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        name, conv = _KEYS[key]
        try:
            values[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno, source) from None
        lines[name] = lineno
    cfg = replace(base, base_dir=base_dir, **values)
    _validate(cfg, lines, source)
    return cfg


def _validate(cfg: ExperimentConfig, lines: dict, source: str) -> None:
    """Build everything once so that bad symbols, expressions or files fail at parse time."""
    checks = [
        ("symbol", lambda: [Symbol.parse(s) for s in cfg.symbol]),
        ("direction", lambda: cfg.build_operator()),
        ("targets", lambda: [parse_expr(t, cfg.dimension, cfg.norm) for t in cfg.targets]),
        ("target_files", lambda: [_load_terms(cfg._path(p), cfg.dimension, cfg.norm)
                                  for p in cfg.target_files]),
        ("source", lambda: parse_expr(cfg.source, cfg.dimension, cfg.norm)),
        ("source_file", lambda: cfg.build_source()),
    ]
    for name, check in checks:
        try:
            check()
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], lines.get(name), source) from None
        except (ValueError, DimensionError, OSError, SyntaxError) as exc:
            raise ConfigError(f"{name}: {exc}", lines.get(name), source) from None
    if not cfg.targets and not cfg.target_files:
        raise ConfigError("no targets given", lines.get("targets"), source)


# ---------------------------------------------------------------------------
# demos
# ---------------------------------------------------------------------------

DEMOS = {
    "birkhoff": ExperimentConfig(dimension=2, symbol=("exp",), direction=((1.0, 0.0),),
                                 targets=("x1^2", "1 + x2", "exp(-x1)"), epsilon=0.2),
    "maclane": ExperimentConfig(dimension=1, symbol=("poly:0;1",), direction=((1.0,),),
                                targets=("1 + z", "z^2"), epsilon=0.2),
    "godefroy-shapiro": ExperimentConfig(dimension=2, symbol=("poly:1;0;1",), direction=((1.0, 0.0),),
                                         targets=("x1", "x1*x2"), epsilon=0.2),
    "multidirection": ExperimentConfig(dimension=2, operator="multi", symbol=("exp", "exp"),
                                       direction=((1.0, 0.0), (0.0, 1.0)),
                                       targets=("x1*x2", "1 + x1"), epsilon=0.2),
    "varying": ExperimentConfig(dimension=1, operator="varying", symbol=("exp",), direction=((1.0,),),
                                varying_rule="harmonic", targets=("z^2",), epsilon=0.2),
}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _table(columns: Sequence[str], rows: Sequence[dict]) -> str:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(str(r[c]) if isinstance(r[c], int) else format_number(r[c]) for c in columns))
    return "\n".join(lines) + "\n"


def _print_rows(rows: Sequence[dict], out) -> None:
    for r in rows:
        print(f"  step {r['step']}: n={r['n']}"
              f" sampled_src={format_number(r['sampled_src'])}"
              f" sampled_tgt={format_number(r['sampled_tgt'])}"
              f" certified_src={format_number(r['certified_src'])}"
              f" certified_tgt={format_number(r['certified_tgt'])}"
              f" terms_in_h={r['terms_in_h']}", file=out)


def run_tour(cfg: ExperimentConfig, name: str = "tour", out=None) -> int:
    out = out or sys.stdout
    op = cfg.build_operator()
    tour = orbit_tour(op, cfg.build_targets(), cfg.epsilon, cfg.ball, cfg.budget, cfg.margin, cfg.sampler)
    csv_path = _write(cfg.output, f"{name}.csv", csv_text(tour.rows))
    _write(cfg.output, f"{name}_h.txt", tour.dumps())
    print(f"{name}: {len(tour.times)} visit(s) at n = {', '.join(map(str, tour.times))},"
          f" epsilon = {format_number(cfg.epsilon)}", file=out)
    _print_rows(tour.rows, out)
    print(f"  csv: {csv_path}", file=out)
    return EXIT_OK


def run_witness(cfg: ExperimentConfig, name: str = "witness", out=None) -> int:
    out = out or sys.stdout
    op = cfg.build_operator()
    w = transitivity_witness(op, cfg.build_source(), cfg.build_targets()[0], cfg.epsilon, cfg.ball,
                             cfg.budget, cfg.margin, cfg.sampler)
    row = w.row(1)
    csv_path = _write(cfg.output, f"{name}.csv", csv_text([row]))
    _write(cfg.output, f"{name}_z.txt", w.dumps())
    print(f"{name}: n = {w.n}, epsilon = {format_number(cfg.epsilon)}", file=out)
    _print_rows([row], out)
    print(f"  csv: {csv_path}", file=out)
    return EXIT_OK


def run_approx(cfg: ExperimentConfig, name: str = "approx", out=None) -> int:
    out = out or sys.stdout
    op = cfg.build_operator()
    f = cfg.build_targets()[0]
    region = Region.U if cfg.region == "U" else Region.V
    rb = find_region_point(op, region, cfg.budget, cfg.margin, norm_tag=cfg.norm)
    combo = approx_in_region(f, op, region, cfg.epsilon, cfg.ball, cfg.budget, cfg.margin, region_ball=rb)
    sampled = sup_lower(combo.to_exppoly() - f, cfg.ball, cfg.sampler)
    terms = combo.to_exppoly()
    row = {"terms": len(terms), "truncation_error": combo.truncation_error,
           "rounding_error": combo.rounding_error, "certified_error": combo.certified_error,
           "sampled_error": sampled}
    csv_path = _write(cfg.output, f"{name}.csv", _table(APPROX_COLUMNS, [row]))
    terms_path = _write(cfg.output, f"{name}_terms.txt", dumps(terms))
    print(f"{name}: {len(terms)} exponential(s) from region {cfg.region}", file=out)
    print("  " + " ".join(f"{c}={format_number(row[c]) if c != 'terms' else row[c]}"
                          for c in APPROX_COLUMNS), file=out)
    print(f"  csv: {csv_path}", file=out)
    print(f"  terms: {terms_path}", file=out)
    return EXIT_OK


def run_report(cfg: ExperimentConfig, name: str = "report", out=None) -> int:
    out = out or sys.stdout
    op = cfg.build_operator()
    rep = criterion_report(op, cfg.ball, cfg.sampler, cfg.n_max, cfg.margin, cfg.budget)
    rows = [{"n": t[0], "sampled_T": t[1], "certified_T": t[2], "sampled_S": s[1], "certified_S": s[2]}
            for t, s in zip(rep.decay_T, rep.decay_S)]
    csv_path = _write(cfg.output, f"{name}.csv", _table(REPORT_COLUMNS, rows))
    print(f"{name}: |g(phi)| = {format_number(abs(rep.g_phi))}, |g(psi)| = {format_number(abs(rep.g_psi))},"
          f" identity defect = {format_number(rep.identity_defect)}", file=out)
    last = rows[-1]
    print("  " + " ".join(f"{c}={last[c] if c == 'n' else format_number(last[c])}" for c in REPORT_COLUMNS),
          file=out)
    print(f"  csv: {csv_path}", file=out)
    return EXIT_OK


COMMANDS = {"witness": run_witness, "tour": run_tour, "approx": run_approx, "report": run_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--epsilon", type=float)
    common.add_argument("--radius", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--out", help="output directory")
    parser = argparse.ArgumentParser(prog="hcyclic", description="Constructive hypercyclicity experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    demo = sub.add_parser("demo", parents=[common], help="run a canned experiment")
    demo.add_argument("name", choices=sorted(DEMOS))
    for cmd in COMMANDS:
        sub.add_parser(cmd, parents=[common])
    return parser


def _overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    for key in ("epsilon", "radius", "budget"):
        v = getattr(args, key)
        if v is not None:
            if not v > 0:
                raise ConfigError(f"--{key} must be positive", source="<flags>")
            changes[key] = v
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output"] = args.out
    return replace(cfg, **changes)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "demo":
            cfg = replace(DEMOS[args.name], output=os.path.join("results", args.name))
        else:
            cfg = ExperimentConfig()
        if args.config is not None:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(str(exc), source=args.config) from None
            cfg = parse_config(text, args.config, cfg, os.path.dirname(os.path.abspath(args.config)))
        elif args.command != "demo":
            raise ConfigError("--config is required", source="<flags>")
        cfg = _overrides(cfg, args)
        if args.command == "demo":
            return run_tour(cfg, args.name)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RegionSearchError, RegionError) as exc:
        print(f"region search failed: {exc}", file=sys.stderr)
        return EXIT_REGION
    except ToleranceError as exc:
        print(f"tolerance not reached: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
