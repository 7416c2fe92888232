"""Command-line front end: ``straintail {approx,simulate,compare,locate,kernel-info} --config FILE``.

The config is flat ``key = value`` text with dotted keys; ``#`` starts a
comment.  Exit codes: 0 success, 2 config error, 3 assumption violation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .asymptotics import LevelEquationError, SearchEdgeError, approximate_tail
from .kernel import SQUARED_EXPONENTIAL, KernelError, check_assumptions, spectral_moments, squared_exponential
from .rare_event import (DIRECT, TILTED, compare, location_histogram, mc_direct, mc_tilted,
                         rows_to_csv)
from .sampler import IllConditionedGrid, sample_path
from .solver import (AssumptionError, ProblemSpec, constant_forcing, cosine_bump, gaussian_bump,
                     solve_fd_oracle, strain_closed_form, uniform_grid, validate_forcing)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_NUMERICAL = 4

FORCING_FAMILIES = ("constant", "gaussian-bump", "cosine-bump")

_FLOAT_KEYS = {
    "L", "sigma", "kernel.length_scale", "forcing.p0", "forcing.base", "forcing.amplitude",
    "forcing.center", "forcing.width", "x_star", "b", "zeta", "rho",
}
_INT_KEYS = {"n", "grid_n", "seed", "bins", "dump_count"}
_BOOL_KEYS = {"homo_literal_theorem"}
_STR_KEYS = {"kernel.family", "forcing.kind", "forcing.family", "method", "dump_paths"}
_LIST_KEYS = {"b_list"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS | _LIST_KEYS

_POSITIVE = {"L", "kernel.length_scale", "forcing.width", "b", "n", "grid_n", "rho", "bins", "dump_count"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    values: dict
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        return self.values[key]

    def where(self, key) -> str:
        line = self.lines.get(key)
        return f"{self.source}:{line}" if line else self.source


def _parse_value(key: str, raw: str):
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _INT_KEYS:
        return int(raw)
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if key in _LIST_KEYS:
        return [float(t) for t in raw.replace(";", ",").split(",") if t.strip()]
    return raw


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values, lines = {}, {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {body!r}")
        key, raw = (t.strip() for t in body.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{no}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            val = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"{source}:{no}: bad value for {key!r}: {exc}") from None
        if key in _POSITIVE and not val > 0:
            raise ConfigError(f"{source}:{no}: {key} must be positive, got {raw}")
        if key == "sigma" and not val >= 0:
            raise ConfigError(f"{source}:{no}: sigma must be nonnegative, got {raw}")
        values[key], lines[key] = val, no
    return RunConfig(values, lines, source)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(p))


def build_spec(cfg: RunConfig) -> ProblemSpec:
    family = cfg.get("kernel.family", SQUARED_EXPONENTIAL)
    if family != SQUARED_EXPONENTIAL:
        raise ConfigError(
            f"{cfg.where('kernel.family')}: kernel.family={family!r} is not available from a config; "
            f"custom kernels need the Python API"
        )
    kernel = squared_exponential(cfg.require("kernel.length_scale"))
    L = cfg.require("L")
    sigma = cfg.require("sigma")

    kind = cfg.require("forcing.kind")
    fam = cfg.get("forcing.family")
    if kind == "analytic":
        if fam is None:
            raise ConfigError(f"{cfg.where('forcing.kind')}: forcing.kind=analytic needs forcing.family")
    elif kind in FORCING_FAMILIES:
        if fam is not None and fam != kind:
            raise ConfigError(f"{cfg.where('forcing.family')}: forcing.family={fam!r} contradicts forcing.kind={kind!r}")
        fam = kind
    else:
        raise ConfigError(f"{cfg.where('forcing.kind')}: forcing.kind must be constant or analytic, got {kind!r}")

    if fam == "constant":
        if "x_star" in cfg.values:
            raise ConfigError(f"{cfg.where('x_star')}: constant forcing forbids x_star")
        forcing = constant_forcing(cfg.require("forcing.p0"))
    elif fam in ("gaussian-bump", "cosine-bump"):
        base = cfg.get("forcing.base", 0.0)
        amp = cfg.require("forcing.amplitude")
        center = cfg.require("forcing.center")
        if fam == "gaussian-bump":
            forcing = gaussian_bump(base, amp, center, cfg.require("forcing.width"))
        else:
            forcing = cosine_bump(base, amp, center, L)
        xs = cfg.get("x_star")
        if xs is not None and abs(xs - center) > 1e-12 * max(1.0, abs(center)):
            raise ConfigError(f"{cfg.where('x_star')}: x_star={xs} differs from forcing.center={center}")
    else:
        raise ConfigError(f"{cfg.where('forcing.family')}: unknown forcing family {fam!r}")

    spec = ProblemSpec(L, sigma, kernel, forcing)
    validate_forcing(spec)
    return spec


# ---------------------------------------------------------------------------
# output


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _csv_row(d: dict) -> str:
    keys = list(d)
    vals = [repr(v) if isinstance(v, float) else str(v) for v in d.values()]
    return ",".join(keys) + "\n" + ",".join(vals) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_approx(cfg: RunConfig, fmt: str) -> str:
    spec = build_spec(cfg)
    rep = approximate_tail(cfg.require("b"), spec, homo_literal_theorem=cfg.get("homo_literal_theorem", False))
    d = rep.to_dict()
    if fmt == "csv":
        return _csv_row({k: d[k] for k in ("b", "case", "u", "u0", "uL", "term_interior", "term_left",
                                           "term_right", "total", "dominant")})
    return dumps(d)


def _dump_paths(cfg: RunConfig, spec: ProblemSpec) -> None:
    target = cfg.get("dump_paths")
    if target is None:
        return
    outdir = Path(target)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = uniform_grid(spec.L, cfg.require("grid_n"))
    seed = cfg.require("seed")
    for k in range(cfg.get("dump_count", 1)):
        sub = int(np.random.SeedSequence(seed, spawn_key=(20_000 + k,)).generate_state(1)[0])
        path = sample_path(spec.kernel, grid, sub)
        path.to_csv(outdir / f"path_{k}.csv")
        x, v, _ = solve_fd_oracle(spec, path)
        _, vp = strain_closed_form(spec, path)
        np.savetxt(outdir / f"solution_{k}.csv", np.column_stack([x, v, vp]), delimiter=",",
                   header="x,v,v_prime", comments="", fmt="%.17g")


def _method(cfg: RunConfig) -> str:
    m = cfg.get("method", TILTED)
    if m not in (DIRECT, TILTED):
        raise ConfigError(f"{cfg.where('method')}: method must be {DIRECT!r} or {TILTED!r}, got {m!r}")
    return m


def cmd_simulate(cfg: RunConfig, fmt: str) -> str:
    spec = build_spec(cfg)
    b, n, grid_n, seed = cfg.require("b"), cfg.require("n"), cfg.require("grid_n"), cfg.require("seed")
    if _method(cfg) == DIRECT:
        est = mc_direct(spec, b, n, grid_n, seed)
    else:
        est = mc_tilted(spec, b, n, grid_n, seed, cfg.get("zeta"))
    _dump_paths(cfg, spec)
    d = est.to_dict()
    d["rel_stderr"] = est.rel_stderr
    return _csv_row(d) if fmt == "csv" else dumps(d)


def cmd_compare(cfg: RunConfig, fmt: str) -> str:
    spec = build_spec(cfg)
    b_list = cfg.require("b_list")
    if any(y <= x for x, y in zip(b_list, b_list[1:])):
        raise ConfigError(f"{cfg.where('b_list')}: b_list must be strictly increasing")
    if any(not x > 0 for x in b_list):
        raise ConfigError(f"{cfg.where('b_list')}: thresholds must be positive")
    rows = compare(spec, b_list, cfg.require("n"), cfg.require("grid_n"), cfg.require("seed"),
                   method=_method(cfg), homo_literal_theorem=cfg.get("homo_literal_theorem", False))
    return dumps(rows) if fmt == "json" else rows_to_csv(rows)


def cmd_locate(cfg: RunConfig, fmt: str, out: Optional[str]) -> str:
    spec = build_spec(cfg)
    hist = location_histogram(spec, cfg.require("b"), cfg.require("n"), cfg.require("grid_n"),
                              cfg.require("seed"), rho=cfg.get("rho"), bins=cfg.get("bins", 20),
                              method=_method(cfg))
    if fmt == "csv":
        summary = dumps(hist.summary())
        if out is None:
            sys.stderr.write(summary)
        else:
            Path(out).with_suffix(".json").write_text(summary)
        return hist.to_csv()
    return dumps(hist.summary())


def cmd_kernel_info(cfg: RunConfig, fmt: str) -> str:
    family = cfg.get("kernel.family", SQUARED_EXPONENTIAL)
    if family != SQUARED_EXPONENTIAL:
        raise ConfigError(f"{cfg.where('kernel.family')}: unsupported kernel.family {family!r}")
    kern = squared_exponential(cfg.require("kernel.length_scale"))
    grid = uniform_grid(cfg.get("L", 1.0), cfg.get("grid_n", 512))
    rep = check_assumptions(kern, grid)
    d, a, bb = spectral_moments(kern)
    payload = {"family": kern.family, "length_scale": kern.length_scale, "Delta": d, "A": a, "B": bb,
               "assumptions": rep.as_dict()}
    if fmt == "csv":
        return _csv_row({"family": kern.family, "length_scale": kern.length_scale, "Delta": d, "A": a, "B": bb,
                         "all_passed": rep.all_passed})
    return dumps(payload)


COMMANDS = ("approx", "simulate", "compare", "locate", "kernel-info")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="straintail", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="key = value config file")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        default = "csv" if name in ("compare", "locate") else "json"
        sp.add_argument("--format", choices=("json", "csv"), default=default)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "approx":
            text = cmd_approx(cfg, args.format)
        elif args.command == "simulate":
            text = cmd_simulate(cfg, args.format)
        elif args.command == "compare":
            text = cmd_compare(cfg, args.format)
        elif args.command == "locate":
            text = cmd_locate(cfg, args.format, args.out)
        else:
            text = cmd_kernel_info(cfg, args.format)
        _emit(text, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssumptionError, KernelError) as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (LevelEquationError, SearchEdgeError, IllConditionedGrid, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
