"""Command-line entry point: ``count-exact``, ``compare`` and ``sweep``.

Options come from an optional flat ``key = value`` config file (lists as
``a, b, c`` or ``[a, b, c]``); command-line flags override it. Data goes to
``--out`` or stdout; progress and errors go to stderr.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .graph import GraphFormatError
from .harness import (
    ConfigError,
    ExperimentConfig,
    SafetyCapExceeded,
    cmd_compare,
    cmd_count_exact,
    cmd_sweep,
)
from .protocol import EDGE, KSTARS

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CAP = 0, 1, 2, 3

log = logging.getLogger("pqldp")


def _split(value: str) -> list[str]:
    value = value.strip()
    if value.startswith("[") and value.endswith("]"):
        value = value[1:-1]
    return [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]


def _pairs(value: str) -> list[tuple[int, int]]:
    out = []
    for item in _split(value):
        try:
            p, q = item.split(":")
            out.append((int(p), int(q)))
        except ValueError:
            raise ConfigError(f"bad (p,q) pair {item!r}; expected P:Q")
    return out


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _algorithms(value: str) -> list[str]:
    out = []
    for a in _split(value):
        out.extend([EDGE, KSTARS] if a == "both" else [a])
    return out


def _edge_eps(value: str):
    return "auto" if value.strip() == "auto" else [float(v) for v in _split(value)]


def _n_values(value: str) -> list[int]:
    return [int(v) for v in _split(value)]


# key -> (ExperimentConfig field, parser)
_KEYS = {
    "dataset": ("dataset", str),
    "layers": ("layers", str),
    "lenient": ("lenient", _bool),
    "n": ("n_values", _n_values),
    "pq": ("pq", _pairs),
    "k": ("k", int),
    "epsilon": ("epsilons", lambda v: [float(x) for x in _split(v)]),
    "epsilon_edge": ("epsilon_edge", _edge_eps),
    "rho": ("rhos", lambda v: [float(x) for x in _split(v)]),
    "trials": ("trials", int),
    "seed": ("seed", int),
    "algorithms": ("algorithms", _algorithms),
    "abs_correction": ("abs_correction", _bool),
    "sampling_rescale": ("sampling_rescale", _bool),
    "literal_rr": ("literal_rr", _bool),
    "correction": ("correction", str),
    "alpha": ("alpha", float),
    "out": ("out", str),
    "summary": ("summary", str),
    "max_runs": ("max_runs", int),
}


def read_config(path: str | Path) -> dict:
    """Parse a flat config file into raw ``{key: string}`` pairs."""
    raw = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS and key not in ("p", "q"):
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


def build_config(raw: dict) -> ExperimentConfig:
    """Turn raw string options into a validated-type :class:`ExperimentConfig`."""
    values = {}
    raw = dict(raw)
    p, q = raw.pop("p", None), raw.pop("q", None)
    if (p is not None or q is not None) and "pq" not in raw:
        raw["pq"] = f"{p or 2}:{q or 2}"
    for key, value in raw.items():
        name, parse = _KEYS[key]
        try:
            values[name] = parse(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})")
    known = {f.name for f in fields(ExperimentConfig)}
    assert set(values) <= known
    return ExperimentConfig(**values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqldp", description="Private (p,q)-clique counting experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--dataset", help="edge list path, random:NU:NL:PROB:SEED or complete:A:B")
    common.add_argument("--layers", help="first-column, random[:SEED] or a layer-map file")
    common.add_argument("--lenient", action="store_const", const="true", help="drop malformed edges instead of failing")
    common.add_argument("--n", help="node counts to sample, comma separated (empty for none)")
    common.add_argument("--p", help="upper-side clique size")
    common.add_argument("--q", help="lower-side clique size")
    common.add_argument("--pq", help="list of P:Q pairs; overrides --p/--q")
    common.add_argument("--k", help="star order (must equal q)")
    common.add_argument("--epsilon", help="privacy budgets, comma separated")
    common.add_argument("--epsilon-edge", dest="epsilon_edge", help="edge budgets per epsilon, or 'auto' for the k-star equivalent")
    common.add_argument("--rho", help="k-star sampling ratios")
    common.add_argument("--trials")
    common.add_argument("--seed")
    common.add_argument("--algorithms", help="edge, kstars or both")
    common.add_argument("--correction", help="exact (default) or first_order")
    common.add_argument("--alpha", help="relative-error floor")
    common.add_argument("--abs-correction", dest="abs_correction", action="store_const", const="true")
    common.add_argument("--no-rescale", dest="sampling_rescale", action="store_const", const="false")
    common.add_argument("--literal-rr", dest="literal_rr", action="store_const", const="true")
    common.add_argument("--max-runs", dest="max_runs", help="safety cap on total protocol runs")
    common.add_argument("--out", help="output CSV (default stdout)")
    common.add_argument("--summary", help="compare only: summary CSV (default stderr)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("count-exact", parents=[common], help="exact clique statistics per sampled n")
    sub.add_parser("compare", parents=[common], help="edge vs k-stars estimates plus summary")
    sub.add_parser("sweep", parents=[common], help="Cartesian sweep over all axes")
    return parser


def _write(text: str, path: str | None, stream) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        stream.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        raw = read_config(args.config) if args.config else {}
        if (args.p is not None or args.q is not None) and args.pq is None:
            raw.pop("pq", None)
        for key in list(_KEYS) + ["p", "q"]:
            value = getattr(args, key, None)
            if value is not None:
                raw[key] = value
        if args.command != "count-exact" and "algorithms" not in raw:
            raw["algorithms"] = "both"
        cfg = build_config(raw)
        if args.command == "count-exact":
            _write(cmd_count_exact(cfg), cfg.out, sys.stdout)
        elif args.command == "compare":
            rows, summary = cmd_compare(cfg)
            _write(rows, cfg.out, sys.stdout)
            _write(summary, cfg.summary, sys.stderr)
        else:
            _write(cmd_sweep(cfg), cfg.out, sys.stdout)
    except SafetyCapExceeded as exc:
        log.error("%s", exc)
        return EXIT_CAP
    except GraphFormatError as exc:
        log.error("input error: %s", exc)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
