"""Command-line front end: ``infoflow analyze | synth | shuffle-test``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
degeneracy affecting more than half of the pairs in some cell.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from infoflow import __version__
from infoflow._backend import BACKEND
from infoflow.entropy import efficiency_rank
from infoflow.errors import ConfigError, DataError, DegenerateDesignError, InfoflowError
from infoflow.flow import CLASS_ORDER, analyze_market, fr_curves
from infoflow.market_data import ReturnPanel, load_prices, log_returns, shuffle_panel
from infoflow.synth import SynthSpec, gen_var

logger = logging.getLogger("infoflow")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4
FORMATS = ("json", "csv")


@dataclass
class RunConfig:
    input: str | None = None
    spec: str | None = None
    scales: tuple[int, ...] = (1, 2, 3, 4, 5)
    lags: tuple[int, ...] = (1, 2, 3, 4, 5)
    alpha: float = 0.05
    shuffle: bool = False
    seed: int = 0
    apen_m: int = 2
    apen_r: float = 0.2
    out: str = "infoflow-out"
    format: tuple[str, ...] = ("json", "csv")
    threads: int | None = None
    drop_incomplete: bool = False

    def validate(self) -> None:
        if not self.scales or any(k < 1 for k in self.scales):
            raise ConfigError("scales must be a non-empty set of integers >= 1")
        if not self.lags or any(l < 1 for l in self.lags):
            raise ConfigError("lags must be a non-empty set of integers >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.apen_m < 1:
            raise ConfigError("apen-m must be >= 1")
        if not self.apen_r > 0:
            raise ConfigError("apen-r must be positive")
        if not self.format or any(f not in FORMATS for f in self.format):
            raise ConfigError(f"format must be drawn from {FORMATS}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def manifest_config(self) -> dict:
        """Settings that determine results (output location and threads do not)."""
        d = dataclasses.asdict(self)
        for key in ("out", "format", "threads"):
            d.pop(key)
        d["scales"] = list(self.scales)
        d["lags"] = list(self.lags)
        return d


def parse_int_set(text: str) -> tuple[int, ...]:
    """``"1:5"`` (inclusive range) or ``"1,3,5"``."""
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            values = tuple(range(lo, hi + 1))
        else:
            values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse integer set {text!r}") from None
    if not values:
        raise ConfigError(f"empty integer set {text!r}")
    return values


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse boolean {text!r}")


_CONVERTERS = {
    "input": str,
    "spec": str,
    "scales": parse_int_set,
    "lags": parse_int_set,
    "alpha": float,
    "shuffle": _parse_bool,
    "seed": int,
    "apen_m": int,
    "apen_r": float,
    "out": str,
    "format": lambda v: tuple(s.strip() for s in (v if isinstance(v, list) else str(v).split(",")) if s.strip()),
    "threads": int,
    "drop_incomplete": _parse_bool,
}


def read_config_file(path: str | Path) -> dict:
    """``key = value`` lines (``#`` comments) or a JSON object."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        items = raw.items()
    else:
        items = []
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, value = line.split("=", 1)
            items.append((key.strip(), value.strip()))
    out = {}
    for key, value in items:
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}: unknown key {key!r}")
        if value is None:
            continue
        if isinstance(value, list) and key in ("scales", "lags"):
            value = ",".join(str(v) for v in value)
        try:
            out[key] = _CONVERTERS[key](value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: bad value for {key}: {exc}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infoflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        # None means "not given" so config-file values can fill in
        p.add_argument("--config", help="key=value or JSON config file; flags win")
        p.add_argument("--scales", type=parse_int_set, help="time scales k, e.g. 1:5 or 1,3,5")
        p.add_argument("--lags", type=parse_int_set, help="lag lengths l, e.g. 1:5")
        p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
        p.add_argument("--shuffle", action="store_true", default=None,
                       help="analyse column-shuffled surrogates")
        p.add_argument("--seed", type=int, help="master seed for shuffling (default 0)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", type=_CONVERTERS["format"], help="json,csv")
        p.add_argument("--threads", type=int, help="worker threads (default: all cores)")
        p.add_argument("--drop-incomplete", action="store_true", default=None,
                       help="drop tickers with missing or non-positive prices")
        p.add_argument("--apen-m", type=int, help="ApEn embedding dimension (default 2)")
        p.add_argument("--apen-r", type=float, help="ApEn tolerance as a fraction of std (default 0.2)")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("analyze", help="analyse a price file")
    p.add_argument("--input", help="wide CSV of daily closing prices")
    common(p)
    p = sub.add_parser("synth", help="generate a synthetic panel and analyse it")
    p.add_argument("--spec", help="JSON synthetic panel spec")
    common(p)
    p = sub.add_parser("shuffle-test", help="analyse original and shuffled data side by side")
    p.add_argument("--input", help="wide CSV of daily closing prices")
    p.add_argument("--spec", help="JSON synthetic panel spec (instead of --input)")
    common(p)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in dataclasses.fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    config = RunConfig(**values)
    if config.threads is None:
        config.threads = os.cpu_count() or 1
    config.validate()
    return config


class StageError(Exception):
    def __init__(self, stage: str, code: int, message: str):
        super().__init__(message)
        self.stage = stage
        self.code = code


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except ConfigError as exc:
        raise StageError(name, EXIT_CONFIG, str(exc)) from exc
    except DegenerateDesignError as exc:
        raise StageError(name, EXIT_DEGENERATE, str(exc)) from exc
    except (DataError, InfoflowError, OSError) as exc:
        raise StageError(name, EXIT_DATA, str(exc)) from exc


def load_spec(path: str) -> SynthSpec:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read synth spec {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("synth spec must be a JSON object")
    return SynthSpec.from_dict(raw)


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _num(v):
    v = float(v)
    return float(format(v, ".17g")) if np.isfinite(v) else None


def run_pipeline(config: RunConfig, panel: ReturnPanel, command: str,
                 provenance: dict) -> dict:
    """Run the sweep on a daily return panel and build every output table."""
    with stage("shuffle"):
        if config.shuffle:
            panel = shuffle_panel(panel, config.seed)
    with stage("apen"):
        scores = efficiency_rank(panel, config.apen_m, config.apen_r, threads=config.threads)
    with stage("granger"):
        matrices = analyze_market(panel, config.scales, config.lags, config.alpha,
                                  threads=config.threads)
        curves = fr_curves(matrices, scores)
    worst = max(c.n_unclassifiable / c.n_pairs for c in curves.cells)
    if worst > 0.5:
        raise StageError("granger", EXIT_DEGENERATE,
                         f"{worst:.0%} of pairs unclassifiable in at least one cell")

    manifest = {
        "tool": "infoflow",
        "version": __version__,
        "backend": BACKEND,
        "command": command,
        "config": config.manifest_config(),
        "provenance": panel.provenance,
        "tickers": list(panel.tickers),
        **provenance,
    }
    canonical = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode()).hexdigest()

    fr_cols = ["k", "l", "fr_mutual", "fr_oneway", "fr_none", "fr_eff_forward",
               "fr_eff_backward", "n_tied", "n_unclassifiable"]
    fr_rows = [[c.k, c.l, c.fr_mutual, c.fr_oneway, c.fr_none, c.fr_eff_forward,
                c.fr_eff_backward, c.n_tied, c.n_unclassifiable] for c in curves.cells]
    pair_rows = []
    for fm in matrices:
        iu, ju = fm.pair_indices()
        for i, j, code, pxy, pyx in zip(iu.tolist(), ju.tolist(), fm.codes.tolist(),
                                        fm.p_xy.tolist(), fm.p_yx.tolist()):
            pair_rows.append([fm.tickers[i], fm.tickers[j], fm.k, fm.l,
                              CLASS_ORDER[code].value, pxy, pyx])
    tables = {
        "fr_curves": (fr_cols, fr_rows),
        "pairs": (["ticker_i", "ticker_j", "k", "l", "class", "p_xy", "p_yx"], pair_rows),
        "apen": (["ticker", "value"], [[t, scores[t].value] for t in panel.tickers]),
    }
    return {"manifest": manifest, "manifest_sha256": digest, "tables": tables,
            "curves": curves, "matrices": matrices}


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".17g")
    text = str(v)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def write_report(report: dict, out_dir: Path, formats, extra_tables=None) -> list[Path]:
    """Write tables and manifest into ``out_dir`` atomically (all or nothing)."""
    tables = dict(report["tables"])
    tables.update(extra_tables or {})
    digest = report["manifest_sha256"]
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".infoflow-", dir=out_dir.parent))
    try:
        for name, (cols, rows) in tables.items():
            if "csv" in formats:
                with open(tmp / f"{name}.csv", "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(f"# manifest_sha256={digest}\n")
                    fh.write(",".join(cols) + "\n")
                    for row in rows:
                        fh.write(",".join(_csv_cell(v) for v in row) + "\n")
            if "json" in formats:
                records = [
                    {c: (_num(v) if isinstance(v, float) else v) for c, v in zip(cols, row)}
                    for row in rows
                ]
                doc = {"manifest_sha256": digest, "columns": cols, "rows": records}
                with open(tmp / f"{name}.json", "w", encoding="utf-8") as fh:
                    json.dump(doc, fh, separators=(",", ":"), allow_nan=False)
                    fh.write("\n")
        with open(tmp / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump({"manifest": report["manifest"], "manifest_sha256": digest},
                      fh, indent=2, sort_keys=True)
            fh.write("\n")
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for f in sorted(tmp.iterdir()):
            target = out_dir / f.name
            os.replace(f, target)
            written.append(target)
        return written
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _panel_from_input(config: RunConfig) -> tuple[ReturnPanel, dict]:
    if not config.input:
        raise ConfigError("--input is required")
    with stage("load"):
        prices = load_prices(config.input, drop_incomplete=config.drop_incomplete)
        panel = log_returns(prices)
    return panel, {"input_sha256": _sha256_file(config.input),
                   "dropped_tickers": list(prices.dropped)}


def _panel_from_spec(config: RunConfig) -> tuple[ReturnPanel, dict, SynthSpec]:
    if not config.spec:
        raise ConfigError("--spec is required")
    spec = load_spec(config.spec)
    with stage("synth"):
        panel = gen_var(spec)
    return panel, {"synth_spec": spec.to_dict()}, spec


def _truth_table(spec: SynthSpec):
    names = spec.ticker_names()
    rows = [[names[c.source], names[c.target], c.lag, float(c.coefficient)] for c in spec.couplings]
    return {"truth": (["source", "target", "lag", "coefficient"], rows)}


def execute(command: str, config: RunConfig) -> list[Path]:
    out = Path(config.out)
    if command == "analyze":
        panel, prov = _panel_from_input(config)
        report = run_pipeline(config, panel, command, prov)
        with stage("write"):
            return write_report(report, out, config.format)
    if command == "synth":
        panel, prov, spec = _panel_from_spec(config)
        report = run_pipeline(config, panel, command, prov)
        with stage("write"):
            return write_report(report, out, config.format, _truth_table(spec))
    if command == "shuffle-test":
        if bool(config.input) == bool(config.spec):
            raise ConfigError("give exactly one of --input or --spec")
        if config.input:
            panel, prov = _panel_from_input(config)
            extra = None
        else:
            panel, prov, spec = _panel_from_spec(config)
            extra = _truth_table(spec)
        reports = {}
        for label, shuffled in (("original", False), ("shuffled", True)):
            cfg = dataclasses.replace(config, shuffle=shuffled)
            reports[label] = run_pipeline(cfg, panel, command, prov)
        written = []
        with stage("write"):
            for label, report in reports.items():
                written += write_report(report, out / label, config.format, extra)
        return written
    raise ConfigError(f"unknown command {command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        try:
            config = resolve_config(args)
        except ConfigError as exc:
            raise StageError("config", EXIT_CONFIG, str(exc)) from exc
        try:
            written = execute(args.command, config)
        except ConfigError as exc:
            raise StageError("config", EXIT_CONFIG, str(exc)) from exc
    except StageError as exc:
        print(f"infoflow: error in stage '{exc.stage}': {exc}", file=sys.stderr)
        return exc.code
    for path in written:
        logger.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
