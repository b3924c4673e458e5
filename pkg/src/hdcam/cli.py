"""``hdcam`` command line: experiment sweeps, k-mer databases, classification.

Exit codes: 0 success, 2 config error, 3 I/O error, 4 network error,
5 data-format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import dbfile
from .config import ConfigError, ExperimentConfig, load_config
from .genomics import (ENCODINGS, IDEAL, AnalogMatcher, FastaError, Genome, LabeledSample,
                       SequenceError, build_db, evaluate, format_fasta,
                       parse_fasta, simulate_reads)
from .matchline import PUBLISHED_MT_TABLE, ModelError, calibrate, energy_per_bit, nominal_mt
from .variation import (ConfusionCounts, corner_params, match_probability_curve, sens_spec_vs_hd,
                        UnboundedRegionError, uncertainty_region)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NETWORK = 4
EXIT_FORMAT = 5

NCBI_EUTILS = "https://eutils.ncbi.nlm.nih.gov/entrez/eutils"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class NetworkError(CliError):
    def __init__(self, message: str):
        super().__init__(message, EXIT_NETWORK)


class DataFormatError(CliError):
    def __init__(self, message: str):
        super().__init__(message, EXIT_FORMAT)


# --- output ---------------------------------------------------------------

def _cell(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render(columns: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str, meta: dict | None = None) -> str:
    if fmt == "json":
        doc: dict[str, Any] = dict(meta or {})
        doc["rows"] = [dict(zip(columns, (_jsonable(v) for v in r))) for r in rows]
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _jsonable(v: Any) -> Any:
    if isinstance(v, np.generic):
        return v.item()
    return v


def emit(text: str, out: str) -> None:
    if not out or out == "-":
        sys.stdout.write(text)
        return
    try:
        dbfile.atomic_write(Path(out), text.encode("utf-8"))
    except OSError as e:
        raise CliError(f"cannot write {out}: {e.strerror}", EXIT_IO) from None


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}", EXIT_IO) from None


def _read_fasta(path: str) -> list[Genome]:
    try:
        return parse_fasta(_read_bytes(path))
    except FastaError as e:
        raise DataFormatError(f"{path}: {e}") from None


# --- subcommands ------------------------------------------------------------

def cmd_calibrate(cfg: ExperimentConfig, args) -> str:
    if args.table:
        points = _read_mt_table(args.table)
    else:
        points = list(PUBLISHED_MT_TABLE)
    skeleton = cfg.matchline_params()
    try:
        result = calibrate(points, skeleton)
    except ModelError as e:
        raise DataFormatError(f"calibration failed: {e}") from None
    fitted = skeleton.replace(law=result.law)
    tau_ns = result.law.tau_ref * 1e9
    rows = []
    for (x, mt), model, res in zip(result.points, result.model_mt, result.residuals):
        mt_int = nominal_mt(fitted.with_threshold_fraction(x))
        rows.append((x, mt, model, mt_int, res, tau_ns, result.law.beta))
    cols = ("v_evalth_frac", "target_mt", "model_mt", "nominal_mt", "rel_residual", "tau_ref_ns", "beta")
    meta = {"tau_ref_ns": tau_ns, "beta": result.law.beta, "max_abs_residual": result.max_abs_residual}
    return render(cols, rows, cfg.format, meta)


def _read_mt_table(path: str) -> list[tuple[float, float]]:
    text = _read_bytes(path).decode("utf-8", errors="replace")
    points = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise DataFormatError(f"{path}:{lineno}: expected 'v_evalth_frac,mt'")
        try:
            points.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if not seen_header and not points:
                seen_header = True
                continue
            raise DataFormatError(f"{path}:{lineno}: not numeric: {line!r}") from None
    return points


def cmd_sweep(cfg: ExperimentConfig, args) -> str:
    params = cfg.matchline_params()
    spec = cfg.variation_spec()
    mt = nominal_mt(corner_params(params, spec.corner))
    curve = match_probability_curve(params, spec, cfg.d_range(), threads=cfg.threads)
    try:
        region = uncertainty_region(curve)
        k_bound, l_bound = region.k_bound, region.l_bound
    except UnboundedRegionError:
        k_bound = l_bound = None
    rows = [(m.d, m.match_probability, m.label, m.value, mt, k_bound, l_bound)
            for m in sens_spec_vs_hd(curve, mt)]
    cols = ("d", "match_probability", "label", "metric", "mt", "k_bound", "l_bound")
    meta = {"mt": mt, "k_bound": k_bound, "l_bound": l_bound, "trials": spec.trials, "seed": spec.seed}
    return render(cols, rows, cfg.format, meta)


def cmd_wordsize(cfg: ExperimentConfig, args) -> str:
    try:
        widths = [int(w) for w in args.widths.split(",") if w.strip()]
    except ValueError:
        raise ConfigError(f"--widths must be a comma-separated integer list, got {args.widths!r}") from None
    if not widths:
        raise ConfigError("--widths is empty")
    base = cfg.matchline_params()
    rows = []
    for w in widths:
        try:
            p = base.replace(word_bits=w)
        except ModelError as e:
            raise ConfigError(str(e)) from None
        rows.append((w, p.v_eval, p.v_evalth, p.t_eval * 1e9, nominal_mt(corner_params(p, cfg.variation_spec().corner))))
    cols = ("word_bits", "v_eval", "v_evalth", "t_eval_ns", "nominal_mt")
    return render(cols, rows, cfg.format)


def cmd_energy(cfg: ExperimentConfig, args) -> str:
    v_eval = cfg.v_dd if args.exact else cfg.v_eval
    try:
        bits = [int(b) for b in args.bits.split(",") if b.strip()]
    except ValueError:
        raise ConfigError(f"--bits must be a comma-separated integer list, got {args.bits!r}") from None
    label = "exact" if args.exact else cfg.v_eval
    rows = []
    for b in bits:
        try:
            rows.append((label, b, energy_per_bit(v_eval, b, v_dd=cfg.v_dd, word_bits=cfg.word_bits)))
        except ModelError as e:
            raise ConfigError(str(e)) from None
    return render(("v_eval", "mismatching_bits", "fj_per_bit"), rows, cfg.format)


def _pick_record(genomes: list[Genome], record: str | None, path: str) -> Genome:
    if record is None:
        return genomes[0]
    for g in genomes:
        if g.accession == record:
            return g
    raise DataFormatError(f"{path}: no record named {record!r}")


def cmd_build_db(cfg: ExperimentConfig, args) -> str | None:
    genome = _pick_record(_read_fasta(args.fasta), args.record, args.fasta)
    try:
        db = build_db(genome, cfg.k, ENCODINGS[cfg.encoding], cfg.dedup)
    except (SequenceError, ValueError) as e:
        raise DataFormatError(str(e)) from None
    if not cfg.out:
        raise ConfigError("build-db needs --out")
    try:
        dbfile.write_db(db, cfg.out)
    except OSError as e:
        raise CliError(f"cannot write {cfg.out}: {e.strerror}", EXIT_IO) from None
    print(f"wrote {db.row_count} rows x {db.width} bits to {cfg.out}", file=sys.stderr)
    return None


def cmd_simulate_reads(cfg: ExperimentConfig, args) -> str:
    genome = _pick_record(_read_fasta(args.fasta), args.record, args.fasta)
    try:
        reads = simulate_reads(genome, cfg.reads, cfg.k, cfg.read_profile(), cfg.seed)
    except ValueError as e:
        raise DataFormatError(str(e)) from None
    records = [(f"read{i} src={genome.accession} pos={r.position} sub={r.substitutions} "
                f"ins={r.insertions} del={r.deletions}", r.sequence) for i, r in enumerate(reads)]
    return format_fasta(records)


def _load_db(path: str):
    try:
        return dbfile.loads(_read_bytes(path))
    except dbfile.DbFormatError as e:
        raise DataFormatError(f"{path}: {e}") from None


def cmd_classify(cfg: ExperimentConfig, args) -> str:
    db = _load_db(args.db)
    samples = []
    for label, paths in ((True, args.positive or []), (False, args.negative or [])):
        for path in paths:
            reads = tuple(g.sequence for g in _read_fasta(path))
            samples.append(LabeledSample(Path(path).name, reads, label))
    if not samples:
        raise ConfigError("classify needs at least one --positive or --negative read file")
    thresholds = sorted(set(cfg.thresholds))
    if cfg.matcher == "analog":
        params = cfg.matchline_params().replace(word_bits=db.width)
        matcher = AnalogMatcher(params, cfg.variation_spec())
    else:
        matcher = IDEAL
    try:
        report = evaluate(samples, db, thresholds, matcher, threads=cfg.threads)
        baseline = evaluate(samples, db, [0], IDEAL).results[0]
    except (SequenceError, ValueError) as e:
        raise DataFormatError(str(e)) from None
    rows = [(0, "exact_baseline", *_count_row(baseline.counts), baseline.sensitivity, baseline.specificity)]
    for r in report.results:
        rows.append((r.threshold_bp, f"hdcam_{report.matcher}", *_count_row(r.counts), r.sensitivity, r.specificity))
    cols = ("threshold_bp", "method", "tp", "fn", "tn", "fp", "sensitivity", "specificity")
    meta = {"read_count": report.read_count, "samples": list(report.samples), "db_rows": db.row_count}
    return render(cols, rows, cfg.format, meta)


def _count_row(c: ConfusionCounts) -> tuple[int, int, int, int]:
    return c.tp, c.fn, c.tn, c.fp


def fetch_fasta(accession: str, base_url: str, timeout: float = 30.0) -> bytes:
    query = urllib.parse.urlencode({"db": "nuccore", "id": accession, "rettype": "fasta", "retmode": "text"})
    url = f"{base_url.rstrip('/')}/efetch.fcgi?{query}"
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            body = resp.read()
    except urllib.error.HTTPError as e:
        raise NetworkError(f"HTTP {e.code} from {url}") from None
    except (urllib.error.URLError, OSError) as e:
        raise NetworkError(f"request to {url} failed: {getattr(e, 'reason', e)}") from None
    if not body.strip():
        raise DataFormatError(f"empty response body for {accession}")
    if not body.lstrip().startswith(b">"):
        raise DataFormatError(f"response for {accession} is not FASTA (does not start with '>')")
    return body


def cmd_fetch(cfg: ExperimentConfig, args) -> None:
    base = args.base_url or os.environ.get("HDCAM_BASE_URL") or NCBI_EUTILS
    out = cfg.out or f"{args.accession}.fasta"
    attempts = 1 + max(0, args.retries)
    for attempt in range(attempts):
        if args.delay and attempt:
            time.sleep(args.delay)
        try:
            body = fetch_fasta(args.accession, base)
            break
        except NetworkError:
            if attempt == attempts - 1:
                raise
    try:
        parse_fasta(body)
    except FastaError as e:
        raise DataFormatError(f"response for {args.accession} does not parse: {e}") from None
    try:
        dbfile.atomic_write(Path(out), body)
    except OSError as e:
        raise CliError(f"cannot write {out}: {e.strerror}", EXIT_IO) from None
    print(f"wrote {args.accession} to {out}", file=sys.stderr)


# --- argument parsing -------------------------------------------------------

_SWEEP_HELP = """\
CSV columns:
  d                  Hamming distance between query and stored word (bits)
  match_probability  fraction of Monte-Carlo trials that read as Match
  label              sensitivity for d <= mt, specificity above
  metric             the labeled metric (p or 1 - p)
  mt                 nominal mismatch threshold of the configured corner
  k_bound, l_bound   uncertainty region bounds; empty when unbounded
"""


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment configuration (flag > --config file > default)")
    g.add_argument("--config", help="flat key = value config file")
    skip = {"seed", "out", "format", "threads"}
    for f in fields(ExperimentConfig):
        if f.name in skip:
            continue
        g.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="VALUE",
                       help=f"default: {_cell(f.default) if not isinstance(f.default, tuple) else ','.join(map(str, f.default))}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdcam", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit the discharge law to an MT-vs-threshold table")
    p.add_argument("--table", help="CSV of v_evalth_frac,mt (default: built-in published table)")
    _add_config_flags(p)

    p = sub.add_parser("sweep", help="Monte-Carlo match probability vs Hamming distance",
                       epilog=_SWEEP_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_config_flags(p)

    p = sub.add_parser("wordsize", help="nominal mismatch threshold per word width")
    p.add_argument("--widths", default="128,256,512")
    _add_config_flags(p)

    p = sub.add_parser("energy", help="energy per bit per search from the characterized table")
    p.add_argument("--exact", action="store_true", help="exact-match mode (v_eval = v_dd)")
    p.add_argument("--bits", default="1,16,32,64,96,128")
    _add_config_flags(p)

    p = sub.add_parser("build-db", help="build a k-mer database file from a FASTA reference")
    p.add_argument("fasta")
    p.add_argument("--record", help="accession to use (default: first record)")
    _add_config_flags(p)

    p = sub.add_parser("simulate-reads", help="sample error-injected reads from a FASTA reference")
    p.add_argument("fasta")
    p.add_argument("--record", help="accession to use (default: first record)")
    _add_config_flags(p)

    p = sub.add_parser("classify", help="per-threshold sensitivity/specificity of read sets")
    p.add_argument("--db", required=True)
    p.add_argument("--positive", action="append", help="FASTA of reads expected to classify positive")
    p.add_argument("--negative", action="append", help="FASTA of reads expected to classify negative")
    _add_config_flags(p)

    p = sub.add_parser("fetch", help="download a nucleotide FASTA from NCBI E-utilities")
    p.add_argument("accession")
    p.add_argument("--base-url", default=None, help="E-utilities base URL (env HDCAM_BASE_URL)")
    p.add_argument("--retries", type=int, default=0)
    p.add_argument("--delay", type=float, default=0.0, help="courtesy delay between attempts (s)")
    _add_config_flags(p)
    return parser


_COMMANDS = {
    "calibrate": cmd_calibrate,
    "sweep": cmd_sweep,
    "wordsize": cmd_wordsize,
    "energy": cmd_energy,
    "build-db": cmd_build_db,
    "simulate-reads": cmd_simulate_reads,
    "classify": cmd_classify,
    "fetch": cmd_fetch,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {f.name: getattr(args, f.name, None) for f in fields(ExperimentConfig)}
    try:
        cfg = load_config(args.config, overrides)
        text = _COMMANDS[args.command](cfg, args)
        if text is not None:
            emit(text, cfg.out)
    except ConfigError as e:
        print(f"hdcam: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CliError as e:
        print(f"hdcam: {e}", file=sys.stderr)
        return e.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
