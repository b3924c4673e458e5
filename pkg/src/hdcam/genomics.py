"""k-mer DNA classification on a Hamming-distance CAM.

Reference genome -> sliding-window k-mers -> one encoded CAM row per unique
k-mer. A read (exactly k bases) is positive when at least one row lies
within the mismatch threshold. Both encodings map every basepair
difference to exactly two bit flips, so a threshold of ``t`` basepairs is a
threshold of ``2 t`` bits.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import rng
from .bitcam import BitWord, CamArray
from .matchline import MatchlineParams, threshold_for_mt
from .variation import (ConfusionCounts, UndefinedMetricError, VariationSpec,
                        guaranteed_mismatch, sensitivity, specificity,
                        trial_outcomes)

BASES = "ACGT"
IUPAC = set("ACGTURYSWKMBDHVN-")
DELETION_SLACK = 8

_TAG_READ = 3
_TAG_POSITION = 4


class FastaError(ValueError):
    pass


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class Genome:
    accession: str
    description: str
    sequence: str

    def __len__(self) -> int:
        return len(self.sequence)


def parse_fasta(data: bytes | str) -> list[Genome]:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FastaError(f"input is not text: {e}") from None
    genomes: list[Genome] = []
    header = None
    header_line = 0
    chunks: list[str] = []

    def flush():
        if header is None:
            return
        seq = "".join(chunks)
        if not seq:
            raise FastaError(f"line {header_line}: record has an empty sequence")
        acc, _, desc = header.partition(" ")
        genomes.append(Genome(acc, desc.strip(), seq))

    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            if not header:
                raise FastaError(f"line {lineno}: empty header")
            header_line = lineno
            chunks = []
            continue
        if header is None:
            raise FastaError(f"line {lineno}: sequence data before any '>' header")
        up = line.upper()
        bad = set(up) - IUPAC
        if bad:
            col = min(up.index(c) for c in bad) + 1
            raise FastaError(f"line {lineno}, column {col}: illegal character {line[col - 1]!r}")
        chunks.append(up)
    flush()
    if not genomes:
        raise FastaError("no FASTA records found")
    return genomes


def format_fasta(records: Iterable[tuple[str, str]], width: int = 70) -> str:
    out = []
    for header, seq in records:
        out.append(f">{header}\n")
        for i in range(0, len(seq), width):
            out.append(seq[i:i + width] + "\n")
    return "".join(out)


@dataclass(frozen=True)
class Encoding:
    kind: str
    bits_per_base: int
    codes: Mapping[str, int]

    def __post_init__(self):
        if set(self.codes) != set(BASES):
            raise ValueError("an encoding must define exactly A, C, G, T")
        if len(set(self.codes.values())) != 4:
            raise ValueError("base codes must be distinct")

    def code_table(self) -> np.ndarray:
        """(4, bits_per_base) bit matrix, rows in ACGT order, LSB first."""
        return np.array([[(self.codes[b] >> i) & 1 for i in range(self.bits_per_base)]
                         for b in BASES], dtype=np.uint8)


ONE_HOT4 = Encoding("OneHot4", 4, {"A": 0b0001, "C": 0b0010, "G": 0b0100, "T": 0b1000})
GRAY3 = Encoding("Gray3", 3, {"A": 0b000, "C": 0b011, "G": 0b110, "T": 0b101})
ENCODINGS = {e.kind: e for e in (ONE_HOT4, GRAY3)}

_BASE_INDEX = np.full(256, 255, dtype=np.uint8)
for _i, _b in enumerate(BASES):
    _BASE_INDEX[ord(_b)] = _i


def base_indices(seq: str) -> np.ndarray:
    """ACGT -> 0..3; anything else -> 255."""
    return _BASE_INDEX[np.frombuffer(seq.encode("ascii"), dtype=np.uint8)]


def _encode_indices(idx: np.ndarray, encoding: Encoding) -> np.ndarray:
    """Pack an (n, k) matrix of base indices into (n, bytes) CAM rows."""
    n, k = idx.shape
    width = k * encoding.bits_per_base
    if width % 8:
        raise SequenceError(f"{k} bases x {encoding.bits_per_base} bits is not a whole number of bytes")
    bits = encoding.code_table()[idx].reshape(n, width)
    return np.packbits(bits, axis=1, bitorder="little")


def encode(bases: str, encoding: Encoding = ONE_HOT4) -> BitWord:
    """Concatenate per-base codes, base 0 in the lowest-order bit group."""
    idx = base_indices(bases.upper())
    if idx.size == 0 or np.any(idx == 255):
        raise SequenceError(f"cannot encode {bases!r}: only A, C, G, T are encodable")
    packed = _encode_indices(idx[None, :], encoding)[0]
    return BitWord(idx.size * encoding.bits_per_base, packed.tobytes())


def decode(word: BitWord, encoding: Encoding = ONE_HOT4) -> str:
    bpb = encoding.bits_per_base
    if word.width % bpb:
        raise SequenceError("word width is not a multiple of the encoding's bits per base")
    bits = word.to_bits().reshape(-1, bpb)
    values = (bits.astype(np.int64) << np.arange(bpb)).sum(axis=1)
    lookup = {v: b for b, v in encoding.codes.items()}
    try:
        return "".join(lookup[int(v)] for v in values)
    except KeyError as e:
        raise SequenceError(f"bit group {e.args[0]:0{bpb}b} is not a valid base code") from None


def extract_kmers(genome: Genome | str, k: int, dedup: bool = True) -> tuple[list[str], list[int]]:
    """Stride-1 windows of length ``k`` and their start offsets.

    Windows touching a non-ACGT character are skipped. With ``dedup`` only
    the first occurrence of each k-mer is kept.
    """
    seq = genome.sequence if isinstance(genome, Genome) else genome.upper()
    if k <= 0:
        raise ValueError("k must be positive")
    if k > len(seq):
        raise ValueError(f"k={k} exceeds sequence length {len(seq)}")
    bad = base_indices(seq) == 255
    # a window is clean when it contains no bad position
    bad_in_window = np.convolve(bad.astype(np.int64), np.ones(k, dtype=np.int64), mode="valid")
    kmers, offsets = [], []
    seen: set[str] = set()
    for off in np.flatnonzero(bad_in_window == 0).tolist():
        kmer = seq[off:off + k]
        if dedup:
            if kmer in seen:
                continue
            seen.add(kmer)
        kmers.append(kmer)
        offsets.append(off)
    return kmers, offsets


@dataclass(frozen=True)
class KmerDb:
    k: int
    encoding: Encoding
    array: CamArray
    source_accession: str = ""
    deduplicated: bool = True
    offset_index: tuple[int, ...] | None = field(default=None, compare=False)

    @property
    def row_count(self) -> int:
        return self.array.row_count

    @property
    def width(self) -> int:
        return self.array.width

    def kmer(self, row: int) -> str:
        return decode(self.array.row(row), self.encoding)


def build_db(genome: Genome, k: int = 64, encoding: Encoding = ONE_HOT4, dedup: bool = True) -> KmerDb:
    kmers, offsets = extract_kmers(genome, k, dedup)
    if not kmers:
        raise SequenceError(f"{genome.accession}: no usable {k}-mers")
    idx = base_indices("".join(kmers)).reshape(len(kmers), k)
    packed = _encode_indices(idx, encoding)
    array = CamArray(k * encoding.bits_per_base, packed)
    return KmerDb(k, encoding, array, genome.accession, dedup, tuple(offsets))


@dataclass(frozen=True)
class ReadErrorProfile:
    sub_rate: float = 0.036
    ins_rate: float = 0.002
    del_rate: float = 0.002

    def __post_init__(self):
        rates = (self.sub_rate, self.ins_rate, self.del_rate)
        if any(not 0 <= r <= 1 for r in rates):
            raise ValueError("error rates must lie in [0, 1]")
        if sum(rates) > 1:
            raise ValueError("error rates must sum to at most 1")


@dataclass(frozen=True)
class SimulatedRead:
    sequence: str
    position: int
    substitutions: int
    insertions: int
    deletions: int


def simulate_read_detailed(genome: Genome | str, pos: int, k: int, profile: ReadErrorProfile,
                           seed: int, read_index: int) -> SimulatedRead:
    """Copy ``k`` bases from ``pos`` with sequencing errors injected.

    Each step draws one uniform to pick an event: deletion (skip a reference
    base), insertion (emit a random base, consume nothing), substitution
    (emit one of the three other bases) or a faithful copy.
    """
    seq = genome.sequence if isinstance(genome, Genome) else genome
    n = len(seq)
    if pos < 0 or pos + k > n:
        raise ValueError(f"read window [{pos}, {pos + k}) does not fit in {n} bases")
    p_del = profile.del_rate
    p_ins = p_del + profile.ins_rate
    p_sub = p_ins + profile.sub_rate
    out: list[str] = []
    ref = pos
    step = 0
    subs = ins = dels = 0
    # uniforms keyed on (seed, read_index, step, slot), hashed a block at a time
    block = 2 * k
    u = None
    while len(out) < k:
        if step % block == 0:
            steps = np.arange(step, step + block)
            u = rng.uniform(seed, _TAG_READ, read_index, steps[:, None], np.arange(2)[None, :])
        event, choice = u[step % block]
        step += 1
        if event < p_del:
            if ref >= n:
                raise ValueError(f"read at {pos} runs past the genome end after deletions")
            ref += 1
            dels += 1
            continue
        if event < p_ins:
            out.append(BASES[int(choice * 4)])
            ins += 1
            continue
        if ref >= n:
            raise ValueError(f"read at {pos} runs past the genome end after deletions")
        base = seq[ref]
        ref += 1
        if event < p_sub:
            others = [b for b in BASES if b != base]
            out.append(others[int(choice * 3)])
            subs += 1
        else:
            out.append(base)
    return SimulatedRead("".join(out), pos, subs, ins, dels)


def simulate_read(genome: Genome | str, pos: int, k: int, profile: ReadErrorProfile,
                  seed: int, read_index: int) -> str:
    return simulate_read_detailed(genome, pos, k, profile, seed, read_index).sequence


def read_position(genome_length: int, k: int, seed: int, read_index: int) -> int:
    """Uniform start position leaving room for deletions past the window."""
    span = genome_length - k - DELETION_SLACK + 1
    if span <= 0:
        raise ValueError(f"genome of {genome_length} bases is too short for reads of {k}")
    return int(rng.hash64(seed, _TAG_POSITION, read_index) % np.uint64(span))


def simulate_reads(genome: Genome, count: int, k: int = 64, profile: ReadErrorProfile = ReadErrorProfile(),
                   seed: int = 0, first_index: int = 0) -> list[SimulatedRead]:
    """``count`` reads from random positions, deterministic per (seed, read_index)."""
    reads = []
    for i in range(first_index, first_index + count):
        pos = read_position(len(genome), k, seed, i)
        reads.append(simulate_read_detailed(genome, pos, k, profile, seed, i))
    return reads


def random_genome(length: int, seed: int, accession: str = "synthetic") -> Genome:
    """Uniform i.i.d. ACGT sequence (for fixtures and negative samples)."""
    idx = (rng.hash64(seed, 5, np.arange(length)) >> np.uint64(62)).astype(np.int64)
    return Genome(accession, f"random {length} bp seed {seed}", "".join(np.array(list(BASES))[idx]))


# --- classification -------------------------------------------------------

IDEAL = "ideal"
ANALOG = "analog"


@dataclass(frozen=True)
class AnalogMatcher:
    """One Monte-Carlo draw per (read, row) through the matchline model.

    ``params`` is re-tuned for each threshold so that its nominal mismatch
    threshold equals the requested number of bits.
    """

    params: MatchlineParams
    spec: VariationSpec

    def positive(self, distances: np.ndarray, threshold_bits: int, read_index: int) -> bool:
        p = threshold_for_mt(self.params, threshold_bits)
        n_rows = len(distances)
        for d in np.unique(distances).tolist():
            if d > p.word_bits or guaranteed_mismatch(p, self.spec, d):
                # rows only get farther from here on
                break
            rows = np.flatnonzero(distances == d).astype(np.uint64)
            trials = np.uint64(read_index) * np.uint64(n_rows) + rows
            if trial_outcomes(p, self.spec, d, trials).any():
                return True
        return False


def _check_read(read: str, db: KmerDb) -> str:
    read = read.upper()
    if len(read) != db.k:
        raise SequenceError(f"read length {len(read)} != k-mer length {db.k}")
    if np.any(base_indices(read) == 255):
        raise SequenceError("read contains ambiguous bases")
    return read


def classify_read(read: str, db: KmerDb, threshold_bp: int, matcher: str | AnalogMatcher = IDEAL,
                  read_index: int = 0) -> bool:
    read = _check_read(read, db)
    if not 0 <= threshold_bp <= db.k:
        raise ValueError(f"threshold must lie in [0, {db.k}] basepairs")
    query = encode(read, db.encoding)
    distances = db.array.distances(query)
    if matcher == IDEAL:
        return bool(distances.min() <= 2 * threshold_bp)
    if isinstance(matcher, AnalogMatcher):
        return matcher.positive(np.sort(distances), 2 * threshold_bp, read_index)
    raise ValueError(f"unknown matcher {matcher!r}")


def classify_exact(read: str, db: KmerDb) -> bool:
    return classify_read(read, db, 0, IDEAL)


def best_row_distances(reads: Sequence[str], db: KmerDb) -> np.ndarray:
    """Smallest encoded distance (bits) from each read to any row."""
    words = [encode(_check_read(r, db), db.encoding) for r in reads]
    return db.array.min_distances(words)


@dataclass(frozen=True)
class LabeledSample:
    name: str
    reads: tuple[str, ...]
    expected_positive: bool


@dataclass(frozen=True)
class ThresholdResult:
    threshold_bp: int
    counts: ConfusionCounts
    sensitivity: float | None
    specificity: float | None


@dataclass(frozen=True)
class ClassificationReport:
    matcher: str
    read_count: int
    samples: tuple[str, ...]
    results: tuple[ThresholdResult, ...]

    def by_threshold(self, threshold_bp: int) -> ThresholdResult:
        for r in self.results:
            if r.threshold_bp == threshold_bp:
                return r
        raise KeyError(threshold_bp)


def _metric(fn, counts):
    try:
        return fn(counts)
    except UndefinedMetricError:
        return None


def evaluate(samples: Sequence[LabeledSample], db: KmerDb, thresholds: Iterable[int],
             matcher: str | AnalogMatcher = IDEAL, threads: int = 1) -> ClassificationReport:
    """Sensitivity/specificity per threshold over labeled read sets.

    Metrics with a zero denominator are reported as None. ``threads`` splits
    the ideal matcher's distance scan; counts are identical for any value.
    """
    thresholds = sorted(set(int(t) for t in thresholds))
    for t in thresholds:
        if not 0 <= t <= db.k:
            raise ValueError(f"threshold {t} outside [0, {db.k}]")
    if not (matcher == IDEAL or isinstance(matcher, AnalogMatcher)):
        raise ValueError(f"unknown matcher {matcher!r}")
    per_t = {t: ConfusionCounts() for t in thresholds}
    read_index = 0
    for sample in samples:
        if isinstance(matcher, AnalogMatcher):
            for read in sample.reads:
                query = encode(_check_read(read, db), db.encoding)
                dist = np.sort(db.array.distances(query))
                for t in thresholds:
                    pos = matcher.positive(dist, 2 * t, read_index)
                    per_t[t] = per_t[t] + _tally(pos, sample.expected_positive)
                read_index += 1
            continue
        best = _best_threaded(sample.reads, db, threads)
        read_index += len(sample.reads)
        for t in thresholds:
            hits = int((best <= 2 * t).sum())
            misses = len(best) - hits
            if sample.expected_positive:
                per_t[t] = per_t[t] + ConfusionCounts(tp=hits, fn=misses)
            else:
                per_t[t] = per_t[t] + ConfusionCounts(tn=misses, fp=hits)
    results = tuple(ThresholdResult(t, c, _metric(sensitivity, c), _metric(specificity, c))
                    for t, c in per_t.items())
    name = matcher if isinstance(matcher, str) else ANALOG
    return ClassificationReport(name, read_index, tuple(s.name for s in samples), results)


def _best_threaded(reads: Sequence[str], db: KmerDb, threads: int) -> np.ndarray:
    if threads <= 1 or len(reads) < 2:
        return best_row_distances(reads, db)
    step = -(-len(reads) // threads)
    chunks = [reads[i:i + step] for i in range(0, len(reads), step)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: best_row_distances(c, db), chunks))
    return np.concatenate(parts)


def _tally(positive: bool, expected_positive: bool) -> ConfusionCounts:
    if expected_positive:
        return ConfusionCounts(tp=1) if positive else ConfusionCounts(fn=1)
    return ConfusionCounts(fp=1) if positive else ConfusionCounts(tn=1)
