"""k-mer spectra of amino-acid sequences as fixed-length count vectors."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _parallel
from .seqio import DEFAULT_ALPHABET, Alphabet, SequenceFormatError, SequenceRecord


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Dense ``n x d`` feature table with row and column identities.

    ``k`` is the k-mer length the columns came from, or 0 for derived
    features (projections, selections of non-k-mer columns).
    """
    values: np.ndarray
    column_ids: tuple
    row_ids: tuple
    k: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"feature values must be 2-d, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_ids", tuple(self.column_ids))
        object.__setattr__(self, "row_ids", tuple(self.row_ids))
        if values.shape != (len(self.row_ids), len(self.column_ids)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.row_ids)} row ids x {len(self.column_ids)} column ids")

    @property
    def shape(self):
        return self.values.shape

    def select_columns(self, idx: Sequence[int]) -> "FeatureMatrix":
        idx = np.asarray(sorted(idx), dtype=np.intp)
        return FeatureMatrix(self.values[:, idx], [self.column_ids[i] for i in idx], self.row_ids, self.k)

    def take_rows(self, idx: Sequence[int]) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.intp)
        return FeatureMatrix(self.values[idx], self.column_ids, [self.row_ids[i] for i in idx], self.k)


def _codes(residues: str, alphabet: Alphabet) -> np.ndarray:
    lut = _lookup(alphabet)
    raw = np.frombuffer(residues.encode("latin-1", errors="replace"), dtype=np.uint8)
    codes = lut[raw]
    if (codes < 0).any():
        bad = residues[int(np.argmax(codes < 0))]
        raise SequenceFormatError(f"character {bad!r} is not in the alphabet {alphabet.symbols!r}")
    return codes


_LUTS: dict[str, np.ndarray] = {}


def _lookup(alphabet: Alphabet) -> np.ndarray:
    lut = _LUTS.get(alphabet.symbols)
    if lut is None:
        lut = np.full(256, -1, dtype=np.int64)
        for i, c in enumerate(alphabet.symbols):
            lut[ord(c)] = i
        _LUTS[alphabet.symbols] = lut
    return lut


def kmers_of(residues: str, k: int) -> list[str]:
    """All ``len(residues) - k + 1`` overlapping k-mers, left to right."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = len(residues)
    if k > n:
        raise ValueError(f"k={k} exceeds sequence length {n}")
    return [residues[i:i + k] for i in range(n - k + 1)]


def kmer_index(codes: np.ndarray, k: int, base: int) -> np.ndarray:
    """Column index of every k-mer window in an integer-coded sequence.

    The first residue of a k-mer is the most significant digit, so columns
    follow lexicographic order over the alphabet.
    """
    m = codes.shape[0] - k + 1
    idx = np.zeros(m, dtype=np.int64)
    for j in range(k):
        idx = idx * base + codes[j:j + m]
    return idx


def count_vector(residues: str, k: int, alphabet: Alphabet = DEFAULT_ALPHABET) -> np.ndarray:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(residues):
        raise ValueError(f"k={k} exceeds sequence length {len(residues)}")
    codes = _codes(residues, alphabet)
    base = len(alphabet)
    return np.bincount(kmer_index(codes, k, base), minlength=base ** k).astype(np.int64)


def kmer_columns(k: int, alphabet: Alphabet = DEFAULT_ALPHABET) -> list[str]:
    return ["".join(p) for p in itertools.product(alphabet.symbols, repeat=k)]


def featurize_dataset(records: Sequence[SequenceRecord], k: int = 3,
                      alphabet: Alphabet = DEFAULT_ALPHABET, normalize: bool = False) -> FeatureMatrix:
    """Stack the k-mer count vectors of ``records`` into a FeatureMatrix.

    Rows are computed in fixed-size chunks, possibly on several threads; the
    result does not depend on the thread count. With ``normalize`` each row
    is divided by its k-mer total.
    """
    d = len(alphabet) ** k
    out = np.zeros((len(records), d), dtype=np.float64)

    def fill(bounds):
        s, e = bounds
        for i in range(s, e):
            rec = records[i]
            try:
                out[i] = count_vector(rec.residues, k, alphabet)
            except (SequenceFormatError, ValueError) as exc:
                raise SequenceFormatError(f"record {rec.id!r}: {exc}") from None

    _parallel.ordered_map(fill, _parallel.chunk_bounds(len(records), 64))
    if normalize and len(records):
        out /= out.sum(axis=1, keepdims=True)
    return FeatureMatrix(out, kmer_columns(k, alphabet), [r.id for r in records], k)


# -- CSV format --------------------------------------------------------------

def _fmt_row(row: np.ndarray) -> str:
    if np.all(row == np.round(row)) and np.all(np.abs(row) < 2 ** 53):
        return ",".join(map(str, row.astype(np.int64).tolist()))
    return ",".join(map(repr, row.tolist()))


def write_feature_csv(fm: FeatureMatrix, path, meta: dict | None = None) -> None:
    """Write ``id,<col1>,<col2>,...`` CSV; ``meta`` goes in a leading '#' line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header_meta = {"k": fm.k}
        if meta:
            header_meta.update(meta)
        fh.write("# " + json.dumps(header_meta, sort_keys=True) + "\n")
        fh.write("id," + ",".join(fm.column_ids) + "\n")
        for rid, row in zip(fm.row_ids, fm.values):
            fh.write(rid + "," + _fmt_row(row) + "\n")


def read_feature_csv(path) -> tuple[FeatureMatrix, dict]:
    """Inverse of :func:`write_feature_csv`; returns the matrix and the '#' metadata."""
    meta: dict = {}
    header = None
    row_ids: list[str] = []
    bodies: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            if line.startswith("#"):
                try:
                    meta.update(json.loads(line[1:]))
                except json.JSONDecodeError:
                    pass
                continue
            if header is None:
                header = line.split(",")
                if header[0] != "id":
                    raise SequenceFormatError(f"{path}:{lineno}: header must start with 'id'")
                continue
            rid, _, body = line.partition(",")
            if body.count(",") != len(header) - 2:
                raise SequenceFormatError(
                    f"{path}:{lineno}: expected {len(header) - 1} values, got {body.count(',') + 1}")
            row_ids.append(rid)
            bodies.append(body)
    if header is None:
        raise SequenceFormatError(f"{path}: missing header row")
    d = len(header) - 1
    if bodies:
        try:
            values = np.loadtxt(bodies, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise SequenceFormatError(f"{path}: {exc}") from None
    else:
        values = np.zeros((0, d))
    return FeatureMatrix(values, header[1:], row_ids, int(meta.get("k", 0))), meta
