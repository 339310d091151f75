"""FASTA and variant-metadata parsing."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional

log = logging.getLogger(__name__)

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWXY"
GAP_CHARS = "-."
GAP_POLICIES = ("strip", "error", "keep-as-error")
INVALID_POLICIES = ("error", "drop")


class SequenceFormatError(ValueError):
    """Raised for malformed FASTA/TSV input or residues outside the alphabet."""


@dataclass(frozen=True)
class Alphabet:
    symbols: str = AMINO_ACIDS
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet must not be empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError(f"alphabet has duplicate symbols: {self.symbols!r}")
        object.__setattr__(self, "index", {c: i for i, c in enumerate(self.symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    def __contains__(self, ch: str) -> bool:
        return ch in self.index


DEFAULT_ALPHABET = Alphabet()


@dataclass(frozen=True)
class SequenceRecord:
    id: str
    residues: str
    variant: Optional[str] = None

    def __post_init__(self):
        if not self.residues:
            raise SequenceFormatError(f"record {self.id!r} has no residues")


@dataclass
class ParseStats:
    n_records: int = 0
    n_dropped: int = 0
    dropped_ids: list = field(default_factory=list)


def _finish(header, lineno, chunks, policy, on_invalid, alphabet, stats):
    rid = header
    seq = "".join(chunks).upper()
    if policy == "strip":
        seq = seq.translate({ord(c): None for c in GAP_CHARS})
    elif policy == "error":
        for c in GAP_CHARS:
            if c in seq:
                raise SequenceFormatError(
                    f"record {rid!r} (line {lineno}): gap character {c!r} not allowed with policy=error")
    bad = next((c for c in seq if c not in alphabet), None)
    if bad is not None:
        if on_invalid == "drop":
            stats.n_dropped += 1
            stats.dropped_ids.append(rid)
            return None
        raise SequenceFormatError(
            f"record {rid!r} (line {lineno}): character {bad!r} is not in the alphabet")
    if not seq:
        raise SequenceFormatError(f"record {rid!r} (line {lineno}): empty sequence")
    return SequenceRecord(rid, seq)


def iter_fasta(lines: Iterable[str], policy: str = "strip", on_invalid: str = "error",
               alphabet: Alphabet = DEFAULT_ALPHABET, stats: ParseStats | None = None,
               source: str = "<input>"):
    """Yield records from FASTA lines.

    ``policy`` decides what happens to gap characters ('-', '.'):

    * ``strip``: remove them (default).
    * ``error``: raise on the first gap.
    * ``keep-as-error``: keep them, so they fail the alphabet check.

    A record with a character outside the alphabet raises unless
    ``on_invalid="drop"``, in which case it is skipped and counted in ``stats``.

    Lines starting with ';' before the first header are comments.
    """
    if policy not in GAP_POLICIES:
        raise ValueError(f"unknown gap policy {policy!r}; expected one of {GAP_POLICIES}")
    if on_invalid not in INVALID_POLICIES:
        raise ValueError(f"unknown invalid-record policy {on_invalid!r}; expected one of {INVALID_POLICIES}")
    stats = stats if stats is not None else ParseStats()
    header = None
    header_line = 0
    chunks: list[str] = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(";") and header is None:
            continue
        if line.startswith(">"):
            if header is not None:
                rec = _finish(header, header_line, chunks, policy, on_invalid, alphabet, stats)
                if rec is not None:
                    stats.n_records += 1
                    yield rec
            tokens = line[1:].split()
            if not tokens:
                raise SequenceFormatError(f"{source}:{lineno}: empty FASTA header")
            header = tokens[0]
            if header in seen:
                raise SequenceFormatError(f"{source}:{lineno}: duplicate record id {header!r}")
            seen.add(header)
            header_line = lineno
            chunks = []
        else:
            if header is None:
                raise SequenceFormatError(f"{source}:{lineno}: sequence data before the first '>' header")
            chunks.append(line)
    if header is not None:
        rec = _finish(header, header_line, chunks, policy, on_invalid, alphabet, stats)
        if rec is not None:
            stats.n_records += 1
            yield rec


def parse_fasta(path, policy: str = "strip", on_invalid: str = "error", alphabet: Alphabet = DEFAULT_ALPHABET,
                stats: ParseStats | None = None) -> list[SequenceRecord]:
    stats = stats if stats is not None else ParseStats()
    with open(path, encoding="utf-8") as fh:
        records = list(iter_fasta(fh, policy=policy, on_invalid=on_invalid, alphabet=alphabet, stats=stats, source=str(path)))
    if stats.n_dropped:
        log.warning("%s: dropped %d record(s) with characters outside the alphabet",
                    path, stats.n_dropped)
    return records


def write_fasta(records: Iterable[SequenceRecord], path, width: int = 60,
                comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f";{c}\n")
        for rec in records:
            fh.write(f">{rec.id}\n")
            seq = rec.residues
            step = width if width > 0 else len(seq)
            for i in range(0, len(seq), step):
                fh.write(seq[i:i + step] + "\n")


def load_metadata(path) -> dict[str, str]:
    """Read an ``id<TAB>variant`` file into a dict.

    A first row of ``id<TAB>variant`` is treated as a header; '#' lines are
    comments. The same id may repeat only with the same variant.
    """
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        first = True
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 2 or not cols[0] or not cols[1]:
                raise SequenceFormatError(f"{path}:{lineno}: expected 'id<TAB>variant', got {line!r}")
            if first and cols[0].lower() == "id" and cols[1].lower() in ("variant", "label"):
                first = False
                continue
            first = False
            sid, variant = cols
            prev = out.get(sid)
            if prev is not None and prev != variant:
                raise SequenceFormatError(
                    f"{path}:{lineno}: id {sid!r} has conflicting variants {prev!r} and {variant!r}")
            out[sid] = variant
    return out


def write_metadata(mapping: dict[str, str], path, comments: Iterable[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"#{c}\n")
        fh.write("id\tvariant\n")
        for sid, variant in mapping.items():
            fh.write(f"{sid}\t{variant}\n")


def attach_variants(records: list[SequenceRecord], meta: dict[str, str]) -> list[SequenceRecord]:
    """Return copies of ``records`` with ``variant`` filled in from ``meta``."""
    return [SequenceRecord(r.id, r.residues, meta.get(r.id)) for r in records]
