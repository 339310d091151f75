"""Planted-variant datasets of spike-like protein sequences.

A random ancestor sequence is drawn over the 20 standard amino acids; each
variant applies its own fixed substitutions and every sequence then picks up
independent point mutations at ``noise_rate`` per residue.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .seqio import SequenceRecord

STANDARD_RESIDUES = "ACDEFGHIKLMNPQRSTVWY"
SPIKE_LENGTH = 1274

# spike-gene mutation counts of the five variants of concern
VARIANT_MUTATIONS = (("Alpha", 8), ("Beta", 9), ("Delta", 8), ("Gamma", 10), ("Epsilon", 3))


@dataclass(frozen=True)
class VariantSpec:
    name: str
    n_sequences: int
    mutations: tuple = field(default=())   # ((position, residue), ...)
    noise_rate: float = 0.001

    def __post_init__(self):
        if not 0 <= self.noise_rate < 1:
            raise ValueError(f"{self.name}: noise_rate must be in [0, 1), got {self.noise_rate}")
        if self.n_sequences < 0:
            raise ValueError(f"{self.name}: n_sequences must be >= 0")
        positions = [p for p, _ in self.mutations]
        if len(set(positions)) != len(positions):
            raise ValueError(f"{self.name}: a position is mutated twice")


def default_specs(per_variant: int = 500, length: int = SPIKE_LENGTH, noise_rate: float = 0.001,
                  seed: int = 0) -> list[VariantSpec]:
    """Five variants with the Alpha..Epsilon mutation counts at disjoint random positions.

    Each mutation is stored as an integer offset in 1..19 from the ancestor
    residue, so it always changes the residue once :func:`generate` has
    drawn the ancestor.
    """
    rng = np.random.default_rng([seed, 1])
    total = sum(m for _, m in VARIANT_MUTATIONS)
    if total > length:
        raise ValueError(f"sequence length {length} too short for {total} mutations")
    positions = rng.choice(length, size=total, replace=False)
    offsets = rng.integers(1, len(STANDARD_RESIDUES), size=total)
    specs = []
    at = 0
    for name, m in VARIANT_MUTATIONS:
        muts = tuple(sorted((int(p), int(o)) for p, o in zip(positions[at:at + m], offsets[at:at + m])))
        specs.append(VariantSpec(name, per_variant, muts, noise_rate))
        at += m
    return specs


def _resolve(residue, ancestor_code: int) -> int:
    if isinstance(residue, str):
        if residue not in STANDARD_RESIDUES:
            raise ValueError(f"substituted residue {residue!r} is not a standard amino acid")
        return STANDARD_RESIDUES.index(residue)
    # integer offsets relative to the ancestor residue, never a no-op
    off = int(residue) % len(STANDARD_RESIDUES)
    if off == 0:
        raise ValueError("residue offset must not be a multiple of 20")
    return (ancestor_code + off) % len(STANDARD_RESIDUES)


def consensus_codes(spec: VariantSpec, ancestor: np.ndarray) -> np.ndarray:
    seq = ancestor.copy()
    for pos, res in spec.mutations:
        if not 0 <= pos < ancestor.shape[0]:
            raise ValueError(f"{spec.name}: mutation position {pos} outside sequence of length {ancestor.shape[0]}")
        seq[pos] = _resolve(res, int(ancestor[pos]))
    return seq


def decode(codes: np.ndarray) -> str:
    return np.frombuffer(STANDARD_RESIDUES.encode(), dtype=np.uint8)[codes].tobytes().decode()


def generate(specs: Sequence[VariantSpec] | None = None, base_length: int = SPIKE_LENGTH,
             seed: int = 0) -> tuple[list[SequenceRecord], dict[str, str]]:
    """Draw records for every spec; returns ``(records, id -> variant)``.

    Records are grouped by variant in ``specs`` order with ids
    ``<variant>_<index>``.
    """
    if specs is None:
        specs = default_specs(length=base_length, seed=seed)
    specs = list(specs)
    if not specs:
        raise ValueError("need at least one variant spec")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError(f"variant names must be distinct: {names}")
    rng = np.random.default_rng([seed, 2])
    A = len(STANDARD_RESIDUES)
    ancestor = rng.integers(0, A, size=base_length)
    consensus = [consensus_codes(s, ancestor) for s in specs]
    for i in range(len(specs)):
        for j in range(i):
            if np.array_equal(consensus[i], consensus[j]):
                raise ValueError(f"variants {specs[j].name!r} and {specs[i].name!r} are identical")

    records: list[SequenceRecord] = []
    truth: dict[str, str] = {}
    for spec, cons in zip(specs, consensus):
        seqs = np.repeat(cons[None, :], spec.n_sequences, axis=0)
        if spec.noise_rate > 0 and spec.n_sequences:
            hit = rng.random(seqs.shape) < spec.noise_rate
            shift = rng.integers(1, A, size=seqs.shape)
            seqs = np.where(hit, (seqs + shift) % A, seqs)
        width = len(str(max(spec.n_sequences - 1, 0)))
        for i, row in enumerate(seqs):
            rid = f"{spec.name}_{i:0{width}d}"
            records.append(SequenceRecord(rid, decode(row), spec.name))
            truth[rid] = spec.name
    return records, truth
