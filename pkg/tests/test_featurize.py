from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spikeclust.featurize import (FeatureMatrix, count_vector, featurize_dataset, kmer_columns, kmers_of,
                                  read_feature_csv, write_feature_csv)
from spikeclust.seqio import AMINO_ACIDS, SequenceFormatError, SequenceRecord

seqs = st.text(alphabet=AMINO_ACIDS, min_size=1, max_size=60)


def tally_oracle(s, k):
    """Dictionary tally placed into lexicographic column order."""
    counts = Counter(s[i:i + k] for i in range(len(s) - k + 1))
    cols = kmer_columns(k)
    return np.array([counts.get(c, 0) for c in cols])


@given(seqs, st.integers(1, 3))
def test_counts_match_dictionary_tally(s, k):
    if k > len(s):
        with pytest.raises(ValueError):
            count_vector(s, k)
        return
    v = count_vector(s, k)
    assert v.shape == (21 ** k,)
    assert v.sum() == len(s) - k + 1
    assert np.array_equal(v, tally_oracle(s, k))


def test_small_examples():
    assert kmers_of("ACDE", 3) == ["ACD", "CDE"]
    v = count_vector("AAAA", 2)
    assert v[0] == 3 and v.sum() == 3
    cols = kmer_columns(2)
    assert cols[:2] == ["AA", "AC"] and cols[-1] == "YY"


def test_invalid_residue_names_record():
    with pytest.raises(SequenceFormatError, match="'bad'"):
        featurize_dataset([SequenceRecord("ok", "ACD"), SequenceRecord("bad", "AC*D")], k=2)


def test_dataset_rows_and_normalize():
    recs = [SequenceRecord("a", "ACDACD"), SequenceRecord("b", "WWW")]
    fm = featurize_dataset(recs, k=2)
    assert fm.shape == (2, 441) and fm.row_ids == ("a", "b")
    assert list(fm.values.sum(axis=1)) == [5, 2]
    fn = featurize_dataset(recs, k=2, normalize=True)
    assert np.allclose(fn.values.sum(axis=1), 1.0)


def test_csv_round_trip(tmp_path):
    recs = [SequenceRecord(f"s{i}", s) for i, s in enumerate(["ACDEF", "KLMNP", "AAAAA"])]
    fm = featurize_dataset(recs, k=2)
    p = tmp_path / "f.csv"
    write_feature_csv(fm, p, {"seed": 3})
    back, meta = read_feature_csv(p)
    assert meta["seed"] == 3 and meta["k"] == 2
    assert back.row_ids == fm.row_ids and back.column_ids == fm.column_ids
    assert np.array_equal(back.values, fm.values)


def test_feature_matrix_shape_check():
    with pytest.raises(ValueError):
        FeatureMatrix(np.zeros((2, 3)), ["a", "b"], ["r1", "r2"])
