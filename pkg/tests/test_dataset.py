import unicodedata

import numpy as np
import pytest

from geeznum import pnm
from geeznum.dataset import (
    BINARY5,
    ONEHOT,
    TEST,
    TRAIN,
    UNASSIGNED,
    ClassId,
    Dataset,
    decode_batch,
    decode_prediction,
    encode_label_binary5,
    encode_label_onehot,
    encode_labels,
    labels_manifest,
    load_dataset,
    parse_labels_manifest,
    split_per_class,
)
from geeznum.errors import DecodeError, EmptyDatasetError, LabelError, SplitError
from geeznum.synthgen import generate_dataset


def test_class_table_matches_unicode_database():
    for k in range(20):
        c = ClassId(k)
        assert unicodedata.name(c.char).startswith(("ETHIOPIC DIGIT", "ETHIOPIC NUMBER"))
        assert c.value == int(unicodedata.numeric(c.char))
        assert ClassId.from_codepoint(c.codepoint) == c
        assert ClassId.from_value(c.value) == c
        assert ClassId.from_folder(c.folder) == c
    assert ClassId(0).char == "፩" and ClassId(19).char == "፼"


def test_class_id_rejects_out_of_range():
    for bad in (-1, 20):
        with pytest.raises(LabelError):
            ClassId(bad)
    with pytest.raises(LabelError):
        ClassId.from_folder("7")
    with pytest.raises(LabelError):
        ClassId.from_value(11)


def test_labels_manifest_round_trip_and_validation():
    text = labels_manifest()
    assert text.splitlines()[0] == "00 1369 1"
    assert text.splitlines()[-1] == "19 137C 10000"
    assert len(parse_labels_manifest(text)) == 20
    with pytest.raises(LabelError):
        parse_labels_manifest("00 1369 2\n")
    with pytest.raises(LabelError):
        parse_labels_manifest("00 1369\n")


def test_onehot_encoding():
    assert encode_label_onehot(0).tolist() == [1.0] + [0.0] * 19
    assert encode_label_onehot(19).tolist() == [0.0] * 19 + [1.0]
    assert all(encode_label_onehot(k).sum() == 1.0 for k in range(20))


def test_binary5_encoding():
    assert encode_label_binary5(0).tolist() == [0, 0, 0, 0, 1]
    assert encode_label_binary5(9).tolist() == [0, 1, 0, 1, 0]
    assert encode_label_binary5(19).tolist() == [1, 0, 1, 0, 0]
    codes = encode_labels(range(20), BINARY5)
    assert codes.shape == (20, 5)
    assert len({tuple(r) for r in codes}) == 20


def test_decode_rules():
    out = np.zeros(20)
    out[:3] = [0.1, 0.9, 0.2]
    assert decode_prediction(out, ONEHOT).id == 1
    tie = np.zeros(20)
    tie[3] = tie[7] = 0.8
    assert decode_prediction(tie, ONEHOT).id == 3
    assert decode_prediction([0.9, 0.1, 0.9, 0.1, 0.1], BINARY5).id == 19
    assert decode_prediction([0.2, 0.2, 0.2, 0.2, 0.5], BINARY5).id == 0


@pytest.mark.parametrize("code", [0, 21, 22, 31])
def test_decode_rejects_out_of_range_patterns(code):
    bits = [(code >> s) & 1 for s in range(4, -1, -1)]
    with pytest.raises(DecodeError):
        decode_prediction(np.array(bits, dtype=float), BINARY5)
    assert decode_batch(np.array([bits], dtype=float), BINARY5).tolist() == [-1]


def test_decode_wrong_width():
    with pytest.raises(DecodeError):
        decode_prediction(np.zeros(5), ONEHOT)


def test_load_generated_dataset(small_data):
    ds, report = load_dataset(small_data)
    assert len(ds) == 80 and report.loaded == 80 and not report.failures
    assert ds.class_counts().tolist() == [4] * 20
    assert ds.features.shape == (80, 1800)
    assert ds.sample_ids[:2] == ("00/000.pgm", "00/001.pgm")
    assert set(ds.sources) == {"synthetic"}
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1  # read-only


def test_parallel_load_is_order_stable(small_data):
    a, _ = load_dataset(small_data)
    b, _ = load_dataset(small_data, n_jobs=4)
    assert a.digest() == b.digest() and a.sample_ids == b.sample_ids


def test_corrupt_and_blank_files_are_reported(tmp_path, capsys):
    generate_dataset(tmp_path, per_class=2)
    (tmp_path / "05" / "001.pgm").write_bytes(b"garbage")
    pnm.write_pgm(tmp_path / "07" / "000.pgm", np.full((8, 8), 255, dtype=np.uint8))
    ds, report = load_dataset(tmp_path, report_file=True)
    assert len(ds) == 38
    assert [p for p, _ in report.failures] == ["05/001.pgm", "07/000.pgm"]
    assert "05/001.pgm" in capsys.readouterr().err
    assert "07/000.pgm" in (tmp_path / "load_report.txt").read_text()


def test_scanned_source_and_bad_folder(tmp_path):
    (tmp_path / "03").mkdir()
    page = np.full((10, 10), 255, dtype=np.uint8)
    page[2:8, 4:6] = 0
    pnm.write_pgm(tmp_path / "03" / "scan.pgm", page)
    ds, _ = load_dataset(tmp_path)
    assert ds.sources == ("scanned",) and ds.labels.tolist() == [3]
    (tmp_path / "xx").mkdir()
    with pytest.raises(LabelError):
        load_dataset(tmp_path)


def test_empty_roots(tmp_path):
    with pytest.raises(EmptyDatasetError):
        load_dataset(tmp_path)
    with pytest.raises(EmptyDatasetError):
        load_dataset(tmp_path / "missing")


def _fake(counts):
    labels = np.repeat(np.arange(20), counts)
    feats = np.zeros((labels.size, 1800), dtype=np.uint8)
    ids = tuple(f"{k:02d}/{i:03d}.pgm" for i, k in enumerate(labels))
    return Dataset(feats, labels, ids, ("synthetic",) * labels.size)


def test_split_sizes_and_determinism():
    ds = _fake([28] * 20)
    a = split_per_class(ds, seed=11)
    assert len(a.subset(TRAIN)) == 460 and len(a.subset(TEST)) == 100
    assert a.subset(TRAIN).class_counts().tolist() == [23] * 20
    assert split_per_class(ds, seed=11).splits == a.splits
    assert split_per_class(ds, seed=12).splits != a.splits


def test_split_leaves_surplus_unassigned():
    ds = split_per_class(_fake([30] * 20), seed=0)
    assert ds.splits.count(UNASSIGNED) == 40


def test_split_names_short_class():
    counts = [28] * 20
    counts[6] = 27
    with pytest.raises(SplitError, match="class 06"):
        split_per_class(_fake(counts))


def test_digest_depends_on_labels_and_pixels():
    ds = _fake([1] * 20)
    assert ds.digest() == _fake([1] * 20).digest()
    other = Dataset(ds.features, ds.labels[::-1].copy(), ds.sample_ids, ds.sources)
    assert other.digest() != ds.digest()
