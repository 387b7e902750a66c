import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqfusion.core import Rng
from seqfusion.data import (CorruptionError, Dataset, FeatureMeta, FormatError,
                            ManifestError, SynthSpec, conv_stump, fc_block,
                            fc_stump, load_manifest, make_splits,
                            motif_timestep, read_feature_file, synth_dataset,
                            write_feature_file, write_synth_dataset)


def random_feature_file(path, rng, raw_conv=False):
    T = int(rng.integers(1, 6))
    if raw_conv:
        conv_shape = (int(rng.integers(1, 4)), 2, 2)
    else:
        conv_shape = (int(rng.integers(1, 8)),)
    fc_dim = int(rng.integers(1, 8))
    meta = FeatureMeta(f"vid{rng.integers(0, 10**6)}", int(rng.integers(0, 5)),
                       T, conv_shape, fc_dim)
    conv = [rng.normal((int(np.prod(conv_shape)),)) for _ in range(T)]
    fc = [rng.normal((fc_dim,)) for _ in range(T)]
    write_feature_file(path, meta, conv, fc)
    return meta, conv, fc


def test_round_trip_bit_exact(tmp_path):
    rng = Rng(1)
    for n in range(20):
        path = str(tmp_path / f"f{n}.tsff")
        meta, conv, fc = random_feature_file(path, rng, raw_conv=(n % 3 == 0))
        sample, meta2 = read_feature_file(path, conv_pooling="flatten")
        assert meta2 == meta
        for t in range(meta.T):
            # f32 payload widened to f64: exact round trip of the f32 values
            assert sample.x_conv[t].tobytes() == conv[t].astype("<f4").astype(
                np.float64).tobytes()
            assert sample.x_fc[t].tobytes() == fc[t].astype("<f4").astype(
                np.float64).tobytes()


def test_spatial_average_pooling_at_load(tmp_path):
    path = str(tmp_path / "raw.tsff")
    rng = Rng(2)
    meta = FeatureMeta("v", 0, 2, (3, 2, 2), 4)
    conv = [rng.normal((12,)) for _ in range(2)]
    fc = [rng.normal((4,)) for _ in range(2)]
    write_feature_file(path, meta, conv, fc)
    sample, _ = read_feature_file(path, conv_pooling="spatial_average")
    expect = conv[0].astype("<f4").astype(np.float64).reshape(3, 2, 2).mean(axis=(1, 2))
    assert np.allclose(sample.x_conv[0], expect)
    assert sample.x_conv[0].shape == (3,)


def test_zero_frames_rejected(tmp_path):
    meta = FeatureMeta("v", 0, 0, (2,), 2)
    with pytest.raises(FormatError):
        write_feature_file(str(tmp_path / "z.tsff"), meta, [], [])


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.tsff"
    path.write_bytes(b"XXXX" + b"\0" * 64)
    with pytest.raises(FormatError, match="XXXX"):
        read_feature_file(str(path))


def test_truncation_detected(tmp_path):
    path = str(tmp_path / "t.tsff")
    random_feature_file(path, Rng(3))
    data = open(path, "rb").read()
    open(path, "wb").write(data[:-1])
    with pytest.raises(CorruptionError):
        read_feature_file(path)


def test_crc_mismatch_detected(tmp_path):
    path = str(tmp_path / "c.tsff")
    meta, _, _ = random_feature_file(path, Rng(4))
    data = bytearray(open(path, "rb").read())
    data[-10] ^= 0xFF  # flip a payload byte
    open(path, "wb").write(bytes(data))
    with pytest.raises(CorruptionError, match="CRC"):
        read_feature_file(path)


# --- manifests --------------------------------------------------------------

def write_manifest(tmp_path, rows, with_files=True):
    lines = ["# test manifest"]
    for vid, cname, group, tag in rows:
        fname = f"{vid}.tsff"
        if with_files:
            rng = Rng(hash(vid) & 0xFFFF)
            meta = FeatureMeta(vid, 0, 2, (3,), 2)
            write_feature_file(str(tmp_path / fname), meta,
                               [rng.normal((3,)) for _ in range(2)],
                               [rng.normal((2,)) for _ in range(2)])
        lines.append(f"{vid}\t{cname}\t{group}\t{tag}\t{fname}")
    path = tmp_path / "manifest.tsv"
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def test_load_manifest_counts(tmp_path):
    path = write_manifest(tmp_path, [("a", "walk", "-", "-"),
                                     ("b", "run", "-", "-"),
                                     ("c", "walk", "-", "-")])
    ds = load_manifest(path)
    assert len(ds) == 3 and ds.K == 2
    assert ds.class_names == ["run", "walk"]


def test_duplicate_video_id(tmp_path):
    path = write_manifest(tmp_path, [("a", "walk", "-", "-"),
                                     ("a", "run", "-", "-")])
    with pytest.raises(ManifestError, match="'a'"):
        load_manifest(path)


def test_missing_feature_file(tmp_path):
    path = write_manifest(tmp_path, [("a", "walk", "-", "-")], with_files=False)
    with pytest.raises(ManifestError, match="missing"):
        load_manifest(path)


def test_label_cross_check(tmp_path):
    # file stores label 0 but manifest sorts "walk" to index 1
    path = write_manifest(tmp_path, [("a", "walk", "-", "-"),
                                     ("b", "run", "-", "-")])
    ds = load_manifest(path)
    with pytest.raises(ManifestError, match="label mismatch"):
        ds.load_sample(ds.entry("a"))


# --- splits -----------------------------------------------------------------

def test_loocv_video(tmp_path):
    rows = [(f"v{i}", "c", "-", "-") for i in range(5)]
    ds = load_manifest(write_manifest(tmp_path, rows))
    plan = make_splits(ds, "loocv_video")
    assert len(plan.folds) == 5
    for f in plan.folds:
        assert len(f.test_ids) == 1 and len(f.train_ids) == 4
        assert not set(f.test_ids) & set(f.train_ids)


def test_loocv_group(tmp_path):
    rows = [(f"v{i}", "c", f"g{i // 2}", "-") for i in range(6)]
    ds = load_manifest(write_manifest(tmp_path, rows))
    plan = make_splits(ds, "loocv_group")
    assert len(plan.folds) == 3
    for f in plan.folds:
        groups = {ds.entry(i).group for i in f.test_ids}
        assert len(groups) == 1


def test_loocv_group_requires_groups(tmp_path):
    ds = load_manifest(write_manifest(tmp_path, [("a", "c", "-", "-")]))
    with pytest.raises(ManifestError):
        make_splits(ds, "loocv_group")


def test_predefined_three_splits(tmp_path):
    rows = [(f"v{i}", "c", "-", f"split{i % 3 + 1}") for i in range(9)]
    ds = load_manifest(write_manifest(tmp_path, rows))
    plan = make_splits(ds, "predefined")
    assert len(plan.folds) == 3
    assert [f.name for f in plan.folds] == ["split1", "split2", "split3"]
    covered = set()
    for f in plan.folds:
        assert not set(f.test_ids) & set(f.train_ids)
        covered |= set(f.test_ids)
    assert covered == {f"v{i}" for i in range(9)}


@given(st.integers(2, 50), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_loocv_algebra_property(n, seed):
    rng = Rng(seed)
    entries = []
    from seqfusion.data import ManifestEntry
    for i in range(n):
        g = f"g{int(rng.integers(0, max(2, n // 3)))}"
        entries.append(ManifestEntry(f"v{i}", "c", 0, g, None, "x"))
    ds = Dataset(entries, ["c"])
    for scheme in ("loocv_video", "loocv_group"):
        plan = make_splits(ds, scheme)
        all_ids = {e.video_id for e in entries}
        seen = []
        for f in plan.folds:
            assert not set(f.test_ids) & set(f.train_ids)
            assert set(f.test_ids) | set(f.train_ids) == all_ids
            seen += f.test_ids
        assert sorted(seen) == sorted(all_ids)  # each id held out exactly once


# --- synthetic datasets -----------------------------------------------------

def test_synth_deterministic():
    spec = SynthSpec(K=3, n_per_class=4, T=6, D_conv=5, D_fc=6, coupling="xor")
    a = synth_dataset(spec, Rng(7))
    b = synth_dataset(spec, Rng(7))
    for sa, sb in zip(a, b):
        assert sa.video_id == sb.video_id and sa.label == sb.label
        for xa, xb in zip(sa.x_conv + sa.x_fc, sb.x_conv + sb.x_fc):
            assert xa.tobytes() == xb.tobytes()


def test_conv_only_stump_is_perfect():
    spec = SynthSpec(K=3, n_per_class=30, T=9, D_conv=6, D_fc=6,
                     coupling="conv_only")
    samples = synth_dataset(spec, Rng(8))
    assert all(conv_stump(spec, s) == s.label for s in samples)


def test_fc_only_stump_is_perfect():
    spec = SynthSpec(K=3, n_per_class=30, T=9, D_conv=6, D_fc=6,
                     coupling="fc_only")
    samples = synth_dataset(spec, Rng(9))
    assert all(fc_stump(spec, s) == s.label for s in samples)


def test_xor_single_stream_stumps_near_chance():
    spec = SynthSpec(K=3, n_per_class=334, T=9, D_conv=6, D_fc=6,
                     coupling="xor")
    samples = synth_dataset(spec, Rng(10))[:1000]
    for stump in (conv_stump, fc_stump):
        acc = sum(stump(spec, s) == s.label for s in samples) / len(samples)
        assert acc <= 1 / 3 + 0.1


def test_xor_pair_determines_class():
    spec = SynthSpec(K=3, n_per_class=50, T=9, D_conv=6, D_fc=6, coupling="xor")
    for s in synth_dataset(spec, Rng(11)):
        a, b = conv_stump(spec, s), fc_stump(spec, s)
        assert (a + b) % spec.K == s.label


def test_write_synth_dataset_round_trip(tmp_path):
    spec = SynthSpec(K=2, n_per_class=3, T=4, D_conv=3, D_fc=3,
                     coupling="conv_only")
    samples = synth_dataset(spec, Rng(12))
    manifest = write_synth_dataset(samples, spec, str(tmp_path / "ds"),
                                   split_fractions={"split1": 0.5, "split2": 0.5})
    ds = load_manifest(manifest)
    assert len(ds) == 6 and ds.K == 2
    plan = make_splits(ds, "predefined")
    assert len(plan.folds) == 2
    s = ds.load_sample(ds.entries[0])
    assert s.T == 4


def test_motif_positions_within_range():
    spec = SynthSpec(K=3, n_per_class=1, T=10, D_conv=4, D_fc=4, coupling="xor")
    for m in range(3):
        assert 0 <= motif_timestep(spec, motif=m) < 10
    assert fc_block(spec, 2) == slice(2, 3) or fc_block(spec, 2).stop <= 4
