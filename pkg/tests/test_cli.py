import os

import pytest

from seqfusion.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_prints_indices(capsys):
    code, out, _ = run(capsys, "sample", "--frames", "144", "--target", "22")
    assert code == 0
    assert out.strip() == " ".join(str(6 * k) for k in range(1, 23))


def test_sample_insufficient_frames_is_data_error(capsys):
    code, _, err = run(capsys, "sample", "--frames", "5", "--target", "9")
    assert code == 3
    assert "frames" in err


def test_sample_pad_repeat(capsys):
    code, out, _ = run(capsys, "sample", "--frames", "3", "--target", "5",
                       "--pad-repeat")
    assert code == 0
    assert out.strip() == "1 2 3 3 3"


def test_unknown_flag_exits_with_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["sample", "--frames", "4", "--target", "2", "--bogus"])
    assert e.value.code == 2


def test_gradcheck_passes(capsys):
    code, out, _ = run(capsys, "gradcheck", "--seed", "1")
    assert code == 0
    for variant in ("conv_l", "fc_l", "fu_1", "fu_2"):
        assert variant in out


def synth_dataset_dir(capsys, tmp_path, name="ds", seed="5"):
    out = str(tmp_path / name)
    code, _, _ = run(capsys, "synth", "--classes", "2", "--per-class", "4",
                     "--frames", "4", "--dconv", "3", "--dfc", "4",
                     "--coupling", "conv_only", "--seed", seed,
                     "--split-tags", "split1,split2", "--out", out)
    assert code == 0
    return os.path.join(out, "manifest.tsv")


def test_synth_and_inspect(capsys, tmp_path):
    manifest = synth_dataset_dir(capsys, tmp_path)
    ds_dir = os.path.dirname(manifest)
    tsff = sorted(f for f in os.listdir(ds_dir) if f.endswith(".tsff"))[0]
    code, out, _ = run(capsys, "inspect", os.path.join(ds_dir, tsff))
    assert code == 0
    assert "frames     4" in out
    assert "fc_dim     4" in out
    assert "payload_crc32" in out


def test_inspect_corrupt_file_is_data_error(capsys, tmp_path):
    p = tmp_path / "bad.tsff"
    p.write_bytes(b"XXXXsomething")
    code, _, err = run(capsys, "inspect", str(p))
    assert code == 3 and "magic" in err


def train_args(manifest, outdir, seed="7"):
    return ["train", "--manifest", manifest, "--variant", "fu_2",
            "--hidden", "4", "--merge-dim", "4", "--dropout", "0.1",
            "--scheme", "predefined", "--epochs", "2", "--batch", "2",
            "--lr", "0.003", "--seed", seed, "--out", outdir]


def test_train_eval_round_trip(capsys, tmp_path):
    manifest = synth_dataset_dir(capsys, tmp_path)
    outdir = str(tmp_path / "run")
    code, out, err = run(capsys, *train_args(manifest, outdir))
    assert code == 0, err
    assert os.path.isfile(os.path.join(outdir, "confusion.csv"))
    assert os.path.isfile(os.path.join(outdir, "metrics.txt"))
    assert not os.path.exists(os.path.join(outdir, ".lock"))
    ckpt = os.path.join(outdir, "fold_split1.fsm")
    assert os.path.isfile(ckpt)
    code, out, err = run(capsys, "eval", "--checkpoint", ckpt,
                         "--manifest", manifest, "--tag", "split1",
                         "--out", str(tmp_path / "evalout"))
    assert code == 0, err
    assert "accuracy" in out
    assert os.path.isfile(str(tmp_path / "evalout" / "confusion.csv"))


def test_train_runs_are_byte_identical(capsys, tmp_path):
    manifest = synth_dataset_dir(capsys, tmp_path)
    outs = []
    for name in ("run_a", "run_b"):
        outdir = str(tmp_path / name)
        code, _, err = run(capsys, *train_args(manifest, outdir))
        assert code == 0, err
        outs.append(outdir)
    for fname in ("fold_split1.fsm", "fold_split2.fsm", "metrics.txt",
                  "confusion.csv", "fold_split1_train.log"):
        a = open(os.path.join(outs[0], fname), "rb").read()
        b = open(os.path.join(outs[1], fname), "rb").read()
        assert a == b, fname


def test_locked_run_directory_is_runtime_error(capsys, tmp_path):
    manifest = synth_dataset_dir(capsys, tmp_path)
    outdir = tmp_path / "locked"
    outdir.mkdir()
    (outdir / ".lock").write_text("999999")
    code, _, err = run(capsys, *train_args(manifest, str(outdir)))
    assert code == 4 and "locked" in err


def test_eval_missing_checkpoint_is_data_error(capsys, tmp_path):
    manifest = synth_dataset_dir(capsys, tmp_path)
    code, _, err = run(capsys, "eval", "--checkpoint",
                       str(tmp_path / "nope.fsm"), "--manifest", manifest)
    assert code == 3


def test_train_bad_fold_name_is_config_error(capsys, tmp_path):
    manifest = synth_dataset_dir(capsys, tmp_path)
    args = train_args(manifest, str(tmp_path / "r")) + ["--fold", "nope"]
    code, _, err = run(capsys, *args)
    assert code == 2 and "fold" in err
