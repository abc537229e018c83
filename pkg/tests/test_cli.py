import subprocess
import sys

import pytest

from geeznum.cli import build_parser, effective_config, main, parse_args


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("toycli")
    data, model = root / "toy", root / "toy.bin"
    assert main(["generate", "--out", str(data), "--per-class", "1", "--clean"]) == 0
    assert main(["train", "--data", str(data), "--model", str(model), "--train-per-class", "1",
                 "--test-per-class", "0", "--max-iter", "500", "--seed", "7"]) == 0
    return data, model


def test_help_documents_every_flag(capsys):
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["train", "--help"])
    assert info.value.code == 0
    parser = build_parser()
    sub = next(a for a in parser._actions if a.choices and "train" in a.choices).choices
    assert set(sub) == {"generate", "train", "evaluate", "predict", "inspect", "report"}
    for name, p in sub.items():
        for action in p._actions:
            if action.option_strings and action.dest != "help":
                assert action.help, f"{name} {action.option_strings} lacks help"


def test_usage_errors_exit_2(capsys, tmp_path):
    assert run(capsys, "train", "--data", "x", "--model", "m", "--bogus")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "train", "--data", "x", "--model", "m", "--hidden", "20,a")[0] == 2
    cfg = tmp_path / "c.txt"
    cfg.write_text("not-a-flag=3\n")
    code, _, err = run(capsys, "generate", "--out", tmp_path / "d", "--config", cfg)
    assert code == 2 and "unknown key" in err


def test_domain_errors_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--data", tmp_path / "missing", "--model", tmp_path / "m.bin")
    assert code == 1 and "does not exist" in err
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"nonsense")
    code, _, err = run(capsys, "inspect", "--model", junk)
    assert code == 1 and "offset 0" in err


def test_effective_config_round_trips(tmp_path, capsys):
    argv = ["train", "--data", "d", "--model", "m.bin", "--hidden", "8,4", "--c2", "0.2"]
    args = parse_args(argv)
    block = effective_config(args)
    assert "hidden=8,4" in block and "restart-interval=auto" in block and "n-init=5" in block
    cfg = tmp_path / "eff.txt"
    cfg.write_text(block)
    again = parse_args(["train", "--config", str(cfg), "--data", "d", "--model", "m.bin"])
    assert {k: v for k, v in vars(again).items() if k != "config"} == \
        {k: v for k, v in vars(args).items() if k != "config"}


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# comment\nseed=3\nper-class=2\nnoise=0.1\n")
    args = parse_args(["generate", "--out", "o", "--config", str(cfg), "--seed", "9"])
    assert args.seed == 9 and args.per_class == 2 and args.noise == 0.1
    cfg.write_text("out=from-file\n")
    assert parse_args(["generate", "--config", str(cfg)]).out == "from-file"


def test_default_hidden_equals_explicit():
    a = parse_args(["train", "--data", "d", "--model", "m"])
    b = parse_args(["train", "--data", "d", "--model", "m", "--hidden", "20,15,10"])
    assert vars(a) == vars(b) and a.hidden == (20, 15, 10)


def test_toy_predict_prints_class(toy_run, capsys):
    data, model = toy_run
    code, out, err = run(capsys, "predict", "--model", model, "--image", data / "00" / "000.pgm")
    assert code == 0
    assert out.startswith("class 00 value 1 codepoint U+1369")
    assert "# geeznum predict effective configuration" in err
    code, out, _ = run(capsys, "predict", "--model", model, "--image", data / "19" / "000.pgm")
    assert out.startswith("class 19 value 10000")


def test_toy_evaluate_train_only(toy_run, capsys, tmp_path):
    data, model = toy_run
    code, out, _ = run(capsys, "evaluate", "--data", data, "--model", model, "--out", tmp_path / "m")
    assert code == 0 and "pooled accuracy 100.00%" in out
    assert (tmp_path / "m" / "metrics_train.csv").exists()


def test_inspect_and_report(toy_run, capsys):
    _, model = toy_run
    code, out, _ = run(capsys, "inspect", "--model", model)
    assert code == 0
    assert "layers=1800,20,15,10,20" in out and "encoding=onehot" in out and "meta.split_seed=" in out
    code, out, _ = run(capsys, "report", "--trace", f"{model}.trace.csv", "--every", "100")
    assert code == 0 and out.startswith("iterations=")


def test_small_end_to_end(tmp_path, capsys):
    data, model = tmp_path / "data", tmp_path / "m.bin"
    assert run(capsys, "generate", "--out", data, "--seed", 7, "--per-class", 4)[0] == 0
    code, out, _ = run(capsys, "train", "--data", data, "--seed", 7, "--model", model, "--train-per-class", 3,
                       "--test-per-class", 1, "--max-iter", 10, "--n-init", 1)
    assert code == 0 and "train_accuracy=" in out
    assert (tmp_path / "m.bin.meta.txt").exists() and (tmp_path / "m.bin.trace.csv").exists()
    code, out, _ = run(capsys, "evaluate", "--data", data, "--model", model)
    assert code == 0 and "pooled accuracy" in out
    metrics = tmp_path / "m.bin.metrics"
    assert {p.name for p in metrics.iterdir()} == {"metrics_train.csv", "metrics_test.csv",
                                                    "confusion_train.csv", "confusion_test.csv"}
    code, out, _ = run(capsys, "report", "--trace", f"{model}.trace.csv", "--metrics", metrics)
    assert code == 0 and "pooled" in out and "89.88%" in out


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "geeznum.cli", "inspect"], capture_output=True, text=True)
    assert proc.returncode == 2 and "--model" in proc.stderr
