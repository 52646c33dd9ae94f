"""Tests for the command-line interface: argument handling, exit codes,
environment seed override, and end-to-end command flows."""

import numpy as np
import pytest

from adavsr.cli import main, parse_snr_list
from adavsr.config import ExperimentConfig
from adavsr.data import CorpusSpec, RawSample, generate_corpus, read_corpus, write_corpus
from adavsr.errors import InputError
from adavsr.frontend import SAMPLES_PER_FRAME


def _write_corpus_spec(path, **overrides):
    values = dict(n_samples=3, seed=5)
    values.update(overrides)
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in values.items():
            fh.write(f"{k}={v}\n")


def _write_train_config(path, **overrides):
    cfg = ExperimentConfig(epochs=1, batch_size=2, noise_prob=0.0, seed=0)
    for k, v in overrides.items():
        setattr(cfg, k, v)
    cfg.to_file(str(path))
    return cfg


class TestParseSnrList:
    def test_standard_sweep(self):
        assert parse_snr_list("-5,0,5,10,clean") == [-5.0, 0.0, 5.0, 10.0]

    def test_clean_only(self):
        assert parse_snr_list("clean") == []

    def test_whitespace_tolerated(self):
        assert parse_snr_list(" -5 , 0 ") == [-5.0, 0.0]

    def test_bad_token_rejected(self):
        with pytest.raises(InputError):
            parse_snr_list("-5,loud")


class TestGen:
    def test_writes_readable_container(self, tmp_path):
        spec_path = tmp_path / "spec.txt"
        out_path = tmp_path / "corpus.bin"
        _write_corpus_spec(spec_path)
        assert main(["gen", "--spec", str(spec_path), "--out", str(out_path)]) == 0
        samples, spec = read_corpus(str(out_path))
        assert len(samples) == 3 and spec.seed == 5

    def test_env_seed_override(self, tmp_path, monkeypatch):
        spec_path = tmp_path / "spec.txt"
        _write_corpus_spec(spec_path, seed=5)
        monkeypatch.setenv("ADAVSR_SEED", "99")
        out = tmp_path / "corpus.bin"
        assert main(["gen", "--spec", str(spec_path), "--out", str(out)]) == 0
        samples, spec = read_corpus(str(out))
        assert spec.seed == 99
        want = generate_corpus(CorpusSpec(n_samples=3, seed=99))
        assert samples[0].waveform.tobytes() == want[0].waveform.tobytes()

    def test_bad_env_seed_is_input_error(self, tmp_path, monkeypatch):
        spec_path = tmp_path / "spec.txt"
        _write_corpus_spec(spec_path)
        monkeypatch.setenv("ADAVSR_SEED", "not-a-number")
        assert main(["gen", "--spec", str(spec_path), "--out", str(tmp_path / "c.bin")]) == 1

    def test_unknown_spec_key_is_input_error(self, tmp_path):
        spec_path = tmp_path / "spec.txt"
        spec_path.write_text("volume=11\n")
        assert main(["gen", "--spec", str(spec_path), "--out", str(tmp_path / "c.bin")]) == 1

    def test_missing_spec_file_is_input_error(self, tmp_path):
        assert main(["gen", "--spec", str(tmp_path / "nope.txt"), "--out", str(tmp_path / "c.bin")]) == 1


class TestTrainEval:
    def test_full_flow(self, tmp_path):
        spec_path = tmp_path / "spec.txt"
        corpus_path = tmp_path / "corpus.bin"
        _write_corpus_spec(spec_path, n_samples=3)
        assert main(["gen", "--spec", str(spec_path), "--out", str(corpus_path)]) == 0

        config_path = tmp_path / "train.cfg"
        _write_train_config(config_path)
        ckpt = tmp_path / "ckpt"
        assert main(
            ["train", "--config", str(config_path), "--data", str(corpus_path), "--out", str(ckpt)]
        ) == 0
        assert (ckpt / "params.npz").exists()

        report = tmp_path / "report.csv"
        code = main(
            [
                "eval",
                "--checkpoint",
                str(ckpt),
                "--data",
                str(corpus_path),
                "--snr",
                "-5,clean",
                "--report",
                str(report),
            ]
        )
        assert code == 0
        lines = report.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "condition,wer,cer"
        assert [l.split(",")[0] for l in lines[1:]] == ["clean", "-5dB", "avg"]

    def test_eval_mask_dump(self, tmp_path):
        spec_path = tmp_path / "spec.txt"
        corpus_path = tmp_path / "corpus.bin"
        _write_corpus_spec(spec_path, n_samples=2)
        main(["gen", "--spec", str(spec_path), "--out", str(corpus_path)])
        config_path = tmp_path / "train.cfg"
        _write_train_config(config_path, epochs=0)
        ckpt = tmp_path / "ckpt"
        main(["train", "--config", str(config_path), "--data", str(corpus_path), "--out", str(ckpt)])
        masks = tmp_path / "masks"
        code = main(
            [
                "eval",
                "--checkpoint",
                str(ckpt),
                "--data",
                str(corpus_path),
                "--snr",
                "clean",
                "--report",
                str(tmp_path / "r.csv"),
                "--dump-masks",
                str(masks),
            ]
        )
        assert code == 0
        assert sorted(p.name for p in masks.iterdir()) == ["mask_0000.csv", "mask_0001.csv"]

    def test_bad_snr_is_input_error(self, tmp_path):
        assert (
            main(
                [
                    "eval",
                    "--checkpoint",
                    str(tmp_path),
                    "--data",
                    str(tmp_path / "x.bin"),
                    "--snr",
                    "soft",
                    "--report",
                    str(tmp_path / "r.csv"),
                ]
            )
            == 1
        )

    def test_unknown_config_key_is_input_error(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("mystery=4\n")
        assert (
            main(["train", "--config", str(cfg), "--data", str(tmp_path / "d.bin"), "--out", str(tmp_path / "o")])
            == 1
        )

    def test_numeric_failure_exit_code(self, tmp_path):
        # a corpus whose transcript cannot fit in the frame budget makes
        # training abort numerically -> exit code 2
        spec = CorpusSpec(n_samples=1, seed=0)
        good = generate_corpus(spec)[0]
        bad = RawSample(
            frames=good.frames,
            waveform=good.waveform,
            logmel=good.logmel,
            transcript=[1] * 13,
        )
        corpus_path = tmp_path / "bad.bin"
        write_corpus(str(corpus_path), [bad], spec)
        config_path = tmp_path / "train.cfg"
        _write_train_config(config_path)
        code = main(
            ["train", "--config", str(config_path), "--data", str(corpus_path), "--out", str(tmp_path / "o")]
        )
        assert code == 2


class TestAblateCommand:
    def test_plumbing_with_zero_epochs(self, tmp_path):
        config_path = tmp_path / "abl.cfg"
        _write_train_config(config_path, epochs=0, n_train=2, n_eval=2)
        out = tmp_path / "abl"
        assert main(["ablate", "--config", str(config_path), "--out", str(out), "--seeds", "1"]) == 0
        assert (out / "ablation_summary.csv").exists()
        lines = (out / "ablation_summary.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "variant,wer,cer,parameters"
        assert len(lines) == 9  # 7 variants + dual-wiring alias + header
