from __future__ import annotations

import hashlib
import json

import pytest

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from pluralsem.cli import build_parser, derive_seed, main


def _run(argv):
    return main([str(a) for a in argv])


def _synth_corpus(root, seed=5, audio="waveform", n_lexemes=6):
    corpus_dir = root / "corpus"
    rc = _run(["synth", "--out", corpus_dir, "--seed", seed,
               "--n-lexemes", n_lexemes, "--n-classes", 2, "--dim", 4,
               "--audio-mode", audio, "--min-tokens-per-type", 2,
               "--target-total-tokens", 4 * n_lexemes])
    assert rc == 0
    return corpus_dir


def _extract(root, corpus_dir, seed=5, extra=()):
    feat_dir = root / "features"
    rc = _run(["extract", "--manifest", corpus_dir, "--out", feat_dir,
               "--seed", seed, "--n-bands", 4, "--sample-len", 5,
               "--threads", 2, *extra])
    assert rc == 0
    return feat_dir


# ---------------------------------------------------------------------------
# seed derivation

def test_derive_seed_is_stable_and_stream_separated():
    a = derive_seed(0, "features")
    assert a == derive_seed(0, "features")
    assert a != derive_seed(1, "features")
    assert a != derive_seed(0, "folds")
    assert 0 <= a < 2 ** 63
    digest = hashlib.sha256(b"0:features").digest()
    assert a == int.from_bytes(digest[:8], "big") % (2 ** 63)


# ---------------------------------------------------------------------------
# parser basics

def test_version_flag_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "pluralsem" in capsys.readouterr().out


def test_missing_subcommand_exits_two():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_parser_lists_all_subcommands():
    parser = build_parser()
    subactions = [a for a in parser._actions
                  if hasattr(a, "choices") and a.choices]
    names = set(subactions[0].choices)
    assert names == {"synth", "extract", "conceptualize", "cv",
                     "distance-study", "export-shifts"}


# ---------------------------------------------------------------------------
# error exits

def test_missing_manifest_exits_two(tmp_path, capsys):
    rc = _run(["extract", "--manifest", tmp_path / "nope",
               "--out", tmp_path / "out"])
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_missing_out_exits_two(tmp_path, capsys):
    corpus_dir = _synth_corpus(tmp_path, audio="none")
    rc = _run(["conceptualize", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt"])
    assert rc == 2


def test_oversized_k_exits_two(tmp_path, capsys):
    corpus_dir = _synth_corpus(tmp_path, audio="waveform")
    feat_dir = _extract(tmp_path, corpus_dir)
    rc = _run(["cv", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--features", feat_dir / "features.bin",
               "--out", tmp_path / "cv", "--k", 50])
    assert rc == 2
    assert "TypeTooRare" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# the full pipeline

def test_pipeline_end_to_end(tmp_path, capsys):
    corpus_dir = _synth_corpus(tmp_path)
    for name in ("types.csv", "tokens.csv", "embeddings.txt",
                 "truth.json", "config.toml"):
        assert (corpus_dir / name).is_file()

    feat_dir = _extract(tmp_path, corpus_dir)
    for name in ("features.bin", "features.bin.rows.csv",
                 "features.bin.config.json", "extraction_report.json",
                 "config.toml"):
        assert (feat_dir / name).is_file()
    report = json.loads((feat_dir / "extraction_report.json").read_text())
    assert report["n_failed"] == 0
    assert report["n_rows"] == report["n_tokens"] == 24

    # conceptualize with the class-shift method
    cca_dir = tmp_path / "cca"
    rc = _run(["conceptualize", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--out", cca_dir, "--method", "cca"])
    assert rc == 0
    assert (cca_dir / "shift_table.json").is_file()
    assert (cca_dir / "predicted_plurals.txt").is_file()
    assert json.loads((cca_dir / "report.json").read_text())["n_pairs"] == 6

    # and with the global linear map
    fracss_dir = tmp_path / "fracss"
    rc = _run(["conceptualize", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--out", fracss_dir, "--method", "fracss"])
    assert rc == 0
    assert (fracss_dir / "map.bin").is_file()

    # cross validation on one gold space
    cv_dir = tmp_path / "cv"
    rc = _run(["cv", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--features", feat_dir / "features.bin",
               "--out", cv_dir, "--k", 2, "--gold-space", "word2vec",
               "--permutation-control"])
    assert rc == 0
    assert (cv_dir / "folds.json").is_file()
    assert (cv_dir / "permutation.json").is_file()
    summary = json.loads((cv_dir / "summary.json").read_text())
    assert summary["k"] == 2
    assert list(summary["spaces"]) == ["word2vec"]
    assert "permutation_deltas" in summary["spaces"]["word2vec"]
    for fold in (1, 2):
        fold_dir = cv_dir / f"fold{fold}"
        for name in ("map.bin", "report_train.json", "report_test.json"):
            assert (fold_dir / name).is_file()

    # all spaces at once get one directory each
    all_dir = tmp_path / "cv_all"
    rc = _run(["cv", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--features", feat_dir / "features.bin",
               "--out", all_dir, "--k", 2])
    assert rc == 0
    summary = json.loads((all_dir / "summary.json").read_text())
    assert sorted(summary["spaces"]) == ["cca", "fracss", "word2vec"]
    for space in ("word2vec", "cca", "fracss"):
        assert (all_dir / space / "fold1" / "report_test.json").is_file()

    # shift export, both directory and file forms
    rc = _run(["export-shifts", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--out", tmp_path / "shifts"])
    assert rc == 0
    assert (tmp_path / "shifts" / "shifts.csv").is_file()
    rc = _run(["export-shifts", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--out", tmp_path / "direct.csv"])
    assert rc == 0
    assert (tmp_path / "direct.csv").is_file()

    # distance studies in all three modes
    phone_dir = tmp_path / "phone"
    rc = _run(["distance-study", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--out", phone_dir, "--mode", "phone", "--seed", 5])
    assert rc == 0
    assert (phone_dir / "study.json").is_file()
    assert (phone_dir / "trials.csv").is_file()
    doc = json.loads((phone_dir / "study.json").read_text())
    assert doc["mode"] == "phone"
    assert sorted(doc["spaces"]) == ["cca", "fracss", "word2vec"]

    audio_dir = tmp_path / "audio_study"
    rc = _run(["distance-study", "--manifest", corpus_dir,
               "--embeddings", corpus_dir / "embeddings.txt",
               "--features", feat_dir / "features.bin",
               "--out", audio_dir, "--mode", "audio", "--trials", 3,
               "--seed", 5])
    assert rc == 0
    doc = json.loads((audio_dir / "study.json").read_text())
    assert doc["mode"] == "audio"
    assert doc["n_trials"] == 3

    avp_dir = tmp_path / "avp"
    rc = _run(["distance-study", "--manifest", corpus_dir,
               "--features", feat_dir / "features.bin",
               "--out", avp_dir, "--mode", "audio-vs-phone"])
    assert rc == 0
    assert (avp_dir / "bins.csv").is_file()
    capsys.readouterr()


# ---------------------------------------------------------------------------
# reproducibility of artifacts

def test_synth_and_extract_deterministic(tmp_path):
    c1 = _synth_corpus(tmp_path / "run1")
    c2 = _synth_corpus(tmp_path / "run2")
    for name in ("types.csv", "tokens.csv", "embeddings.txt", "truth.json"):
        assert (c1 / name).read_bytes() == (c2 / name).read_bytes()
    f1 = _extract(tmp_path / "run1", c1)
    f2 = _extract(tmp_path / "run2", c2)
    assert (f1 / "features.bin").read_bytes() == (f2 / "features.bin").read_bytes()
    assert (f1 / "features.bin.rows.csv").read_bytes() == \
        (f2 / "features.bin.rows.csv").read_bytes()


def test_cv_deterministic(tmp_path):
    corpus_dir = _synth_corpus(tmp_path)
    feat_dir = _extract(tmp_path, corpus_dir)
    outs = []
    for run in ("cv1", "cv2"):
        out = tmp_path / run
        rc = _run(["cv", "--manifest", corpus_dir,
                   "--embeddings", corpus_dir / "embeddings.txt",
                   "--features", feat_dir / "features.bin",
                   "--out", out, "--k", 2, "--gold-space", "cca", "--seed", 3])
        assert rc == 0
        outs.append(out)
    assert (outs[0] / "summary.json").read_bytes() == \
        (outs[1] / "summary.json").read_bytes()
    assert (outs[0] / "folds.json").read_bytes() == \
        (outs[1] / "folds.json").read_bytes()


# ---------------------------------------------------------------------------
# configuration resolution

def test_config_file_supplies_values(tmp_path):
    corpus_dir = _synth_corpus(tmp_path, audio="waveform")
    cfg_path = tmp_path / "run.toml"
    cfg_path.write_text('seed = 9\n\n[extract]\nn_bands = 3\n', encoding="utf-8")
    out = tmp_path / "feat_cfg"
    rc = _run(["extract", "--manifest", corpus_dir, "--out", out,
               "--config", cfg_path])
    assert rc == 0
    resolved = tomllib.loads((out / "config.toml").read_text())
    assert resolved["run"]["seed"] == 9
    assert resolved["run"]["command"] == "extract"
    assert resolved["run"]["tool"] == "pluralsem"
    assert resolved["params"]["n_bands"] == 3


def test_cli_flag_overrides_config_file(tmp_path):
    corpus_dir = _synth_corpus(tmp_path, audio="waveform")
    cfg_path = tmp_path / "run.toml"
    cfg_path.write_text('[extract]\nn_bands = 3\n', encoding="utf-8")
    out = tmp_path / "feat_cfg"
    rc = _run(["extract", "--manifest", corpus_dir, "--out", out,
               "--config", cfg_path, "--n-bands", 6])
    assert rc == 0
    resolved = tomllib.loads((out / "config.toml").read_text())
    assert resolved["params"]["n_bands"] == 6
    report = json.loads((out / "extraction_report.json").read_text())
    cfg_doc = json.loads((out / "features.bin.config.json").read_text())
    assert cfg_doc["n_bands"] == 6
    assert report["per_chunk_dim"] == 6 * 20 + 21  # default sample_len 20


def test_bad_config_file_exits_two(tmp_path, capsys):
    corpus_dir = _synth_corpus(tmp_path, audio="none")
    cfg_path = tmp_path / "broken.toml"
    cfg_path.write_text("[extract\n", encoding="utf-8")
    rc = _run(["extract", "--manifest", corpus_dir,
               "--out", tmp_path / "x", "--config", cfg_path])
    assert rc == 2
