"""End-to-end command-line pipeline: synth -> split -> train -> embed ->
eval-retrieval -> probe-tagging -> gradcheck, plus exit-code contracts."""

import json

import numpy as np
import pytest

from emoclim import data as d
from emoclim.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small synthetic corpus with splits and a trained checkpoint."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out-dir", str(root), "--seed", "3",
                 "--per-class", "20", "--image-dim", "12", "--audio-dim", "12"]) == 0
    ckpt = root / "ckpt.emoc"
    assert main(["train",
                 "--image-features", str(root / "image.emof"),
                 "--audio-features", str(root / "audio.emof"),
                 "--image-split", str(root / "image_split.json"),
                 "--audio-split", str(root / "audio_split.json"),
                 "--out", str(ckpt),
                 "--epochs", "2", "--batch-size", "8", "--embed-dim", "8",
                 "--dropout", "0.0", "--seed", "3"]) == 0
    return root


class TestSynth:
    def test_outputs_exist_and_parse(self, workspace):
        modality, taxonomy, records = d.read_feature_file(str(workspace / "image.emof"))
        assert modality == d.Modality.IMAGE
        assert len(records) == 120
        split = d.load_split(str(workspace / "image_split.json"))
        ids = {r.item_id for r in records}
        assert set(split.train + split.val + split.test) <= ids

    def test_same_seed_identical_files(self, tmp_path):
        dirs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["synth", "--out-dir", str(out), "--seed", "5",
                         "--per-class", "4"]) == 0
            dirs.append(out)
        for fname in ("image.emof", "audio.emof", "image_split.json"):
            assert (dirs[0] / fname).read_bytes() == (dirs[1] / fname).read_bytes()


class TestSplit:
    def test_valid_file(self, workspace, tmp_path):
        out = tmp_path / "split.json"
        assert main(["split", "--features", str(workspace / "audio.emof"),
                     "--seed", "1", "--out", str(out)]) == 0
        split = d.load_split(str(out))
        all_ids = split.train + split.val + split.test
        assert len(all_ids) == len(set(all_ids)) == 120

    def test_same_seed_identical(self, workspace, tmp_path):
        outs = []
        for name in ("s1.json", "s2.json"):
            out = tmp_path / name
            assert main(["split", "--features", str(workspace / "audio.emof"),
                         "--seed", "7", "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_corrupted_file_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.emof"
        bad.write_bytes(b"EMOF\x01\x00\x00\x00\x00")
        out = tmp_path / "split.json"
        assert main(["split", "--features", str(bad), "--seed", "0",
                     "--out", str(out)]) == 2
        assert "byte offset" in capsys.readouterr().err


class TestTrain:
    def test_zero_epochs_exits_3(self, workspace, tmp_path, capsys):
        code = main(["train",
                     "--image-features", str(workspace / "image.emof"),
                     "--audio-features", str(workspace / "audio.emof"),
                     "--image-split", str(workspace / "image_split.json"),
                     "--audio-split", str(workspace / "audio_split.json"),
                     "--out", str(tmp_path / "x.emoc"), "--epochs", "0"])
        assert code == 3
        assert "checkpoint" in capsys.readouterr().err

    def test_rerun_same_seed_byte_identical(self, workspace, tmp_path):
        blobs = []
        args_base = [
            "train",
            "--image-features", str(workspace / "image.emof"),
            "--audio-features", str(workspace / "audio.emof"),
            "--image-split", str(workspace / "image_split.json"),
            "--audio-split", str(workspace / "audio_split.json"),
            "--epochs", "2", "--batch-size", "8", "--embed-dim", "8", "--seed", "11",
        ]
        out = tmp_path / "same.emoc"
        for _ in range(2):
            assert main(args_base + ["--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_config_file_with_flag_override(self, workspace, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({
            "epochs": 1, "batch_size": 8, "embed_dim": 8, "seed": 2, "dropout": 0.0,
            "image_features": str(workspace / "image.emof"),
            "audio_features": str(workspace / "audio.emof"),
            "image_split": str(workspace / "image_split.json"),
            "audio_split": str(workspace / "audio_split.json"),
        }))
        out = tmp_path / "cfg.emoc"
        assert main(["train", "--config", str(cfg_path), "--out", str(out),
                     "--epochs", "2"]) == 0
        _, config = d.load_checkpoint(str(out))
        assert config["epochs"] == 2  # flag wins over file

    def test_unknown_config_key_exits_3(self, workspace, tmp_path, capsys):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text(json.dumps({"epochs": 1, "learning_rate": 1e-3}))
        assert main(["train", "--config", str(cfg_path),
                     "--out", str(tmp_path / "x.emoc")]) == 3
        assert "unknown config keys" in capsys.readouterr().err

    def test_log_jsonl_written(self, workspace):
        log = workspace / "ckpt.emoc.log.jsonl"
        lines = [json.loads(line) for line in log.read_text().splitlines()]
        assert [doc["epoch"] for doc in lines] == [1, 2]


class TestEvalRetrieval:
    def test_report_written(self, workspace, tmp_path):
        out = tmp_path / "report.json"
        csv = tmp_path / "report.csv"
        assert main(["eval-retrieval", "--ckpt", str(workspace / "ckpt.emoc"),
                     "--image-features", str(workspace / "image.emof"),
                     "--audio-features", str(workspace / "audio.emof"),
                     "--image-split", str(workspace / "image_split.json"),
                     "--audio-split", str(workspace / "audio_split.json"),
                     "--k", "2", "--out", str(out), "--csv", str(csv)]) == 0
        doc = json.loads(out.read_text())
        assert set(doc["directions"]) == {"image_to_audio", "audio_to_image",
                                          "image_to_image", "audio_to_audio"}
        for direction in doc["directions"].values():
            assert 0.0 <= direction["macro_p_at_2"] <= 1.0
            assert 0.0 <= direction["macro_mrr"] <= 1.0
        assert len(csv.read_text().splitlines()) == 2


class TestEmbed:
    def test_embeddings_unit_norm_and_consistent(self, workspace, tmp_path):
        out = tmp_path / "emb.emof"
        assert main(["embed", "--ckpt", str(workspace / "ckpt.emoc"),
                     "--features", str(workspace / "audio.emof"),
                     "--out", str(out)]) == 0
        modality, taxonomy, records = d.read_feature_file(str(out))
        assert modality == d.Modality.AUDIO
        assert all(rec.chunks.shape[0] == 1 for rec in records)
        norms = np.array([np.linalg.norm(rec.chunks[0]) for rec in records])
        assert np.max(np.abs(norms - 1.0)) < 1e-5

        # Equivalence with the in-process pipeline.
        from emoclim.training import eval_embed_matrix, heads_from_checkpoint
        tensors, config = d.load_checkpoint(str(workspace / "ckpt.emoc"))
        _, audio_head, _ = heads_from_checkpoint(tensors, config)
        _, _, source = d.read_feature_file(str(workspace / "audio.emof"))
        direct = eval_embed_matrix(audio_head, source)
        stored = np.stack([rec.chunks[0] for rec in records])
        assert np.allclose(direct, stored, atol=1e-6)

    def test_empty_input_valid_empty_output(self, workspace, tmp_path):
        empty_in = tmp_path / "empty.emof"
        d.write_feature_file(str(empty_in), d.Modality.AUDIO, d.MUSIC_TAXONOMY,
                             [], feature_dim=12)
        out = tmp_path / "empty_out.emof"
        assert main(["embed", "--ckpt", str(workspace / "ckpt.emoc"),
                     "--features", str(empty_in), "--out", str(out)]) == 0
        _, _, records = d.read_feature_file(str(out))
        assert records == []


class TestProbeTagging:
    def test_smoke(self, workspace, tmp_path):
        # Tag items by a linear rule over their features so the probe can fit.
        _, _, records = d.read_feature_file(str(workspace / "audio.emof"))
        rng = np.random.default_rng(0)
        w = rng.standard_normal((6, 12))
        ids = [rec.item_id for rec in records]
        tags = np.stack([(w @ rec.chunks[0] > 0).astype(np.uint8) for rec in records])
        tags_path = tmp_path / "tags.emot"
        d.write_tag_file(str(tags_path), ids, tags)
        out = tmp_path / "metrics.json"
        assert main(["probe-tagging", "--ckpt", str(workspace / "ckpt.emoc"),
                     "--tagged-features", str(workspace / "audio.emof"),
                     "--tags", str(tags_path),
                     "--split", str(workspace / "audio_split.json"),
                     "--out", str(out), "--hidden", "32", "--epochs", "40"]) == 0
        doc = json.loads(out.read_text())
        assert 0.0 <= doc["macro_roc_auc"] <= 1.0
        assert doc["n_tags"] == 6


class TestGradcheck:
    def test_passes_and_prints_number(self, capsys):
        assert main(["gradcheck", "--seed", "0", "--n-seeds", "2"]) == 0
        out = capsys.readouterr().out
        assert "max rel error" in out
        assert "verified" in out
        # a parseable number appears on the worst line
        worst_line = [line for line in out.splitlines() if line.startswith("worst")][0]
        float(worst_line.rsplit(" ", 1)[-1])

    def test_perturbed_gradient_fails(self, capsys):
        assert main(["gradcheck", "--seed", "0", "--n-seeds", "1",
                     "--perturb", "0.01"]) == 1
        assert "FAILED" in capsys.readouterr().out


class TestHelp:
    def test_lists_defaults(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--batch-size" in out and "default" in out
