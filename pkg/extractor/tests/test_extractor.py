"""Extractor tests: preprocessing arithmetic, manifest parsing, encoder
determinism, and the cross-component smoke test in which generated media
is extracted to EMOF/EMOT files that the engine ingests."""

import csv
import math
import wave

import numpy as np
import pytest
from PIL import Image

from emoclim_extractor import audio as audio_ops
from emoclim_extractor import images as image_ops
from emoclim_extractor.cli import main
from emoclim_extractor.encoders import HistogramImageEncoder, MelStatsAudioEncoder, get_encoder
from emoclim_extractor.errors import EncoderLoadError, JobConfigError, ManifestError
from emoclim_extractor.jobs import ExtractorJob, extract, extract_tagged, top_tags
from emoclim_extractor.manifest import read_manifest

# The engine is the consumer of the emitted files; its reader is the
# authority on whether they parse.
from emoclim import data as engine_data

IMAGE_LABELS = ("amusement", "contentment", "excitement", "anger", "fear", "sadness")
MUSIC_LABELS = ("exciting", "funny", "happy", "angry", "sad", "scary")


def write_wav(path, seconds=10.0, sr=22050, freq=440.0, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(int(seconds * sr)) / sr
    x = 0.4 * np.sin(2 * math.pi * freq * t) + 0.05 * rng.standard_normal(t.size)
    pcm = (np.clip(x, -1, 1) * 32767).astype(np.int16)
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sr)
        fh.writeframes(pcm.tobytes())


def write_image(path, size=(320, 240), seed=0):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 256, (size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(arr, "RGB").save(str(path))


def write_manifest(path, rows, with_tags=False, with_split=False):
    fields = ["item_id", "media_path", "source_label"]
    if with_tags:
        fields.append("tags")
    if with_split:
        fields.append("split")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fields})


@pytest.fixture(scope="module")
def media(tmp_path_factory):
    """>= 50 generated items per modality with manifests."""
    root = tmp_path_factory.mktemp("media")
    audio_rows, image_rows = [], []
    for i in range(54):
        wav = root / f"clip{i:03d}.wav"
        write_wav(wav, seconds=10.0, sr=22050, freq=200 + 40 * (i % 10), seed=i)
        audio_rows.append({
            "item_id": f"clip-{i:03d}",
            "media_path": str(wav),
            "source_label": MUSIC_LABELS[i % 6],
            "tags": ";".join(f"tag{j}" for j in range(i % 5)),
            "split": "train" if i % 4 else "test",
        })
    for i in range(52):
        img = root / f"img{i:03d}.png"
        write_image(img, size=(280 + 10 * (i % 5), 250), seed=i)
        image_rows.append({
            "item_id": f"img-{i:03d}",
            "media_path": str(img),
            "source_label": IMAGE_LABELS[i % 6],
        })
    audio_manifest = root / "audio.csv"
    image_manifest = root / "images.csv"
    write_manifest(audio_manifest, audio_rows, with_tags=True, with_split=True)
    write_manifest(image_manifest, image_rows)
    return {"root": root, "audio_manifest": audio_manifest,
            "image_manifest": image_manifest, "audio_rows": audio_rows,
            "image_rows": image_rows}


class TestAudioOps:
    def test_wav_round_trip(self, tmp_path):
        path = tmp_path / "a.wav"
        write_wav(path, seconds=2.0, sr=16000)
        samples, sr = audio_ops.load_wav(str(path))
        assert sr == 16000
        assert samples.shape == (32000,)
        assert samples.dtype == np.float32
        assert np.max(np.abs(samples)) <= 1.0

    def test_resample_length(self):
        x = np.zeros(22050, dtype=np.float32)
        y = audio_ops.resample(x, 22050, 16000)
        assert abs(y.shape[0] - 16000) <= 1

    def test_five_windows_for_ten_seconds(self):
        sr = 16000
        x = np.zeros(10 * sr, dtype=np.float32)
        windows = audio_ops.sliding_windows(x, sr, 5.0, 0.75)
        assert len(windows) == 5
        assert all(w.shape == (5 * sr,) for w in windows)

    def test_window_counts_match_plan_arithmetic(self):
        sr = 16000
        for total_s, window_s, overlap in ((10.0, 3.69, 0.75), (10.0, 10.0, 0.75),
                                           (10.0, 2.5, 0.75), (7.3, 2.0, 0.5)):
            x = np.zeros(int(total_s * sr), dtype=np.float32)
            got = len(audio_ops.sliding_windows(x, sr, window_s, overlap))
            hop = window_s * (1 - overlap)
            expected = (1 if window_s >= total_s
                        else int(math.floor((total_s - window_s) / hop + 1e-9)) + 1)
            assert got == expected, (total_s, window_s, overlap)

    def test_short_clip_zero_padded(self):
        sr = 16000
        x = np.ones(sr, dtype=np.float32)  # 1 s clip, 5 s window
        windows = audio_ops.sliding_windows(x, sr, 5.0, 0.75)
        assert len(windows) == 1
        assert windows[0].shape == (5 * sr,)
        assert windows[0][sr:].sum() == 0.0


class TestImageOps:
    def test_resize_and_center_crop(self, tmp_path):
        path = tmp_path / "img.png"
        write_image(path, size=(400, 260))
        img = image_ops.load_image(str(path))
        resized = image_ops.resize_shortest_side(img)
        assert min(resized.size) == 224
        crop = image_ops.center_crop(resized)
        assert crop.size == (224, 224)

    def test_normalization_constants(self):
        gray = Image.new("RGB", (224, 224), (128, 128, 128))
        arr = image_ops.normalize(gray)
        assert arr.shape == (3, 224, 224)
        expected = (128 / 255 - image_ops.CLIP_MEAN) / image_ops.CLIP_STD
        assert np.allclose(arr[:, 0, 0], expected, atol=1e-6)

    def test_prepare_crops_counts(self, tmp_path):
        path = tmp_path / "img.png"
        write_image(path, size=(300, 240))
        img = image_ops.load_image(str(path))
        rng = np.random.default_rng(0)
        assert len(image_ops.prepare_crops(img, 0, rng)) == 1
        assert len(image_ops.prepare_crops(img, 4, rng)) == 5


class TestManifest:
    def test_parse_with_tags_and_split(self, media):
        rows = read_manifest(str(media["audio_manifest"]))
        assert len(rows) == 54
        assert rows[1].tags == ["tag0"]
        assert rows[0].split == "test"

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("item_id,media_path\na,b\n")
        with pytest.raises(ManifestError):
            read_manifest(str(path))

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("item_id,media_path,source_label\na,x,sad\na,y,sad\n")
        with pytest.raises(ManifestError):
            read_manifest(str(path))


class TestEncoders:
    def test_melstats_deterministic(self):
        enc = MelStatsAudioEncoder()
        rng = np.random.default_rng(0)
        windows = [rng.standard_normal(16000).astype(np.float32) for _ in range(3)]
        a = enc.encode(windows)
        b = enc.encode(windows)
        assert np.array_equal(a, b)
        assert a.shape == (3, enc.feature_dim)
        assert np.all(np.isfinite(a))

    def test_histogram_deterministic(self):
        enc = HistogramImageEncoder()
        rng = np.random.default_rng(1)
        crops = [rng.standard_normal((3, 224, 224)).astype(np.float32) for _ in range(2)]
        a = enc.encode(crops)
        assert np.array_equal(a, enc.encode(crops))
        assert a.shape == (2, enc.feature_dim)

    def test_unknown_encoder(self):
        with pytest.raises(EncoderLoadError):
            get_encoder("nonexistent")

    def test_window_mismatch_rejected(self, media, tmp_path):
        job = ExtractorJob(modality="audio", encoder="clap",
                           manifest_path=str(media["audio_manifest"]),
                           output_path=str(tmp_path / "x.emof"), window_s=5.0)
        try:
            with pytest.raises(JobConfigError):
                from emoclim_extractor.jobs import _resolve_window
                _resolve_window(job, get_encoder("clap"))
        except EncoderLoadError:
            pytest.skip("clap weights not available in this environment")


class TestSmoke:
    """Cross-component acceptance: extractor output feeds the engine."""

    def test_audio_pipeline(self, media, tmp_path):
        out = tmp_path / "audio.emof"
        job = ExtractorJob(modality="audio", encoder="melstats",
                           manifest_path=str(media["audio_manifest"]),
                           output_path=str(out), window_s=5.0, overlap=0.75)
        count = extract(job)
        assert count == 54

        modality, taxonomy, records = engine_data.read_feature_file(str(out))
        assert modality == engine_data.Modality.AUDIO
        assert len(records) == 54
        # 10 s clips, 5 s windows, 75% overlap -> 5 chunks each
        assert all(rec.chunks.shape[0] == 5 for rec in records)
        unified = engine_data.unify_records(taxonomy, records)
        assert {r.label for r in unified} == set(engine_data.UnifiedEmotion)
        split = engine_data.stratified_split(unified, seed=0)
        assert len(split.train + split.val + split.test) == len(unified)

    def test_image_pipeline_center_and_random(self, media, tmp_path):
        center = tmp_path / "img_center.emof"
        job = ExtractorJob(modality="image", encoder="histogram",
                           manifest_path=str(media["image_manifest"]),
                           output_path=str(center), crop_policy="center")
        assert extract(job) == 52
        _, _, records = engine_data.read_feature_file(str(center))
        assert all(rec.chunks.shape[0] == 1 for rec in records)

        randomized = tmp_path / "img_random.emof"
        job = ExtractorJob(modality="image", encoder="histogram",
                           manifest_path=str(media["image_manifest"]),
                           output_path=str(randomized), crop_policy="random",
                           n_random_crops=4, seed=1)
        assert extract(job) == 52
        _, _, records = engine_data.read_feature_file(str(randomized))
        assert all(rec.chunks.shape[0] == 5 for rec in records)

    def test_deterministic_output(self, media, tmp_path):
        blobs = []
        for name in ("a.emof", "b.emof"):
            out = tmp_path / name
            job = ExtractorJob(modality="image", encoder="histogram",
                               manifest_path=str(media["image_manifest"]),
                               output_path=str(out), crop_policy="random", seed=5)
            extract(job)
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]

    def test_unreadable_media_skipped(self, media, tmp_path):
        manifest = tmp_path / "broken.csv"
        rows = [dict(r) for r in media["audio_rows"][:3]]
        rows[1] = dict(rows[1], item_id="gone", media_path=str(tmp_path / "missing.wav"))
        write_manifest(manifest, rows)
        out = tmp_path / "skip.emof"
        job = ExtractorJob(modality="audio", encoder="melstats",
                           manifest_path=str(manifest), output_path=str(out),
                           window_s=5.0)
        assert extract(job) == 2
        _, _, records = engine_data.read_feature_file(str(out))
        assert [rec.item_id for rec in records] == [rows[0]["item_id"], rows[2]["item_id"]]

    def test_tagged_extraction_round_trip(self, media, tmp_path):
        out = tmp_path / "tagged.emof"
        tags_out = tmp_path / "tagged.emot"
        vocab_out = tmp_path / "tags.txt"
        job = ExtractorJob(modality="audio", encoder="melstats",
                           manifest_path=str(media["audio_manifest"]),
                           output_path=str(out), window_s=5.0)
        count, vocab = extract_tagged(job, str(tags_out), vocab_size=3,
                                      vocab_path=str(vocab_out))
        assert count == 54
        assert vocab == ["tag0", "tag1", "tag2"]  # frequency order by construction
        ids, matrix = engine_data.read_tag_file(str(tags_out))
        assert len(ids) == 54
        assert matrix.shape == (54, 3)
        # items with i % 5 == 0 carry no tags at all
        by_id = dict(zip(ids, matrix))
        assert by_id["clip-000"].sum() == 0
        assert by_id["clip-004"].sum() == 3
        assert vocab_out.read_text().splitlines() == vocab

    def test_split_out_feeds_engine(self, media, tmp_path):
        out = tmp_path / "s.emof"
        tags_out = tmp_path / "s.emot"
        split_out = tmp_path / "s_split.json"
        job = ExtractorJob(modality="audio", encoder="melstats",
                           manifest_path=str(media["audio_manifest"]),
                           output_path=str(out), window_s=5.0)
        extract_tagged(job, str(tags_out), vocab_size=3, split_path=str(split_out))
        split = engine_data.load_split(str(split_out))
        expected_train = [r["item_id"] for r in media["audio_rows"]
                          if r["split"] == "train"]
        assert split.train == expected_train
        assert not split.val
        assert len(split.test) == 54 - len(expected_train)

    def test_top_tags_uses_training_split(self, media):
        rows = read_manifest(str(media["audio_manifest"]))
        vocab_all = top_tags(rows, 50)
        train_only = [r for r in rows if r.split == "train"]
        counts = {}
        for row in train_only:
            for tag in row.tags:
                counts[tag] = counts.get(tag, 0) + 1
        expected = [t for t, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]
        assert vocab_all == expected[:50]


class TestFullCircle:
    def test_extracted_features_train_and_evaluate(self, media, tmp_path):
        """Extract both modalities, then run the engine's split -> train ->
        retrieval pipeline on the emitted files."""
        audio_out = tmp_path / "circle_audio.emof"
        image_out = tmp_path / "circle_images.emof"
        extract(ExtractorJob(modality="audio", encoder="melstats",
                             manifest_path=str(media["audio_manifest"]),
                             output_path=str(audio_out), window_s=5.0))
        extract(ExtractorJob(modality="image", encoder="histogram",
                             manifest_path=str(media["image_manifest"]),
                             output_path=str(image_out)))

        from emoclim.embedding import JointEmbedding
        from emoclim.evaluation import evaluate_retrieval
        from emoclim.training import TrainConfig, eval_embed_matrix, train

        _, _, image_records = engine_data.load_unified(str(image_out))
        _, _, audio_records = engine_data.load_unified(str(audio_out))
        image_split = engine_data.stratified_split(image_records, 0)
        audio_split = engine_data.stratified_split(audio_records, 0)
        cfg = TrainConfig(embed_dim=16, hidden_dim=32, batch_size=8, epochs=2,
                          dropout=0.0, seed=0)
        result = train(image_records, audio_records, image_split, audio_split, cfg)
        assert np.isfinite(result.best_val_loss)

        def pool(head, records, ids, modality):
            chosen = engine_data.select_records(records, ids)
            vectors = eval_embed_matrix(head, chosen)
            return [JointEmbedding(vectors[i], modality, r.label, r.item_id)
                    for i, r in enumerate(chosen)]

        report = evaluate_retrieval(
            pool(result.image_head, image_records, image_split.test,
                 engine_data.Modality.IMAGE),
            pool(result.audio_head, audio_records, audio_split.test,
                 engine_data.Modality.AUDIO), k=2)
        for res in report.directions.values():
            assert 0.0 <= res.macro_precision <= 1.0
            assert 0.0 <= res.macro_mrr <= 1.0


class TestCli:
    def test_extract_command(self, media, tmp_path):
        out = tmp_path / "cli.emof"
        assert main(["extract", "--manifest", str(media["image_manifest"]),
                     "--modality", "image", "--encoder", "histogram",
                     "--out", str(out)]) == 0
        _, _, records = engine_data.read_feature_file(str(out))
        assert len(records) == 52

    def test_extract_tagged_command(self, media, tmp_path):
        out = tmp_path / "cli_tagged.emof"
        tags_out = tmp_path / "cli_tagged.emot"
        assert main(["extract-tagged", "--manifest", str(media["audio_manifest"]),
                     "--modality", "audio", "--encoder", "melstats",
                     "--window", "5.0", "--out", str(out),
                     "--tags-out", str(tags_out), "--vocab-size", "4"]) == 0
        ids, matrix = engine_data.read_tag_file(str(tags_out))
        assert matrix.shape == (54, 4)

    def test_bad_encoder_exits_nonzero(self, media, tmp_path):
        assert main(["extract", "--manifest", str(media["image_manifest"]),
                     "--modality", "image", "--encoder", "bogus",
                     "--out", str(tmp_path / "x.emof")]) == 1
