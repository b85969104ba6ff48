"""Tests for WAV I/O, the four augmentation transforms, and the dataset pipeline."""

import json
import struct
import wave

import numpy as np
import pytest

from helpers import dominant_frequency, make_tone

from langwce.audio import (
    AudioClip,
    AugmentSpec,
    add_gaussian_noise,
    apply_gain,
    augment_clip,
    augment_dataset,
    pitch_shift,
    read_wav,
    time_stretch,
    write_wav,
)
from langwce.manifest import ManifestEntry, read_manifest, resolve_wav, write_manifest
from langwce.util import DataFormatError

FRAME = 400  # 25 ms at 16 kHz


class TestWavIO:
    def test_zero_clip_round_trips_exactly(self, tmp_path):
        clip = AudioClip(16000, np.zeros(16000))
        write_wav(tmp_path / "z.wav", clip)
        back = read_wav(tmp_path / "z.wav")
        assert back.sample_rate == 16000
        assert np.array_equal(back.samples, clip.samples)

    def test_random_clip_round_trips_within_quantum(self, tmp_path):
        rng = np.random.default_rng(0)
        clip = AudioClip(16000, rng.uniform(-1, 1, 8000))
        write_wav(tmp_path / "r.wav", clip)
        back = read_wav(tmp_path / "r.wav")
        assert np.abs(back.samples - clip.samples).max() <= 1.0 / 32768

    def test_full_scale_values_survive(self, tmp_path):
        clip = AudioClip(16000, np.array([1.0, -1.0, 0.999999]))
        write_wav(tmp_path / "f.wav", clip)
        back = read_wav(tmp_path / "f.wav")
        assert np.abs(back.samples - clip.samples).max() <= 1.0 / 32768

    def test_eight_bit_rejected(self, tmp_path):
        path = tmp_path / "8bit.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(1)
            w.setframerate(16000)
            w.writeframes(bytes(100))
        with pytest.raises(DataFormatError, match="16-bit"):
            read_wav(path)

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "stereo.wav"
        with wave.open(str(path), "wb") as w:
            w.setnchannels(2)
            w.setsampwidth(2)
            w.setframerate(16000)
            w.writeframes(bytes(400))
        with pytest.raises(DataFormatError, match="mono"):
            read_wav(path)

    def test_non_pcm_rejected(self, tmp_path):
        # minimal RIFF/WAVE with fmt audio format 3 (IEEE float)
        path = tmp_path / "float.wav"
        fmt = struct.pack("<HHIIHH", 3, 1, 16000, 64000, 4, 32)
        body = b"WAVEfmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", 0)
        path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
        with pytest.raises(DataFormatError):
            read_wav(path)

    def test_truncated_header_rejected(self, tmp_path):
        path = tmp_path / "trunc.wav"
        path.write_bytes(b"RIFF\x10\x00\x00\x00WAVE")
        with pytest.raises(DataFormatError):
            read_wav(path)


class TestApplyGain:
    def test_zero_db_is_identity(self):
        clip = make_tone(500)
        out = apply_gain(clip, 0.0)
        np.testing.assert_array_equal(out.samples, clip.samples)

    def test_six_db_doubles(self):
        clip = make_tone(500, amplitude=0.4)
        out = apply_gain(clip, 20 * np.log10(2))
        np.testing.assert_allclose(out.samples, 2.0 * clip.samples, rtol=0, atol=1e-9)

    def test_hard_clip_at_unity(self):
        clip = AudioClip(16000, np.array([0.8, -0.8, 0.1]))
        out = apply_gain(clip, 6.0206)
        # 0.8 doubles to 1.6 and clamps at the write bound
        np.testing.assert_allclose(out.samples, [1.0, -1.0, 0.2], atol=1e-9)

    def test_non_finite_gain_rejected(self):
        with pytest.raises(ValueError):
            apply_gain(make_tone(500), float("nan"))


class TestGaussianNoise:
    def test_zero_sigma_is_identity(self):
        clip = make_tone(700)
        out = add_gaussian_noise(clip, 0.0, seed=1)
        np.testing.assert_array_equal(out.samples, clip.samples)

    def test_seed_determinism(self):
        clip = make_tone(700)
        a = add_gaussian_noise(clip, 0.01, seed=42)
        b = add_gaussian_noise(clip, 0.01, seed=42)
        assert np.array_equal(a.samples, b.samples)
        c = add_gaussian_noise(clip, 0.01, seed=43)
        assert not np.array_equal(a.samples, c.samples)

    def test_sample_std_matches_sigma(self):
        silent = AudioClip(16000, np.zeros(16000))
        out = add_gaussian_noise(silent, 0.01, seed=7)
        assert out.samples.std() == pytest.approx(0.01, rel=0.05)

    def test_energy_bound(self):
        clip = make_tone(500, amplitude=0.5)
        sigma = 0.01
        out = add_gaussian_noise(clip, sigma, seed=3)
        rms_in2 = float(np.mean(clip.samples**2))
        rms_out2 = float(np.mean(out.samples**2))
        assert rms_out2 <= (rms_in2 + sigma**2) * 1.1

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            add_gaussian_noise(make_tone(500), -0.01, seed=0)


class TestTimeStretch:
    def test_identity_rate(self):
        clip = make_tone(500)
        out = time_stretch(clip, 1.0)
        assert len(out) == len(clip)
        np.testing.assert_allclose(out.samples, clip.samples, atol=1e-9)
        assert dominant_frequency(out) == pytest.approx(500, rel=0.02)

    def test_double_rate_halves_duration(self):
        clip = make_tone(500, seconds=1.0)
        out = time_stretch(clip, 2.0)
        assert abs(len(out) - 8000) <= FRAME
        assert dominant_frequency(out) == pytest.approx(500, rel=0.02)

    def test_slowdown(self):
        clip = make_tone(700, seconds=1.0)
        out = time_stretch(clip, 0.8)
        assert abs(len(out) - 20000) <= FRAME
        assert dominant_frequency(out) == pytest.approx(700, rel=0.02)

    @pytest.mark.parametrize("rate", [0.5, 0.75, 1.25, 2.0])
    def test_round_trip_duration(self, rate):
        clip = make_tone(900, seconds=0.7)
        out = time_stretch(time_stretch(clip, rate), 1.0 / rate)
        assert abs(len(out) - len(clip)) <= 2 * FRAME

    def test_out_of_range_rate_rejected(self):
        with pytest.raises(ValueError):
            time_stretch(make_tone(500), 0.4)
        with pytest.raises(ValueError):
            time_stretch(make_tone(500), 2.5)

    def test_deterministic(self):
        clip = make_tone(1100)
        assert np.array_equal(time_stretch(clip, 1.3).samples, time_stretch(clip, 1.3).samples)

    def test_output_clipped(self):
        rng = np.random.default_rng(5)
        clip = AudioClip(16000, np.clip(rng.normal(0, 0.7, 16000), -1, 1))
        assert np.abs(time_stretch(clip, 0.8).samples).max() <= 1.0


class TestPitchShift:
    def test_zero_semitones_identity(self):
        clip = make_tone(500)
        out = pitch_shift(clip, 0)
        assert len(out) == len(clip)
        np.testing.assert_array_equal(out.samples, clip.samples)

    def test_octave_up(self):
        clip = make_tone(500, seconds=1.0)
        out = pitch_shift(clip, 12)
        assert abs(len(out) - len(clip)) <= 0.01 * len(clip)
        assert dominant_frequency(out) == pytest.approx(1000, rel=0.02)

    def test_octave_down(self):
        clip = make_tone(900, seconds=1.0)
        out = pitch_shift(clip, -12)
        assert abs(len(out) - len(clip)) <= 0.01 * len(clip)
        assert dominant_frequency(out) == pytest.approx(450, rel=0.02)

    @pytest.mark.parametrize("semitones", [-2, 1, 2])
    def test_small_shifts(self, semitones):
        clip = make_tone(700, seconds=1.0)
        out = pitch_shift(clip, semitones)
        expected = 700 * 2 ** (semitones / 12)
        assert dominant_frequency(out) == pytest.approx(expected, rel=0.02)
        assert abs(len(out) - len(clip)) <= 0.01 * len(clip)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            pitch_shift(make_tone(500), 13)


class TestAugmentClip:
    def test_collapsed_spec_is_identity(self):
        spec = AugmentSpec(
            stretch_range=(1.0, 1.0),
            gain_range_db=(0.0, 0.0),
            pitch_range_semitones=(0, 0),
            noise_sigma_range=(0.0, 0.0),
        )
        clip = make_tone(500)
        out = augment_clip(clip, spec, sample_seed=11)
        assert len(out) == len(clip)
        np.testing.assert_allclose(out.samples, clip.samples, atol=1e-9)

    def test_same_seed_bit_identical(self):
        clip = make_tone(900)
        spec = AugmentSpec()
        a = augment_clip(clip, spec, sample_seed=21)
        b = augment_clip(clip, spec, sample_seed=21)
        assert np.array_equal(a.samples, b.samples)
        c = augment_clip(clip, spec, sample_seed=22)
        assert not np.array_equal(a.samples, c.samples)

    def test_duration_bounded_by_stretch_range(self):
        clip = make_tone(700)
        out = augment_clip(clip, AugmentSpec(), sample_seed=31)
        assert len(clip) / 1.1 - FRAME <= len(out) <= len(clip) / 0.9 + FRAME

    def test_output_respects_write_bound(self):
        clip = make_tone(500, amplitude=0.9)
        for seed in range(5):
            out = augment_clip(clip, AugmentSpec(), sample_seed=seed)
            assert np.abs(out.samples).max() <= 1.0


def build_tiny_corpus(root, layout):
    """layout: list of (id, lang, split, freq); writes tones and a manifest."""
    entries = []
    for utt_id, lang, split, freq in layout:
        rel = f"{split}/{lang}/{utt_id}.wav"
        write_wav(root / rel, make_tone(freq, seconds=0.3))
        entries.append(ManifestEntry(id=utt_id, lang=lang, text="AB", wav=rel, split=split))
    return write_manifest(root / "manifest.jsonl", entries)


class TestAugmentDataset:
    LAYOUT = [
        ("ft-L0-0", "L0", "finetune", 500),
        ("ft-L0-1", "L0", "finetune", 700),
        ("ft-L1-0", "L1", "finetune", 900),
        ("test-L0-0", "L0", "test", 1100),
    ]

    def test_doubles_selected_entries(self, tmp_path):
        manifest = build_tiny_corpus(tmp_path / "corpus", self.LAYOUT)
        result = augment_dataset(
            manifest, tmp_path / "aug", AugmentSpec(), seed=5, languages={"L0"}, splits={"finetune"}
        )
        assert result.n_originals == 4
        assert result.n_augmented == 2
        assert not result.failures
        entries = read_manifest(result.manifest_path)
        assert len(entries) == 6
        aug = [e for e in entries if e.augmented]
        assert {e.id for e in aug} == {"ft-L0-0-aug1", "ft-L0-1-aug1"}
        assert all(e.split == "finetune" and e.lang == "L0" for e in aug)
        for e in entries:
            assert resolve_wav(result.manifest_path, e).exists()

    def test_empty_selection_keeps_manifest_content(self, tmp_path):
        manifest = build_tiny_corpus(tmp_path / "corpus", self.LAYOUT)
        result = augment_dataset(manifest, tmp_path / "aug", AugmentSpec(), seed=5, languages={"ZZ"})
        entries = read_manifest(result.manifest_path)
        originals = read_manifest(manifest)
        assert [e.id for e in entries] == [e.id for e in originals]
        assert [resolve_wav(result.manifest_path, e) for e in entries] == [
            resolve_wav(manifest, e) for e in originals
        ]

    def test_rerun_is_byte_identical_and_order_independent(self, tmp_path):
        manifest = build_tiny_corpus(tmp_path / "corpus", self.LAYOUT)
        r1 = augment_dataset(manifest, tmp_path / "a", AugmentSpec(), seed=9, languages={"L0"})
        # rewrite the manifest with lines reversed, then rerun with the same seed
        shuffled = read_manifest(manifest)[::-1]
        manifest2 = write_manifest(tmp_path / "corpus" / "manifest.jsonl", shuffled)
        r2 = augment_dataset(manifest2, tmp_path / "b", AugmentSpec(), seed=9, languages={"L0"})
        for e in read_manifest(r1.manifest_path):
            if e.augmented:
                a = resolve_wav(r1.manifest_path, e).read_bytes()
                b = (tmp_path / "b" / e.wav).read_bytes()
                assert a == b

    def test_unreadable_entry_is_recorded_and_skipped(self, tmp_path):
        manifest = build_tiny_corpus(tmp_path / "corpus", self.LAYOUT)
        entries = read_manifest(manifest)
        entries.append(ManifestEntry(id="ghost", lang="L0", text="A", wav="finetune/L0/ghost.wav", split="finetune"))
        write_manifest(manifest, entries)
        result = augment_dataset(manifest, tmp_path / "aug", AugmentSpec(), seed=1, languages={"L0"})
        assert [f[0] for f in result.failures] == ["ghost"]
        assert result.n_augmented == 3

    def test_multiplier(self, tmp_path):
        manifest = build_tiny_corpus(tmp_path / "corpus", self.LAYOUT[:1])
        result = augment_dataset(manifest, tmp_path / "aug", AugmentSpec(), seed=2, multiplier=3)
        assert result.n_augmented == 3
        assert {e.id for e in read_manifest(result.manifest_path) if e.augmented} == {
            "ft-L0-0-aug1",
            "ft-L0-0-aug2",
            "ft-L0-0-aug3",
        }


class TestManifest:
    def test_round_trip(self, tmp_path):
        entries = [ManifestEntry(id="a", lang="L0", text="AB", wav="x/a.wav", split="test")]
        path = write_manifest(tmp_path / "m.jsonl", entries)
        assert read_manifest(path) == entries

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"id": "a", "lang": "L0"}) + "\n")
        with pytest.raises(DataFormatError):
            read_manifest(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{not json\n")
        with pytest.raises(DataFormatError):
            read_manifest(path)
