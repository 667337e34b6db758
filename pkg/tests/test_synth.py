import numpy as np
import pytest

from avfuse.config import DSP_CONFIG, SynthConfig
from avfuse.core.rng import make_rng
from avfuse.exceptions import InvalidArgumentError
from avfuse.fusion.enums import LayerKind, Modality
from avfuse.fusion.layers import correlation_scores, fuse_unimodal, top_k_steps
from avfuse.storage.manifest import load_samples, read_dataset_info
from avfuse.synth.dataset import gen_dataset, manifest_path, split_sizes
from avfuse.synth.generator import (
    CLICK_AMPLITUDE,
    category_kinds,
    class_prototypes,
    gen_click_pcm,
    gen_event_pair,
    gen_multi_event_pair,
    gen_planted_grid,
    gen_tone_pcm,
    make_event_spec,
)
from avfuse.synth.schemas import EventSpec


@pytest.fixture
def quiet(small_synth):
    return small_synth.model_copy(update={"noise_std": 0.0})


class TestPrototypes:
    def test_orthonormal(self, small_synth):
        video, audio = class_prototypes(small_synth)
        np.testing.assert_allclose(video @ video.T, np.eye(small_synth.C), atol=1e-12)
        np.testing.assert_allclose(audio @ audio.T, np.eye(small_synth.C), atol=1e-12)

    def test_read_only(self, small_synth):
        video, _ = class_prototypes(small_synth)
        with pytest.raises(ValueError):
            video[0, 0] = 1.0

    def test_distinct_widths(self):
        cfg = SynthConfig(T=10, video_dim=6, audio_dim=8, C=4, planted_instants=2)
        video, audio = class_prototypes(cfg)
        assert video.shape == (4, 6) and audio.shape == (4, 8)
        np.testing.assert_allclose(audio @ audio.T, np.eye(4), atol=1e-12)


def test_even_allocation(small_synth):
    kinds = category_kinds(small_synth)
    assert kinds == [kind for kind in LayerKind for _ in range(2)]


class TestEventPair:
    def test_instant_peak_at_planted_step(self, small_synth):
        cfg = small_synth.model_copy(update={"planted_instants": 1})
        video_proto, audio_proto = class_prototypes(cfg)
        for seed in range(20):
            spec = make_event_spec(LayerKind.INSTANT, 3, cfg, seed)
            sample = gen_event_pair(spec, cfg, seed)
            (step,) = spec.planted_steps
            projection = sample.video_raw.values @ video_proto[3]
            assert int(np.argmax(projection)) == step
            assert np.count_nonzero(projection == projection.max()) == 1
            assert int(np.argmax(sample.audio_raw.values @ audio_proto[3])) == step

    @pytest.mark.parametrize("noise_std", [0.0, 0.1, 0.29])
    def test_planted_steps_top_the_correlation_scores(self, small_synth, noise_std):
        cfg = small_synth.model_copy(update={"noise_std": noise_std})
        assert noise_std < 0.1 * cfg.correlation_strength
        for seed in range(20):
            spec = make_event_spec(LayerKind.INSTANT, 2, cfg, seed)
            sample = gen_event_pair(spec, cfg, seed)
            scores = correlation_scores(sample.video_raw, sample.audio_raw)
            assert top_k_steps(scores, len(spec.planted_steps)).tolist() == list(spec.planted_steps)

    def test_visual_event_leaves_audio_silent(self, quiet):
        video_proto, _ = class_prototypes(quiet)
        sample = gen_event_pair(make_event_spec(LayerKind.VISUAL, 6, quiet, 0), quiet, seed=1)
        assert np.all(sample.audio_raw.values == 0)
        fused = fuse_unimodal(sample.video_raw, Modality.VIDEO)
        np.testing.assert_allclose(fused[: quiet.video_dim], quiet.correlation_strength * video_proto[6])
        assert np.all(fused[quiet.video_dim :] == 0)

    def test_distractor_layout(self, quiet):
        cfg = quiet.model_copy(update={"distractor_strength": 2.0})
        video_proto, audio_proto = class_prototypes(cfg)
        kinds = category_kinds(cfg)
        continuous = {c for c, k in enumerate(kinds) if k is LayerKind.CONTINUOUS}
        for kind, silent, proto, opposite in (
            (LayerKind.VISUAL, "audio_raw", audio_proto, LayerKind.AUDIO),
            (LayerKind.AUDIO, "video_raw", video_proto, LayerKind.VISUAL),
        ):
            cls = kinds.index(kind)
            for seed in range(10):
                values = getattr(gen_event_pair(make_event_spec(kind, cls, cfg, 0), cfg, seed=seed), silent).values
                np.testing.assert_allclose(values, np.tile(values[0], (cfg.T, 1)))
                projection = values[0] @ proto.T
                assert {int(np.argmax(projection)), int(np.argmin(projection))} == continuous
                assert sorted(projection[list(continuous)]) == pytest.approx([-2.0, 2.0])
                (other,) = np.flatnonzero(np.isclose(projection, -1.0))
                assert kinds[other] is opposite
                np.testing.assert_allclose(np.delete(projection, [*continuous, other]), 0.0, atol=1e-12)

    def test_wrong_modality_is_at_chance(self, small_synth):
        # Nearest class mean on time-pooled features, fitted and scored on visual-kind samples only
        cfg = small_synth.model_copy(update={"distractor_strength": 3.0})
        kinds = category_kinds(cfg)
        visual = np.array([c for c, k in enumerate(kinds) if k is LayerKind.VISUAL])
        specs = {int(c): make_event_spec(LayerKind.VISUAL, int(c), cfg, 0) for c in visual}
        splits = [
            [gen_event_pair(specs[c], cfg, seed=10_000 * split + 1000 * c + i) for c in specs for i in range(200)]
            for split in range(2)
        ]

        for attr, lo, hi in (("audio_raw", 0.4, 0.6), ("video_raw", 0.99, 1.0)):
            fit, score = ([getattr(s, attr).values.mean(axis=0) for s in part] for part in splits)
            fit_y = np.array([s.y for s in splits[0]])
            means = np.stack([np.mean([x for x, y in zip(fit, fit_y) if y == c], axis=0) for c in visual])
            distances = ((np.array(score)[:, None, :] - means[None]) ** 2).sum(axis=2)
            accuracy = np.mean(visual[np.argmin(distances, axis=1)] == np.array([s.y for s in splits[1]]))
            assert lo <= accuracy <= hi, attr

    def test_onsets_follow_the_event(self, small_synth):
        onset = gen_event_pair(make_event_spec(LayerKind.ONSET, 4, small_synth, 0), small_synth, seed=2)
        assert onset.onset_set.steps == (0, 5, 10, 15)
        continuous = gen_event_pair(make_event_spec(LayerKind.CONTINUOUS, 0, small_synth, 0), small_synth, seed=2)
        assert len(continuous.onset_set) == small_synth.distractor_onsets

    def test_deterministic(self, small_synth):
        spec = make_event_spec(LayerKind.INSTANT, 2, small_synth, 9)
        a = gen_event_pair(spec, small_synth, seed=5)
        b = gen_event_pair(spec, small_synth, seed=5)
        c = gen_event_pair(spec, small_synth, seed=6)
        np.testing.assert_array_equal(a.video_raw.values, b.video_raw.values)
        np.testing.assert_array_equal(a.audio_raw.values, b.audio_raw.values)
        assert a.onset_set == b.onset_set
        assert not np.array_equal(a.video_raw.values, c.video_raw.values)

    @pytest.mark.parametrize(
        "spec",
        [
            EventSpec(LayerKind.CONTINUOUS, 10),
            EventSpec(LayerKind.INSTANT, 2),
            EventSpec(LayerKind.INSTANT, 2, (25,)),
            EventSpec(LayerKind.ONSET, 4, (0, 10)),
            EventSpec(LayerKind.VISUAL, 6, (3,)),
        ],
    )
    def test_invalid_specs(self, small_synth, spec):
        with pytest.raises(InvalidArgumentError):
            gen_event_pair(spec, small_synth, seed=0)

    def test_unsorted_steps(self):
        with pytest.raises(InvalidArgumentError):
            EventSpec(LayerKind.INSTANT, 0, (3, 1))


class TestMultiEvent:
    def test_labels_and_signal(self, quiet):
        first = EventSpec(LayerKind.INSTANT, 2, (2, 7))
        second = make_event_spec(LayerKind.ONSET, 4, quiet, 0)
        sample = gen_multi_event_pair([first, second], quiet, seed=3)
        video_proto, _ = class_prototypes(quiet)
        assert sample.y == 2
        assert sample.truth == frozenset({2, 4})
        assert sample.onset_set.steps == (0, 5, 10, 15)
        assert sample.planted_steps == (0, 2, 5, 7, 10, 15)
        projection = sample.video_raw.values @ video_proto[2]
        assert set(np.flatnonzero(projection > 1.0).tolist()) == {2, 7}

    def test_disjoint_instant_events_both_peak(self, small_synth):
        for seed in range(20):
            first = make_event_spec(LayerKind.INSTANT, 2, small_synth, seed)
            free = sorted(set(range(small_synth.T)) - set(first.planted_steps))
            steps = make_rng(seed).choice(free, size=small_synth.planted_instants, replace=False)
            second = EventSpec(LayerKind.INSTANT, 3, tuple(sorted(int(s) for s in steps)))
            sample = gen_multi_event_pair([first, second], small_synth, seed)
            scores = correlation_scores(sample.video_raw, sample.audio_raw)
            assert top_k_steps(scores, len(sample.planted_steps)).tolist() == list(sample.planted_steps)

    def test_same_class_rejected(self, small_synth):
        spec = EventSpec(LayerKind.CONTINUOUS, 1)
        with pytest.raises(InvalidArgumentError):
            gen_multi_event_pair([spec, spec], small_synth, seed=0)

    def test_overlapping_steps_rejected(self, small_synth):
        first = EventSpec(LayerKind.INSTANT, 2, (5,))
        second = make_event_spec(LayerKind.ONSET, 4, small_synth, 0)
        with pytest.raises(InvalidArgumentError):
            gen_multi_event_pair([first, second], small_synth, seed=0)

    def test_needs_two_events(self, small_synth):
        with pytest.raises(InvalidArgumentError):
            gen_multi_event_pair([EventSpec(LayerKind.CONTINUOUS, 1)], small_synth, seed=0)


class TestPcm:
    def test_clicks(self):
        clip = gen_click_pcm([0, 37], T=100)
        assert clip.samples.size == DSP_CONFIG.clip_samples
        assert clip.samples[37 * 1600 + 8] == pytest.approx(CLICK_AMPLITUDE)
        assert np.count_nonzero(clip.samples) == 2 * 15
        assert np.max(clip.samples) <= CLICK_AMPLITUDE

    def test_click_out_of_range(self):
        with pytest.raises(InvalidArgumentError):
            gen_click_pcm([100], T=100)

    def test_tone_phase(self):
        cosine = gen_tone_pcm(1000.0)
        sine = gen_tone_pcm(1000.0, phase=0.0)
        assert cosine.samples[0] == pytest.approx(0.5)
        assert sine.samples[0] == pytest.approx(0.0)
        assert np.max(np.abs(cosine.samples)) == pytest.approx(0.5)

    @pytest.mark.parametrize("frequency, amplitude", [(0.0, 0.5), (8000.0, 0.5), (440.0, 1.5)])
    def test_tone_validation(self, frequency, amplitude):
        with pytest.raises(InvalidArgumentError):
            gen_tone_pcm(frequency, amplitude)


def test_planted_grid(rng):
    audio_row = rng.standard_normal(5)
    grid = gen_planted_grid(audio_row, (3, 4), (2, 1), seed=0)
    assert grid.shape == (3, 4, 5)
    responses = grid @ audio_row
    assert responses[2, 1] == pytest.approx(np.linalg.norm(audio_row))
    responses[2, 1] = 0.0
    np.testing.assert_allclose(responses, 0.0, atol=1e-12)
    with pytest.raises(InvalidArgumentError):
        gen_planted_grid(np.zeros(5), (3, 4), (0, 0), seed=0)


class TestDataset:
    @pytest.mark.parametrize(
        "n, ratio, expected", [(20, (8, 1, 1), (16, 2, 2)), (7, (5, 1, 1), (5, 1, 1)), (10, (1, 1, 1), (3, 3, 4))]
    )
    def test_split_sizes(self, n, ratio, expected):
        assert split_sizes(n, ratio) == expected

    def test_split_counts_and_sidecar(self, tmp_path, small_synth):
        cfg = small_synth.model_copy(update={"samples_per_class": 20})
        info = gen_dataset(cfg, tmp_path)
        assert info.splits == {"train": 160, "val": 20, "test": 20}
        assert read_dataset_info(tmp_path) == info
        lines = manifest_path(tmp_path, "train").read_text().splitlines()
        assert len(lines) == 160

        val = load_samples(manifest_path(tmp_path, "val"))
        assert len(val) == 20
        assert {s.category for s in val} == set(range(10))
        assert all(s.video_raw.values.shape == (cfg.T, cfg.video_dim) for s in val)

    def test_regeneration_is_byte_identical(self, tmp_path, small_synth):
        cfg = small_synth.model_copy(update={"samples_per_class": 3, "write_pcm": True, "T": 10, "onset_period": 2})
        gen_dataset(cfg, tmp_path / "a")
        gen_dataset(cfg, tmp_path / "b")
        files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
        files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
        assert files_a == files_b
        assert any(p.suffix == ".wav" for p in files_a)
        for rel in files_a:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()

    def test_bad_allocation(self, tmp_path, small_synth):
        with pytest.raises(InvalidArgumentError):
            gen_dataset(small_synth, tmp_path, allocation=(5, 5, 0, 0, 1))
