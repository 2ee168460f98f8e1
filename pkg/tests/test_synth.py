import csv

import numpy as np
import pytest

from histadapter.metrics import ScoreSet, auc, roc
from histadapter.synth import (
    DomainStyle,
    SynthProtocol,
    dump_dataset,
    generate,
    highpass_variance_scores,
    merge_batches,
    source_validation,
    split_protocol,
    style_bank,
)


@pytest.fixture(scope="module")
def styles():
    return style_bank(4)


class TestGenerate:
    def test_deterministic_given_seed(self, styles):
        a = generate(styles[1], 6, 32)
        b = generate(styles[1], 6, 32)
        assert np.array_equal(a.images.data, b.images.data)
        assert a.example_ids == b.example_ids

    def test_streams_differ(self, styles):
        a = generate(styles[1], 6, 32, stream=0)
        b = generate(styles[1], 6, 32, stream=1)
        assert not np.array_equal(a.images.data, b.images.data)

    def test_balance_and_labels(self, styles):
        batch = generate(styles[0], 8, 32)
        assert len(batch) == 16
        assert (batch.labels == 0).sum() == 8
        assert (batch.labels == 1).sum() == 8

    def test_pixel_range(self, styles):
        batch = generate(styles[2], 8, 32)
        assert batch.images.data.min() >= 0.0
        assert batch.images.data.max() <= 1.0

    def test_color_gain_shifts_channel_means(self):
        neutral = DomainStyle(color_gain=(1.0, 1.0, 1.0), brightness_offset=0.0,
                              noise_sigma=0.0, blur_radius=0, seed=3)
        red = DomainStyle(color_gain=(1.4, 1.0, 1.0), brightness_offset=0.0,
                          noise_sigma=0.0, blur_radius=0, seed=3)
        a = generate(neutral, 16, 32).images.data
        b = generate(red, 16, 32).images.data
        # same underlying textures, only the style differs
        ratio = b[:, 0].mean() / a[:, 0].mean()
        assert ratio > 1.25  # clipping eats a little of the 1.4 gain
        assert abs(b[:, 1].mean() - a[:, 1].mean()) < 1e-12

    def test_invalid_styles_rejected(self):
        with pytest.raises(ValueError, match="gains"):
            DomainStyle(color_gain=(0.0, 1.0, 1.0))
        with pytest.raises(ValueError, match="sigma"):
            DomainStyle(noise_sigma=-0.1)
        with pytest.raises(ValueError, match="n_per_class"):
            generate(DomainStyle(), 0)


class TestLearnability:
    def test_highpass_baseline_auc_above_090_within_domain(self, styles):
        for domain, style in enumerate(styles):
            batch = generate(style, 48, 32, domain_id=domain)
            scores = highpass_variance_scores(batch)
            value = auc(roc(ScoreSet(scores, batch.labels)))
            assert value > 0.9, f"domain {domain}: baseline AUC {value:.3f}"


class TestSplitProtocol:
    def test_sources_exclude_held_out(self, styles):
        protocol = SynthProtocol(styles, held_out=1)
        split = split_protocol(protocol, 4, 4)
        assert set(split.train.domain_ids) == {0, 2, 3}
        assert set(split.test.domain_ids) == {1}

    def test_few_shot_adds_exactly_k_per_class(self, styles):
        protocol = SynthProtocol(styles, held_out=2, few_shot_k=5)
        split = split_protocol(protocol, 4, 6)
        target = split.train.domain_ids == 2
        target_labels = split.train.labels[target]
        assert (target_labels == 0).sum() == 5
        assert (target_labels == 1).sum() == 5

    def test_splits_disjoint_by_example_id(self, styles):
        protocol = SynthProtocol(styles, held_out=0, few_shot_k=3)
        split = split_protocol(protocol, 5, 5)
        train_ids = set(split.train.example_ids)
        test_ids = set(split.test.example_ids)
        assert train_ids.isdisjoint(test_ids)
        assert len(train_ids) == len(split.train.example_ids)
        val = source_validation(protocol, 4)
        assert set(val.example_ids).isdisjoint(train_ids | test_ids)

    def test_min_source_domains_enforced(self):
        protocol = SynthProtocol(style_bank(2), held_out=0)
        with pytest.raises(ValueError, match="source domains"):
            split_protocol(protocol, 4, 4, min_source_domains=2)

    def test_protocol_validation(self, styles):
        with pytest.raises(ValueError, match="held_out"):
            SynthProtocol(styles, held_out=4)
        with pytest.raises(ValueError, match="few_shot_k"):
            SynthProtocol(styles, held_out=0, few_shot_k=-1)


class TestDump:
    def test_ppm_and_manifest(self, tmp_path, styles):
        batch = merge_batches([
            generate(styles[i], 2, 16, domain_id=i) for i in range(2)
        ])
        manifest = dump_dataset(batch, tmp_path / "data")
        rows = list(csv.DictReader(manifest.open()))
        assert len(rows) == len(batch)
        assert {r["domain"] for r in rows} == {"0", "1"}
        first = tmp_path / "data" / rows[0]["path"]
        blob = first.read_bytes()
        assert blob.startswith(b"P6\n16 16\n255\n")
        assert len(blob) == len(b"P6\n16 16\n255\n") + 16 * 16 * 3
