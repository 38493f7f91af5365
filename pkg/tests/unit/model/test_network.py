"""Tests for the detector and the assembled ProtoDetector."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from src.autograd import Tensor
from src.autograd import functional as F
from src.autograd.gradcheck import gradient_check
from src.core.models import ConfigError, DimensionError, NeckNormMode, NormKind, RunConfig
from src.model.detr import (
    PAD_SCORE,
    AttentionParams,
    DetectorParams,
    backbone_forward,
    detect,
    extract_patches,
    multihead_attention,
    sinusoidal_positions,
)
from src.model.network import ProtoDetector
from src.model.params import Linear


@pytest.fixture
def micro_config() -> RunConfig:
    return RunConfig(
        prototypes=4,
        channels=4,
        backbone_channels=4,
        heads=2,
        queries=2,
        ffn_dim=6,
        encoder_layers=1,
        decoder_layers=1,
        gn_groups=2,
        image_height=16,
        image_width=16,
        patch=8,
        max_objects=2,
    )


class TestBackbone:
    def test_patches_are_row_major_blocks(self) -> None:
        images = np.arange(2 * 3 * 4 * 4, dtype=np.float64).reshape(2, 3, 4, 4)
        patches = extract_patches(images, 2)
        assert patches.shape == (2, 2, 2, 12)
        np.testing.assert_array_equal(patches.data[0, 0, 1, :4], images[0, 0, 0:2, 2:4].reshape(-1))

    def test_indivisible_image_is_a_config_error(self) -> None:
        with pytest.raises(ConfigError):
            extract_patches(np.zeros((1, 3, 10, 10)), 4)

    def test_wrong_rank_is_a_dimension_error(self) -> None:
        with pytest.raises(DimensionError):
            extract_patches(np.zeros((3, 4)), 2)

    def test_positions_are_bounded(self) -> None:
        pos = sinusoidal_positions(3, 4, 8)
        assert pos.shape == (12, 8)
        assert np.all(np.abs(pos) <= 1.0)


    def test_backbone_embeds_each_patch_linearly(self) -> None:
        gen = np.random.default_rng(4)
        images = gen.random((2, 3, 4, 4))
        embed = Linear.init(gen, 12, 5)
        features = backbone_forward(images, embed, 2)
        assert features.shape == (2, 2, 2, 5)
        expected = extract_patches(images, 2).data @ embed.weight.data + embed.bias.data
        np.testing.assert_allclose(features.data, expected, atol=1e-12)


class TestDetector:
    @staticmethod
    def _params(decoder_layers: int = 2) -> DetectorParams:
        return DetectorParams.init(
            np.random.default_rng(2),
            channels=4,
            ffn_dim=6,
            encoder_layers=2,
            decoder_layers=decoder_layers,
            queries=3,
            num_classes=4,
        )

    def test_detect_shapes_and_attention_distribution(self) -> None:
        features = Tensor(np.random.default_rng(5).normal(size=(2, 3, 2, 4)))
        out = detect(features, self._params(), heads=2)
        assert out.class_logits.shape == (2, 3, 5)
        assert out.boxes.shape == (2, 3, 4)
        assert out.attention.shape == (2, 3, 3, 2)
        np.testing.assert_allclose(out.attention.sum(axis=(2, 3)), 1.0, atol=1e-12)
        assert np.all(out.attention >= 0)

    def test_padded_cells_get_no_attention(self) -> None:
        features = Tensor(np.random.default_rng(6).normal(size=(1, 2, 2, 4)))
        pad = np.array([[[False, True], [False, True]]])
        out = detect(features, self._params(), heads=2, pad_mask=pad)
        assert np.all(out.attention[0, :, :, 1] < 1e-12)
        np.testing.assert_allclose(out.attention.sum(axis=(2, 3)), 1.0, atol=1e-12)

    def test_permuting_queries_permutes_outputs(self) -> None:
        params = self._params()
        features = Tensor(np.random.default_rng(7).normal(size=(2, 3, 2, 4)))
        perm = np.array([2, 0, 1])
        permuted = replace(params, query_embed=Tensor(params.query_embed.data[perm]))
        base = detect(features, params, heads=2)
        moved = detect(features, permuted, heads=2)
        np.testing.assert_allclose(moved.class_logits.data, base.class_logits.data[:, perm], atol=1e-12)
        np.testing.assert_allclose(moved.boxes.data, base.boxes.data[:, perm], atol=1e-12)
        np.testing.assert_allclose(moved.attention, base.attention[:, perm], atol=1e-12)

    def test_heads_must_divide_channels(self) -> None:
        x = Tensor(np.zeros((1, 2, 4)))
        params = AttentionParams.init(np.random.default_rng(0), 4)
        with pytest.raises(DimensionError):
            multihead_attention(x, x, x, params, heads=3)


class TestProtoDetector:
    def test_forward_shapes(self, micro_config) -> None:
        model = ProtoDetector.from_config(micro_config)
        out = model(np.random.default_rng(0).random((3, 3, 16, 16)), micro_config.norm_mode)
        assert out.detector.class_logits.shape == (3, 2, 5)
        assert out.detector.boxes.shape == (3, 2, 4)
        assert out.m_p.shape == (3, 2, 2, 4)
        assert out.detector.attention.shape == (3, 2, 2, 2)
        assert np.all((out.detector.boxes.data > 0) & (out.detector.boxes.data < 1))

    def test_attention_maps_sum_to_one_and_skip_padding(self, micro_config) -> None:
        model = ProtoDetector.from_config(micro_config)
        pad = np.zeros((1, 2, 2), dtype=bool)
        pad[0, :, 1] = True
        out = model(np.random.default_rng(0).random((1, 3, 16, 16)), micro_config.norm_mode, pad)
        maps = out.attention_maps(0)
        for att in maps:
            assert att.values.sum() == pytest.approx(1.0)
            assert np.all(att.values[:, 1] < 1e-12)

    def test_same_seed_same_parameters(self, micro_config) -> None:
        a = ProtoDetector.from_config(micro_config)
        b = ProtoDetector.from_config(micro_config)
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_parameter_names_are_unique(self, micro_config) -> None:
        names = [name for name, _ in ProtoDetector.from_config(micro_config).named_parameters()]
        assert len(names) == len(set(names))
        assert "neck.prototypes.weight" in names

    def test_ablation_has_no_prototype_maps(self, micro_config) -> None:
        model = ProtoDetector.from_config(replace(micro_config, neck="none"))
        out = model(np.zeros((1, 3, 16, 16)), micro_config.norm_mode)
        assert out.m_p is None
        assert out.prototype_maps() == []
        assert model.neck is None and model.ablation is not None

    def test_argmax_evaluation_gives_onehot_maps(self, micro_config) -> None:
        model = ProtoDetector.from_config(micro_config)
        out = model(np.random.default_rng(1).random((2, 3, 16, 16)), NeckNormMode(kind=NormKind.ARGMAX))
        for m_p in out.prototype_maps():
            assert np.all(m_p.values.max(axis=0) == 1.0)
            assert np.all(np.sum(m_p.values > 0, axis=0) == 1)

    def test_detector_sees_only_the_prototype_maps(self, micro_config) -> None:
        model = ProtoDetector.from_config(micro_config, seed=4)
        images = np.random.default_rng(8).random((2, 3, 16, 16))
        out = model(images, micro_config.norm_mode)
        embedded = F.relu(model.neck.out_embed(Tensor(out.m_p.data.copy())))
        rebuilt = detect(embedded, model.detector, model.heads)
        np.testing.assert_array_equal(rebuilt.class_logits.data, out.detector.class_logits.data)
        np.testing.assert_array_equal(rebuilt.boxes.data, out.detector.boxes.data)
        np.testing.assert_array_equal(rebuilt.attention, out.detector.attention)

    def test_full_model_gradients_match_finite_differences(self, micro_config) -> None:
        model = ProtoDetector.from_config(micro_config, seed=3)
        gen = np.random.default_rng(9)
        images = gen.random((1, 3, 16, 16))
        w_logits = gen.normal(size=(1, 2, 5))
        w_boxes = gen.normal(size=(1, 2, 4))
        w_map = gen.normal(size=(1, 2, 2, 4))

        def loss() -> Tensor:
            out = model(images, micro_config.norm_mode)
            return F.add(
                F.add(F.sum(F.mul(out.detector.class_logits, w_logits)), F.sum(F.mul(out.detector.boxes, w_boxes))),
                F.sum(F.mul(out.m_p, w_map)),
            )

        checked = [
            model.patch_embed.bias,
            model.neck.prototypes.weight,
            model.neck.out_embed.bias,
            model.detector.query_embed,
            model.detector.encoder[0].attn.q.weight,
            model.detector.decoder[0].cross_attn.k.weight,
            model.detector.box_head[2].weight,
        ]
        assert gradient_check(loss, checked) <= 1e-4


def test_pad_score_is_large_negative() -> None:
    assert PAD_SCORE <= -1e9
