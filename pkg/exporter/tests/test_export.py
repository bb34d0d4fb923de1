import json
from pathlib import Path

import pytest
import torch

from cropprompt_export.errors import ExportMismatch, UnsupportedCheckpoint
from cropprompt_export.export import export, init_checkpoint
from cropprompt_export.model import DEFAULT_ARCH, build_modules

ARCH = dict(DEFAULT_ARCH)
SIDE = ARCH["input_long_side"]
MASK = ARCH["mask_size"]


@pytest.fixture(scope="module")
def exported(tmp_path_factory):
    root = tmp_path_factory.mktemp("export")
    ckpt = init_checkpoint(root / "ckpt.pth", seed=3)
    manifest = export(ckpt, root / "graphs")
    return ckpt, manifest


def load_graphs(manifest):
    enc = torch.jit.load(manifest.encoder_path, map_location="cpu")
    dec = torch.jit.load(manifest.decoder_path, map_location="cpu")
    return enc, dec


def source_modules(ckpt):
    payload = torch.load(ckpt, map_location="cpu", weights_only=True)
    encoder, decoder = build_modules(payload["arch"])
    encoder.load_state_dict(payload["encoder_state"])
    decoder.load_state_dict(payload["decoder_state"])
    encoder.eval()
    decoder.eval()
    return encoder, decoder


class TestHappyPath:
    def test_outputs_exist(self, exported):
        _, manifest = exported
        assert Path(manifest.encoder_path).is_file()
        assert Path(manifest.decoder_path).is_file()
        assert Path(manifest.manifest_path).is_file()

    def test_manifest_schema(self, exported):
        _, manifest = exported
        spec = json.loads(Path(manifest.manifest_path).read_text())
        for key in ("encoder_graph", "decoder_graph", "input_long_side",
                    "channel_mean", "channel_std", "logit_threshold",
                    "mask_feedback", "mask_input_size", "source_checkpoint",
                    "export"):
            assert key in spec, key
        assert spec["export"]["max_abs_diff_encoder"] <= 1e-3
        assert spec["export"]["max_abs_diff_decoder"] <= 1e-3

    def test_smoke_drift_recorded(self, exported):
        _, manifest = exported
        assert manifest.max_abs_diff_encoder <= 1e-3
        assert manifest.max_abs_diff_decoder <= 1e-3


class TestParity:
    def test_paired_forwards_on_random_512_inputs(self, exported):
        ckpt, manifest = exported
        encoder, decoder = source_modules(ckpt)
        enc_graph, dec_graph = load_graphs(manifest)
        gen = torch.Generator().manual_seed(11)
        for _ in range(3):
            image = torch.randint(0, 256, (1, 3, 512, 512), generator=gen).float()
            batch = torch.nn.functional.interpolate(
                image, size=(SIDE, SIDE), mode="bilinear", align_corners=False)
            batch = (batch - 128.0) / 64.0
            with torch.no_grad():
                emb_src = encoder(batch)
                emb_new = enc_graph(batch)
                assert (emb_src - emb_new).abs().max().item() <= 1e-3

                coords = torch.rand((1, 24, 2), generator=gen) * SIDE
                labels = (torch.rand((1, 24), generator=gen) > 0.5).float()
                mask = torch.randn((1, 1, MASK, MASK), generator=gen)
                out_src = decoder(emb_src, coords, labels, mask, torch.ones(1))
                out_new = dec_graph(emb_new, coords, labels, mask, torch.ones(1))
                assert (out_src - out_new).abs().max().item() <= 1e-3

    @pytest.mark.parametrize("n", [1, 2, 3, 17, 64, 128])
    def test_decoder_accepts_variable_point_counts(self, exported, n):
        _, manifest = exported
        _, dec_graph = load_graphs(manifest)
        gen = torch.Generator().manual_seed(n)
        emb_side = SIDE // ARCH["patch"]
        emb = torch.randn((1, ARCH["channels"], emb_side, emb_side), generator=gen)
        coords = torch.rand((1, n, 2), generator=gen) * SIDE
        labels = (torch.rand((1, n), generator=gen) > 0.5).float()
        with torch.no_grad():
            out = dec_graph(emb, coords, labels,
                            torch.zeros((1, 1, MASK, MASK)), torch.zeros(1))
        assert out.shape == (1, 1, MASK, MASK)
        assert torch.isfinite(out).all()

    def test_mask_input_conditions_output(self, exported):
        _, manifest = exported
        _, dec_graph = load_graphs(manifest)
        gen = torch.Generator().manual_seed(5)
        emb_side = SIDE // ARCH["patch"]
        emb = torch.randn((1, ARCH["channels"], emb_side, emb_side), generator=gen)
        coords = torch.rand((1, 4, 2), generator=gen) * SIDE
        labels = torch.tensor([[1.0, 0.0, 1.0, 0.0]])
        mask = torch.randn((1, 1, MASK, MASK), generator=gen)
        with torch.no_grad():
            with_mask = dec_graph(emb, coords, labels, mask, torch.ones(1))
            without = dec_graph(emb, coords, labels, mask, torch.zeros(1))
        assert (with_mask - without).abs().max() > 0


class TestErrors:
    def test_truncated_checkpoint(self, tmp_path):
        ckpt = init_checkpoint(tmp_path / "ckpt.pth", seed=0)
        truncated = tmp_path / "broken.pth"
        truncated.write_bytes(ckpt.read_bytes()[:200])
        with pytest.raises(UnsupportedCheckpoint):
            export(truncated, tmp_path / "out")

    def test_garbage_file(self, tmp_path):
        bad = tmp_path / "bad.pth"
        bad.write_bytes(b"definitely not a checkpoint")
        with pytest.raises(UnsupportedCheckpoint):
            export(bad, tmp_path / "out")

    def test_missing_file(self, tmp_path):
        with pytest.raises(UnsupportedCheckpoint):
            export(tmp_path / "nope.pth", tmp_path / "out")

    def test_unknown_format_marker(self, tmp_path):
        path = tmp_path / "odd.pth"
        torch.save({"format": "someone-elses-model"}, path)
        with pytest.raises(UnsupportedCheckpoint):
            export(path, tmp_path / "out")

    def test_wrong_state_shapes(self, tmp_path):
        ckpt = init_checkpoint(tmp_path / "ckpt.pth", seed=0)
        payload = torch.load(ckpt, map_location="cpu", weights_only=True)
        payload["encoder_state"] = {
            k: torch.zeros(3) for k in payload["encoder_state"]}
        mangled = tmp_path / "mangled.pth"
        torch.save(payload, mangled)
        with pytest.raises(UnsupportedCheckpoint):
            export(mangled, tmp_path / "out")

    def test_exceeded_tolerance_raises_mismatch(self, tmp_path):
        # graph outputs are bit-exact here, so only an unsatisfiable
        # tolerance can exercise the gate
        ckpt = init_checkpoint(tmp_path / "ckpt.pth", seed=1)
        with pytest.raises(ExportMismatch):
            export(ckpt, tmp_path / "out", tolerance=-1.0)
        # failed exports must not leave graphs behind
        assert not (tmp_path / "out" / "encoder.pt").exists()


class TestCheckpointInit:
    def test_same_seed_same_weights(self, tmp_path):
        a = init_checkpoint(tmp_path / "a.pth", seed=9)
        b = init_checkpoint(tmp_path / "b.pth", seed=9)
        pa = torch.load(a, map_location="cpu", weights_only=True)
        pb = torch.load(b, map_location="cpu", weights_only=True)
        for key in pa["encoder_state"]:
            assert torch.equal(pa["encoder_state"][key], pb["encoder_state"][key])

    def test_different_seeds_differ(self, tmp_path):
        a = init_checkpoint(tmp_path / "a.pth", seed=1)
        b = init_checkpoint(tmp_path / "b.pth", seed=2)
        pa = torch.load(a, map_location="cpu", weights_only=True)
        pb = torch.load(b, map_location="cpu", weights_only=True)
        same = all(torch.equal(pa["encoder_state"][k], pb["encoder_state"][k])
                   for k in pa["encoder_state"])
        assert not same
