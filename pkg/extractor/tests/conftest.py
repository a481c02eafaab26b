import pytest
import torch

from vitextract import BackboneSpec, register_backbone

STUB_DIM = 16


class StubBackbone(torch.nn.Module):
    """Tiny deterministic stand-in: pooled pixels through a fixed projection."""

    def __init__(self, dim: int = STUB_DIM):
        super().__init__()
        generator = torch.Generator().manual_seed(1234)
        self.pool = torch.nn.AdaptiveAvgPool2d(4)
        weight = torch.randn(dim, 48, generator=generator)
        bias = torch.randn(dim, generator=generator)
        self.proj = torch.nn.Linear(48, dim)
        with torch.no_grad():
            self.proj.weight.copy_(weight)
            self.proj.bias.copy_(bias)

    def forward(self, x):
        return self.proj(self.pool(x).flatten(1))


def _load_stub() -> torch.nn.Module:
    return StubBackbone()


@pytest.fixture(scope="session", autouse=True)
def stub_backbones():
    register_backbone(
        BackboneSpec(
            name="stub",
            hub_id="test/stub",
            embed_dim=STUB_DIM,
            input_size=32,
            loader=_load_stub,
        )
    )
    # declared width deliberately wrong, for the mismatch-abort path
    register_backbone(
        BackboneSpec(
            name="stub-wrong-dim",
            hub_id="test/stub-wrong",
            embed_dim=8,
            input_size=32,
            loader=_load_stub,
        )
    )


@pytest.fixture()
def image_folder(tmp_path):
    from PIL import Image

    folder = tmp_path / "images"
    folder.mkdir()
    colors = [
        (255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0), (0, 255, 255),
        (255, 0, 255), (128, 64, 0), (0, 128, 64), (64, 0, 128), (200, 200, 200),
    ]
    for i, color in enumerate(colors):
        Image.new("RGB", (40, 40), color).save(folder / f"img_{i:02d}.png")
    return folder
