import numpy as np
import pytest
import torch

from phcsurrogate import (
    SRResNetConfig,
    UNetConfig,
    build_srresnet,
    build_unet,
    parameter_count,
)


class TestUNetShapes:
    @pytest.mark.parametrize("m,base", [(16, 4), (32, 4), (48, 8), (64, 2)])
    def test_output_matches_input_size(self, m, base):
        model = build_unet(UNetConfig(m=m, base_channels=base))
        x = torch.randn(2, 2, m, m)
        assert model(x).shape == (2, 1, m, m)

    def test_paper_config_builds_and_runs(self):
        model = build_unet(UNetConfig(m=16)).eval()
        n_params = parameter_count(model)
        assert n_params > 100e6  # 2->128..1024 encoder with 2048 bottleneck
        x = torch.zeros(1, 2, 16, 16)
        y = model(x)
        assert y.shape == (1, 1, 16, 16)
        assert torch.isfinite(y).all()

    def test_bottleneck_reaches_1x1_at_m16(self):
        model = build_unet(UNetConfig(m=16, base_channels=4))
        seen = {}

        def hook(module, args, output):
            seen["shape"] = tuple(output.shape)

        model.bottleneck.register_forward_hook(hook)
        model.eval()(torch.randn(1, 2, 16, 16))
        assert seen["shape"][-2:] == (1, 1)
        assert seen["shape"][1] == 2 * model.cfg.level_channels(3)

    def test_indivisible_m_rejected(self):
        with pytest.raises(ValueError):
            UNetConfig(m=20)

    def test_parameter_count_is_function_of_config(self):
        a = parameter_count(build_unet(UNetConfig(m=16, base_channels=4)))
        b = parameter_count(build_unet(UNetConfig(m=16, base_channels=4)))
        c = parameter_count(build_unet(UNetConfig(m=32, base_channels=4)))
        assert a == b == c  # convolutional: independent of spatial size


class TestSRResNetShapes:
    @pytest.mark.parametrize("m_low,channels,blocks", [(8, 8, 2), (12, 16, 3),
                                                       (16, 8, 2)])
    def test_factor_four(self, m_low, channels, blocks):
        model = build_srresnet(
            SRResNetConfig(m_low=m_low, channels=channels, n_blocks=blocks)
        )
        x = torch.randn(3, 1, m_low, m_low)
        assert model(x).shape == (3, 1, 4 * m_low, 4 * m_low)

    def test_paper_config_output_64(self):
        model = build_srresnet(SRResNetConfig(m_low=16))
        y = model(torch.zeros(1, 1, 16, 16))
        assert y.shape == (1, 1, 64, 64)
        assert torch.isfinite(y).all()

    def test_output_bounded_by_tanh(self):
        model = build_srresnet(SRResNetConfig(m_low=8, channels=8, n_blocks=2))
        y = model(torch.randn(4, 1, 8, 8) * 50)
        assert y.min() > -1.0 and y.max() < 1.0

    def test_other_upscale_rejected(self):
        with pytest.raises(ValueError):
            build_srresnet(SRResNetConfig(m_low=8, upscale=2))


def directional_derivative_check(model, x, y, tol=1e-2):
    """Central finite difference vs autograd along a random direction."""
    model.double().eval()
    x, y = x.double(), y.double()
    loss_fn = torch.nn.MSELoss()

    params = [p for p in model.parameters() if p.requires_grad]
    gen = torch.Generator().manual_seed(4)
    direction = [torch.randn(p.shape, generator=gen, dtype=torch.float64)
                 for p in params]
    norm = torch.sqrt(sum((d**2).sum() for d in direction))
    direction = [d / norm for d in direction]

    model.zero_grad()
    loss_fn(model(x), y).backward()
    analytic = float(sum((p.grad * d).sum() for p, d in zip(params, direction)))

    eps = 1e-5
    with torch.no_grad():
        for p, d in zip(params, direction):
            p += eps * d
        plus = float(loss_fn(model(x), y))
        for p, d in zip(params, direction):
            p -= 2 * eps * d
        minus = float(loss_fn(model(x), y))
        for p, d in zip(params, direction):
            p += eps * d
    fd = (plus - minus) / (2 * eps)
    assert abs(fd - analytic) <= tol * max(abs(analytic), 1e-8), (fd, analytic)


class TestGradients:
    def test_unet_tiny_finite_difference(self):
        cfg = UNetConfig(m=8, base_channels=2, levels=3)
        model = build_unet(cfg)
        assert parameter_count(model) <= 10_000
        torch.manual_seed(0)
        directional_derivative_check(
            model, torch.randn(2, 2, 8, 8), torch.randn(2, 1, 8, 8)
        )

    def test_srresnet_tiny_finite_difference(self):
        cfg = SRResNetConfig(m_low=4, channels=4, n_blocks=2)
        model = build_srresnet(cfg)
        assert parameter_count(model) <= 10_000
        torch.manual_seed(1)
        directional_derivative_check(
            model, torch.randn(2, 1, 4, 4), torch.randn(2, 1, 16, 16)
        )
