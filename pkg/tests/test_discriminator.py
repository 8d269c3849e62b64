import numpy as np
import pytest

from colormapgan import Discriminator, InputTooSmallError, ShapeMismatchError, discriminate

from gradcheck import numeric_grad, relative_error


def patch(seed, size=24):
    return np.random.default_rng(seed).uniform(-1, 1, (size, size, 3))


class TestArchitecture:
    def test_score_map_size(self):
        assert Discriminator.output_size(256) == 30
        assert Discriminator.output_size(64) == 6

    def test_min_size(self):
        d = Discriminator(width=2)
        assert d.min_size == 24
        assert Discriminator.output_size(24) == 1

    def test_parameter_names(self):
        names = [p.name for p in Discriminator(width=2).parameters()]
        assert names[:2] == ["d0.weight", "d0.bias"]
        assert "d1.gain" in names and "d1.offset" in names
        assert "d0.gain" not in names
        assert len(names) == len(set(names))

    def test_widths(self):
        d = Discriminator(width=3)
        assert [layer["weight"].shape[0] for layer in d.layers] == [3, 6, 12, 24, 1]

    def test_width_from_config(self):
        assert Discriminator().width == 64

    def test_seeded_initialisation(self):
        a, b = Discriminator(width=2, seed=5), Discriminator(width=2, seed=5)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa.data, pb.data)


class TestDiscriminate:
    def test_zero_weights(self):
        d = Discriminator(width=2)
        for param in d.parameters():
            param.data[...] = 0.0
        score_map, score = discriminate(d, patch(0, 32))
        assert score_map.shape == (2, 2)
        assert np.all(score_map.data == 0.0)
        assert float(score) == 0.0

    def test_deterministic(self):
        d = Discriminator(width=2)
        a = discriminate(d, patch(1, 32))[1]
        b = discriminate(d, patch(1, 32))[1]
        assert float(a) == float(b)

    def test_too_small(self):
        with pytest.raises(InputTooSmallError) as excinfo:
            discriminate(Discriminator(width=2), patch(0, 23))
        assert excinfo.value.minimum == 24

    def test_bad_shape(self):
        with pytest.raises(ShapeMismatchError):
            discriminate(Discriminator(width=2), np.zeros((32, 32)))

    def test_parameter_gradients(self):
        d = Discriminator(width=2, seed=3)
        x = patch(2)
        discriminate(d, x)[1].backward()

        def f():
            return float(discriminate(d, x)[1])

        by_name = {p.name: p for p in d.parameters()}
        for name in ("d0.weight", "d1.gain", "d3.offset", "d4.bias"):
            param = by_name[name]
            analytic = param.grad.copy()
            assert relative_error(analytic, numeric_grad(f, param.data)) < 1e-4
