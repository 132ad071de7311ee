import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lse_lab.constellations import (Circle, Disk, FullComplex, Mpsk, constellation_from_dict,
                                    constellation_to_dict)

complexes = st.builds(complex, st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))


class TestProjections:
    @given(complexes, st.floats(0.01, 100))
    def test_disk_is_nearest(self, w, P):
        c = Disk(P)
        x = c.project(w)
        assert abs(x) ** 2 <= P * (1 + 1e-12)
        # no sampled disk point is closer
        rng = np.random.default_rng(0)
        pts = c.sample(rng, 200)
        assert abs(w - x) <= np.min(np.abs(w - pts)) + 1e-9

    @given(complexes, st.floats(0.01, 100))
    def test_circle_modulus(self, w, P):
        assert abs(Circle(P).project(w)) == pytest.approx(np.sqrt(P))

    def test_circle_origin(self):
        assert Circle(4.0).project(0j) == pytest.approx(2.0)

    @given(complexes, st.integers(2, 16))
    def test_psk_nearest(self, w, M):
        c = Mpsk(M, 2.0)
        x = c.project(w)
        assert abs(w - x) == pytest.approx(np.min(np.abs(w - c.points)))

    def test_psk_points(self):
        c = Mpsk(4)
        np.testing.assert_allclose(c.points, [1j, -1, -1j, 1], atol=1e-15)

    def test_psk_tie_lower_index(self):
        # 0 is equidistant from every symbol
        assert Mpsk(4).nearest_index(0j) == 0

    def test_large_alphabet_rounding(self):
        c = Mpsk(1000)
        w = np.exp(1j * np.linspace(-3, 3, 11))
        idx = c.nearest_index(w)
        brute = np.argmin(np.abs(w[:, None] - c.points[None, :]), axis=1)
        assert np.array_equal(idx, brute)

    def test_full_identity(self):
        w = np.array([1 + 2j, -3j])
        assert np.array_equal(FullComplex().project(w), w)


class TestValidation:
    def test_invalid(self):
        with pytest.raises(ValueError):
            Disk(0.0)
        with pytest.raises(ValueError):
            Mpsk(1)
        with pytest.raises(ValueError):
            Mpsk(2.5)
        with pytest.raises(ValueError):
            Circle(-1.0)

    def test_flags(self):
        assert Circle().constant_modulus and Mpsk(2).constant_modulus
        assert not Disk(1.0).constant_modulus and Mpsk(2).discrete

    @pytest.mark.parametrize("c", [FullComplex(), Disk(2.0), Circle(0.5), Mpsk(8, 3.0)])
    def test_dict_round_trip(self, c):
        assert constellation_from_dict(constellation_to_dict(c)) == c

    def test_unknown_set(self):
        with pytest.raises(ValueError):
            constellation_from_dict({"set": "hexagon"})

    def test_samples_in_set(self):
        rng = np.random.default_rng(1)
        assert np.all(np.abs(Disk(2.0).sample(rng, 100)) ** 2 <= 2.0)
        np.testing.assert_allclose(np.abs(Circle(2.0).sample(rng, 10)), np.sqrt(2.0))
        s = Mpsk(4).sample(rng, 50)
        assert np.all(np.isin(s, Mpsk(4).points))
