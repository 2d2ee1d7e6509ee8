import math
from collections import Counter
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from selfnorm.contfrac import (
    GRID_SIZE,
    _PI_300,
    cf_digits,
    cf_series,
    gauss_map_digits,
    gauss_mass,
    gauss_partial_sum,
    gauss_partial_sum_closed,
    mu_truncated,
    pi_grid_point,
    pi_rational,
    reconstruct,
)
from selfnorm.errors import DomainError, PrecisionError

# sum_{j<=300} j^(1/3) log2(1 + 1/(j(j+2))) at 60 significant digits
MU_300 = 1.48759323607084151936286196565
# log2(4/3)
MASS_1 = 0.4150374992788438185462611


class TestDigits:
    def test_examples(self):
        assert cf_digits(Fraction(3141, 10000), 30).digits == (3, 5, 2, 3, 1, 15, 4)
        assert cf_digits(Fraction(1, 2), 5).digits == (2,)
        assert cf_digits(Fraction(1, 2), 5).terminated
        assert cf_digits(Fraction(5, 8), 10).digits == (1, 1, 1, 2)

    def test_truncates(self):
        cf = cf_digits(Fraction(3141, 10000), 3)
        assert cf.digits == (3, 5, 2) and not cf.terminated

    @pytest.mark.parametrize("x", [Fraction(0), Fraction(1), Fraction(3, 2), Fraction(-1, 3)])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            cf_digits(x, 5)

    @given(st.integers(1, 10**12), st.integers(1, 10**12))
    def test_euclid_matches_gauss_map(self, p, gap):
        x = Fraction(p, p + gap)
        assert cf_digits(x, 100) == gauss_map_digits(x, 100)

    def test_euclid_matches_gauss_map_random(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            q = int(rng.integers(2, 10**15))
            p = int(rng.integers(1, q))
            x = Fraction(p, q)
            cf = cf_digits(x, 200)
            assert cf == gauss_map_digits(x, 200)
            assert cf.terminated and reconstruct(cf.digits) == x


class TestGaussMeasure:
    def test_first_mass(self):
        assert gauss_mass(1) == pytest.approx(MASS_1, rel=1e-15)

    @pytest.mark.parametrize("J", [1, 10, 100, 10**4])
    def test_telescoping(self, J):
        assert abs(gauss_partial_sum(J) - gauss_partial_sum_closed(J)) <= 1e-12

    def test_total_mass_limit(self):
        assert gauss_partial_sum(10**5) == pytest.approx(1.0, abs=2e-5)

    def test_mu(self):
        assert mu_truncated(300) == pytest.approx(MU_300, rel=1e-15)
        assert mu_truncated(1) == pytest.approx(MASS_1, rel=1e-15)
        assert mu_truncated(300, 0.0) == pytest.approx(gauss_partial_sum_closed(300), rel=1e-14)

    def test_mu_increasing_in_J(self):
        vals = [mu_truncated(J) for J in (1, 10, 100, 300, 1000)]
        assert vals == sorted(vals)


class TestGrid:
    def test_embedded_pi(self):
        with mpmath.workdps(320):
            ref = mpmath.nstr(+mpmath.pi, 320, strip_zeros=False)
        assert ref.startswith(_PI_300)
        assert len(_PI_300) == 302

    def test_truncation_order(self):
        assert pi_rational(1) == Fraction(31, 10)
        assert pi_rational(4) < pi_rational(200) < pi_rational(300)
        with pytest.raises(DomainError):
            pi_rational(301)

    def test_points_in_unit_interval(self):
        pts = [pi_grid_point(i) for i in range(1, GRID_SIZE + 1)]
        assert all(0 < p < 1 for p in pts)
        assert all(b > a for a, b in zip(pts, pts[1:]))
        assert GRID_SIZE == math.floor(10000 / math.pi) - 1

    @pytest.mark.parametrize("index", [0, GRID_SIZE + 1, 1.5, True])
    def test_bad_index(self, index):
        with pytest.raises(DomainError):
            pi_grid_point(index)


class TestSeries:
    def test_first_point(self):
        z = cf_series(1, 30)
        # pi/10000 = 1/(3183.0988...), so a_1 = 3183
        assert cf_digits(pi_grid_point(1), 1).digits == (3183,)
        assert z[0] == pytest.approx(3183 ** (1 / 3), rel=1e-15)
        assert z[0] == pytest.approx(14.709984424285786154, rel=1e-14)
        assert z.shape == (30,)

    def test_stable_under_more_pi_digits(self):
        for i in range(1, GRID_SIZE + 1):
            a = cf_digits(pi_grid_point(i, 200), 30).digits
            b = cf_digits(pi_grid_point(i, 300), 30).digits
            assert a == b

    def test_precision_error(self):
        with pytest.raises(PrecisionError):
            cf_series(1000, 30, pi_digits=2)

    def test_deep_digits_follow_gauss_measure(self):
        # by ergodicity of the Gauss map, deep digits are asymptotically Gauss-distributed
        counts = Counter()
        total = 0
        for i in range(1, GRID_SIZE + 1):
            d = cf_digits(pi_grid_point(i), 30).digits[9:]
            counts.update(d)
            total += len(d)
        for j in range(1, 6):
            assert abs(counts[j] / total - gauss_mass(j)) <= 0.02

    def test_first_digit_follows_lebesgue(self):
        # the grid is near-uniform on (0, 1): P(a_1 = j) = 1/(j(j+1))
        first = Counter(cf_digits(pi_grid_point(i), 1).digits[0] for i in range(1, GRID_SIZE + 1))
        for j in range(1, 6):
            assert abs(first[j] / GRID_SIZE - 1 / (j * (j + 1))) <= 0.01
