import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import j0, j1

from backscatter2d.errors import ConfigError
from backscatter2d.grid import Grid2D, fourier_forward
from backscatter2d.potentials import (
    PotentialSpec,
    band_limited_field,
    bump,
    cone,
    disk,
    eval_potential,
    known_sobolev_index,
    l1_norm,
    parse_potential,
    potential_fourier,
    potential_fourier_radial,
    potential_sum,
    sample_potential,
    scaled,
    _radial_profile,
)


def tensor_oracle(spec, xi, order=220):
    """Direct 2D quadrature of the defining transform (smooth profiles)."""
    from scipy.special import roots_legendre

    x, w = roots_legendre(order)
    R = spec.support_radius
    xs, ws = R * x, R * w
    XX, YY = np.meshgrid(xs, xs, indexing="ij")
    vals = eval_potential(spec, np.stack([XX, YY], axis=-1))
    phase = np.exp(-1j * (xi[0] * XX + xi[1] * YY))
    return complex(np.sum(np.outer(ws, ws) * vals * phase))


def radial_oracle(spec, rho):
    """Adaptive Hankel quadrature reference (handles the cone singularity)."""
    R = spec.support_radius

    def f(r):
        return j0(rho * r) * _radial_profile(spec, np.array([r]))[0] * r

    v1, _ = quad(f, 0.0, 0.5 * R, epsabs=1e-13, epsrel=1e-13, limit=400)
    v2, _ = quad(f, 0.5 * R, R, epsabs=1e-13, epsrel=1e-13, limit=400)
    return 2 * np.pi * (v1 + v2)


class TestEval:
    def test_disk_pointwise(self):
        q = disk(0.8, 0.1)
        assert eval_potential(q, (0.0, 0.0)) == pytest.approx(0.1)
        assert eval_potential(q, (1.0, 1.0)) == 0.0

    def test_bump_flat_at_boundary(self):
        q = bump(0.8, 1.0)
        h = 0.005
        x = 0.8 - h * np.arange(5)
        vals = eval_potential(q, np.stack([x, np.zeros(5)], axis=-1))
        # finite differences of orders <= 4 at the support edge all vanish
        for order in range(1, 5):
            d = np.diff(vals, order)
            assert np.abs(d).max() <= 1e-6

    def test_cone_profile(self):
        q = cone(-0.5, 0.8, 2.0)
        v = eval_potential(q, (0.25, 0.0))
        expect = 2.0 * 0.25**-0.5 * np.exp(1 - 1 / (1 - (0.25 / 0.8) ** 2))
        assert v == pytest.approx(expect, rel=1e-12)

    def test_sum(self):
        q = potential_sum(disk(0.5, 1.0), bump(0.8, 2.0))
        v = eval_potential(q, (0.1, 0.2))
        assert v == pytest.approx(
            eval_potential(disk(0.5, 1.0), (0.1, 0.2))
            + eval_potential(bump(0.8, 2.0), (0.1, 0.2))
        )


class TestFourier:
    def test_disk_closed_form(self):
        q = disk(1.0, 1.0)
        assert potential_fourier(q, (0.0, 0.0)) == pytest.approx(np.pi)
        v = potential_fourier(q, (3.0, 4.0))
        assert v == pytest.approx(2 * np.pi * j1(5.0) / 5.0, abs=1e-12)

    def test_disk_against_quadrature_oracle(self):
        # radial adaptive oracle: the 2D tensor rule cannot see the jump
        q = disk(1.0, 1.0)
        v = potential_fourier(q, (5.0, 0.0))
        assert abs(v - radial_oracle(q, 5.0)) <= 1e-9

    def test_bump_against_quadrature_oracle(self):
        q = bump(0.8, 1.3)
        for xi in [(0.0, 0.0), (3.0, 2.0), (12.0, 0.0), (40.0, 9.0)]:
            assert abs(potential_fourier(q, xi) - tensor_oracle(q, xi)) <= 1e-9

    @pytest.mark.parametrize("a", [-0.5, 0.25])
    def test_cone_against_adaptive_oracle(self, a):
        q = cone(a, 0.8, 1.0)
        for rho in [0.0, 5.1, 20.0, 120.0]:
            assert abs(potential_fourier_radial(q, rho) - radial_oracle(q, rho)) <= 1e-9

    def test_conjugate_symmetry_and_realness(self):
        q = potential_sum(disk(0.7, -0.3), cone(-0.25, 0.9, 1.0))
        xi = np.array([4.2, -1.7])
        vp = potential_fourier(q, xi)
        vm = potential_fourier(q, -xi)
        assert abs(vp - np.conj(vm)) <= 1e-12
        assert abs(vp.imag) <= 1e-12

    def test_l1_bound(self):
        q = disk(0.8, 0.7)
        l1 = l1_norm(q)
        assert l1 == pytest.approx(0.7 * np.pi * 0.8**2, rel=1e-10)
        rho = np.linspace(0.0, 300.0, 4000)
        assert np.max(np.abs(potential_fourier_radial(q, rho))) <= l1 + 1e-12

    def test_grid_sampling_consistency(self):
        # pointwise-sampled disk transform vs analytic: boundary staircase
        # error stays below 2% of the peak over the band |xi| <= 20 at n=512
        g = Grid2D(512, 4.0)
        q = disk(0.8, 1.0)
        F = fourier_forward(sample_potential(q, g))
        exact = potential_fourier_radial(q, g.xi_mag)
        sel = g.xi_mag <= 20.0
        err = np.abs(F.values[sel] - exact[sel]).max()
        assert err <= 0.02 * np.abs(exact).max()

    def test_band_limited_field_matches_exact_transform(self, grid256):
        # exact below the taper band (0.6 Nyquist), zero above it
        q = disk(0.8, 1.0)
        F = fourier_forward(band_limited_field(q, grid256))
        exact = potential_fourier_radial(q, grid256.xi_mag)
        low = grid256.xi_mag <= 0.6 * grid256.nyquist
        assert np.abs(F.values[low] - exact[low]).max() <= 1e-10 * np.abs(exact).max()
        hi = grid256.xi_mag >= 0.96 * grid256.nyquist
        assert np.abs(F.values[hi]).max() <= 1e-12 * np.abs(exact).max()


class TestSobolevIndex:
    def test_known_indices(self):
        assert known_sobolev_index(disk()) == 0.5
        assert known_sobolev_index(bump()) == np.inf
        assert known_sobolev_index(cone(0.25)) == pytest.approx(1.25)
        assert known_sobolev_index(cone(-0.5)) == pytest.approx(0.5)
        q = potential_sum(disk(), bump())
        assert known_sobolev_index(q) == 0.5

    def test_disk_index_from_shell_decay(self):
        # cross-check the classical value against the tail of |F[q]|^2 shells
        q = disk(0.8, 1.0)
        r = np.geomspace(20.0, 2000.0, 4000)
        power = potential_fourier_radial(q, r) ** 2
        edges = np.geomspace(20.0, 2000.0, 14)
        centers, means = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            m = (r > a) & (r <= b)
            centers.append(np.sqrt(a * b))
            means.append(np.mean(power[m] * r[m]))  # shell integrand density
        slope = np.polyfit(np.log2(centers), np.log2(means), 1)[0]
        s_star = -0.5 * (slope + 1.0)  # density ~ r^(1-2p), s* = p - 1
        assert abs(s_star - 0.5) <= 0.05


class TestSpecPlumbing:
    def test_validation(self):
        with pytest.raises(ConfigError):
            disk(1.5, 1.0)  # support outside the unit ball
        with pytest.raises(ConfigError):
            cone(0.0)
        with pytest.raises(ConfigError):
            cone(1.5)
        with pytest.raises(ConfigError):
            PotentialSpec("sum", components=())

    def test_label_roundtrip(self):
        specs = [
            disk(0.8, 0.1),
            bump(0.5, -2.0),
            cone(-0.25, 0.9, 1.0),
            potential_sum(disk(0.8, 0.1), cone(0.25, 0.7, -1.0)),
        ]
        for q in specs:
            assert parse_potential(q.label()) == q

    def test_parse_errors(self):
        with pytest.raises(ConfigError):
            parse_potential("pyramid(radius=1)")
        with pytest.raises(ConfigError):
            parse_potential("disk(radius=abc)")
        with pytest.raises(ConfigError):
            parse_potential("disk(width=1)")

    def test_scaled(self):
        q = scaled(potential_sum(disk(0.8, 0.1), bump(0.5, 1.0)), 2.0)
        assert q.components[0].amplitude == pytest.approx(0.2)
        assert q.components[1].amplitude == pytest.approx(2.0)
