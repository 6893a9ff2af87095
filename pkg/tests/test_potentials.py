import sys
import warnings
from pathlib import Path

import mpmath
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import circle_ft_quadrature, sphere_ft_quadrature  # noqa: E402

from fresnel_lab.errors import ConfigError, InterpolationWarning, ParameterError, StructuralError
from fresnel_lab.gabor import gaussian_window
from fresnel_lab.grid import GridSpec, SampledField, field_from_function, forward_fourier
from fresnel_lab.potentials import (
    CroppedCoulomb,
    DensityField,
    DiracComb,
    Envelope,
    SphereShell,
    amalgam_bound_w_inf1,
    amalgam_W_p1_estimate,
    coulomb_decay_exponent,
    modulated,
    potential_from_config,
    sphere_ft_asymptotic_check,
    to_frequency,
)


def test_envelopes():
    e = Envelope("sinusoid", (1.0, 0.5, 2.0))
    assert e(0.125) == pytest.approx(1.5)
    assert e.sup() == 1.5
    assert Envelope().sup() == 1.0
    with pytest.raises(ParameterError):
        Envelope("sinusoid", (1.0,))
    with pytest.raises(ParameterError):
        Envelope("ramp", (1.0,))


def test_dirac_transform_and_product():
    g = GridSpec(2, 32, 8.0)
    V = DiracComb([[0.0, 0.0], [1.0, -0.5]], [2.0, -1j])
    xi = g.points("frequency")
    expected = 2.0 - 1j * np.exp(-2j * np.pi * (xi[..., 0] - 0.5 * xi[..., 1]))
    assert np.allclose(to_frequency(V, g).values, expected)
    u = field_from_function(g, lambda x: np.exp(-np.pi * np.sum(x**2, -1)))
    F = forward_fourier(V.multiply(0.0, u)).values
    # FT(V u)(xi) = sum_j w_j u(x_j) exp(-2 pi i xi.x_j)
    direct = 2.0 + (-1j) * np.exp(-np.pi * 1.25) * np.exp(-2j * np.pi * (xi[..., 0] - 0.5 * xi[..., 1]))
    assert np.allclose(F, direct, atol=1e-12)
    assert V.membership(np.inf) and not V.membership(4.0)


def test_off_grid_dirac_interpolates_and_warns():
    g = GridSpec(1, 64, 8.0)
    smooth = field_from_function(g, lambda x: np.exp(-np.pi * x[..., 0] ** 2))
    V = DiracComb([[0.01]], [1.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error", InterpolationWarning)
        F = forward_fourier(V.multiply(0.0, smooth)).values
    assert np.allclose(np.abs(F), np.exp(-np.pi * 1e-4))
    rough = SampledField(g, np.random.default_rng(0).normal(size=64))
    with pytest.warns(InterpolationWarning):
        V.multiply(0.0, rough)
    with pytest.raises(StructuralError):
        DiracComb([[5.0]], [1.0]).multiply(0.0, smooth)


def test_sphere_transform_against_quadrature():
    rng = np.random.default_rng(1)
    xi3 = rng.normal(size=(30, 3)) * 3
    s3 = SphereShell(1.5, 2.0, 3)
    assert np.allclose(s3.ft(xi3), sphere_ft_quadrature(xi3, 1.5, 2.0, 120, 240), atol=1e-10)
    xi2 = rng.normal(size=(30, 2)) * 3
    s2 = SphereShell(0.7, None, 2)
    assert np.allclose(s2.ft(xi2), circle_ft_quadrature(xi2, 0.7, None, 400), atol=1e-10)
    assert s3.threshold() == 3.0 and s2.threshold() == 4.0
    with pytest.raises(ParameterError):
        SphereShell(1.0, None, 1)


def test_sphere_asymptotics():
    out = sphere_ft_asymptotic_check(SphereShell(1.0, None, 2))
    assert out["upper_half_max"] <= 2 * out["lower_half_max"]
    assert out["max_scaled_residual"] < 1.0


def test_coulomb_closed_form_in_three_dimensions():
    # for alpha = 1, d = 3: 4 pi int_0^R r sin(2 pi rho r) / (2 pi rho) dr = (1 - cos 2 pi rho R) / (pi rho^2)
    V = CroppedCoulomb(1.0, 1.3, 3)
    rho = np.array([0.05, 0.7, 3.1, 11.0, 40.0])
    xi = np.zeros((rho.size, 3))
    xi[:, 0] = rho
    exact = (1 - np.cos(2 * np.pi * rho * 1.3)) / (np.pi * rho**2)
    assert np.allclose(V.ft(xi), exact, rtol=1e-10, atol=1e-12)


def test_coulomb_two_dimensions_against_mpmath():
    V = CroppedCoulomb(1.5, 1.0, 2)
    for rho in (0.3, 2.5, 9.0):
        ref = 2 * mpmath.pi * mpmath.quad(lambda r: r**-0.5 * mpmath.besselj(0, 2 * mpmath.pi * rho * r),
                                          mpmath.linspace(0, 1, 20))
        assert V.ft(np.array([[rho, 0.0]]))[0] == pytest.approx(float(ref), rel=1e-9)
    # the singularity gives |xi|^(alpha - d), slower than the boundary term |xi|^(-(d+1)/2)
    assert coulomb_decay_exponent(CroppedCoulomb(1.0, 1.0, 2)) == pytest.approx(-1.0, abs=0.1)


def test_spline_path_matches_direct_quadrature():
    V = CroppedCoulomb(1.0, 1.0, 2)
    g = GridSpec(2, 32, 8.0)
    F = to_frequency(V, g).values
    xi = g.points("frequency").reshape(-1, 2)[::97]
    assert np.allclose(F.reshape(-1)[::97], V.ft(xi), rtol=1e-8, atol=1e-10)


def test_threshold_checks_and_drift():
    coul = CroppedCoulomb(1.0, 1.0, 2)
    assert coul.threshold() == 2.0 and coul.membership(3.0) and not coul.membership(1.5)
    est = amalgam_W_p1_estimate(coul, GridSpec(2, 128, 8.0), gaussian_window(1.0, 2), 3.0)
    assert est["expected_member"] and est["drift"] < 0.05 and not est["inconclusive"]
    near = amalgam_W_p1_estimate(coul, GridSpec(2, 64, 8.0), gaussian_window(1.0, 2), 2.01)
    assert near["inconclusive"]
    with pytest.raises(ParameterError):
        amalgam_W_p1_estimate(coul, GridSpec(2, 64, 8.0), gaussian_window(1.0, 2), 0.5)


def test_norm_bound_for_diracs():
    V = DiracComb([[0.0], [1.0]], [1.0, -2.0], Envelope("const", (0.5,)))
    assert amalgam_bound_w_inf1(V, gaussian_window(2.0)) == pytest.approx(0.5 * 3 * 2.0)


def test_density_field_and_modulation():
    g = GridSpec(1, 16, 4.0)
    rho = SampledField(g, np.linspace(0, 1, 16))
    D = modulated(DensityField(rho), Envelope("const", (2.0,)))
    u = SampledField(g, np.ones(16))
    assert np.allclose(D.multiply(0.0, u).values, 2 * rho.values)
    with pytest.raises(ParameterError):
        D.ft(np.zeros((1, 1)))
    with pytest.raises(StructuralError):
        D.multiply(0.0, SampledField(GridSpec(1, 16, 2.0), np.ones(16)))


def test_potential_config_round_trip():
    for V in (DiracComb([[0.0, 1.0]], [1 + 2j]), SphereShell(1.0, None, 3),
              CroppedCoulomb(0.5, 2.0, 2, Envelope("sinusoid", (1.0, 0.5, 3.0)))):
        W = potential_from_config(V.to_config(), V.d)
        assert type(W) is type(V) and W.to_config() == V.to_config()
    assert potential_from_config({"variant": "zero"}, 1) is None
    with pytest.raises(ConfigError):
        potential_from_config({"variant": "yukawa"}, 1)
    with pytest.raises(ConfigError):
        potential_from_config({"variant": "sphere_shell", "radius": -1.0}, 3)
