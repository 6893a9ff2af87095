import numpy as np
import pytest

from fresnel_lab.errors import DiagnosticError, ParameterError, StructuralError
from fresnel_lab.gabor import (
    amalgam_norm,
    amalgam_sup,
    bump_window,
    decay_exponent_fit,
    dilation_scaling_check,
    fit_loglog,
    fresnel_norms,
    gaussian_window,
    modulation_norm,
    omega2_sup_measure,
    region_partition,
    slice_integrals,
    stacked_amalgam_sup,
    stft,
    window_from_config,
    window_swap_equivalence,
)
from fresnel_lab.grid import GridSpec, SampledField, field_from_function
from fresnel_lab.symbols import SmoothedSymbol, fresnel_field, radial_power


def direct_stft(f, window, x_centres, xi):
    """V_g f(x, xi) = sum_y f(y) g(y - x) exp(-2 pi i xi y) h on the periodic grid."""
    g = f.grid
    y = g.axis()
    out = np.empty((len(x_centres), len(xi)), dtype=complex)
    for i, xc in enumerate(x_centres):
        shift = (y - xc + g.L / 2) % g.L - g.L / 2
        w = window(shift) * f.values
        out[i] = g.h * np.exp(-2j * np.pi * np.outer(xi, y)) @ w
    return out


def test_stft_matches_direct_sum_in_all_modes():
    g = GridSpec(1, 256, 16.0)
    x = g.axis()
    f = SampledField(g, np.exp(2j * np.pi * x**2 / 4) * np.exp(-(x**2) / 40))
    w = gaussian_window(1.0)
    for mode, pad in (("full", 4), ("local", 2)):
        P = stft(f, w, 4, pad=pad, mode=mode)
        D = direct_stft(f, w, P.x[:, 0], P.xi_axis)
        # patches read the field periodically; compare where the window misses the seam
        inside = np.abs(P.x[:, 0]) <= g.L / 2 - w.radius()
        assert inside.sum() > 10
        assert np.max(np.abs(P.values - D)[inside]) < 1e-10
        assert np.allclose(np.abs(P.values), np.abs(D), atol=0.05)


def test_gaussian_portrait_norms_have_closed_forms():
    # |V_g g(x, xi)| = exp(-pi x^2 / 2) exp(-pi xi^2 / 2) / sqrt(2) for g = exp(-pi x^2)
    g = GridSpec(1, 512, 32.0)
    f = field_from_function(g, lambda x: np.exp(-np.pi * x[..., 0] ** 2))
    P = stft(f, gaussian_window(1.0), 2, mode="full")
    assert modulation_norm(P, 1, np.inf) == pytest.approx(1.0, rel=1e-6)
    assert amalgam_norm(P, 1, np.inf) == pytest.approx(1.0, rel=1e-6)
    assert modulation_norm(P, 2, 2) == pytest.approx(2**-0.5, rel=1e-6)
    assert amalgam_norm(P, 2, 2) == pytest.approx(2**-0.5, rel=1e-6)
    assert slice_integrals(P).max() == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ParameterError):
        modulation_norm(P, 0.5, 1)


def test_amalgam_scans_agree():
    g = GridSpec(1, 256, 32.0)
    x = g.axis()
    u = np.exp(1j * x**2 / 3) * np.exp(-((x - 3) ** 2) / 10)
    w = gaussian_window(1.0)
    full, _ = amalgam_sup(SampledField(g, u), w, coarse=1, pad=2)
    refined, _ = amalgam_sup(SampledField(g, u), w, coarse=4, pad=2)
    stacked = stacked_amalgam_sup(np.stack([u, 2 * u]), g, w, pad=2)
    assert stacked[0] == pytest.approx(full, rel=1e-12)
    assert stacked[1] == pytest.approx(2 * full, rel=1e-12)
    assert refined == pytest.approx(full, rel=1e-3)
    with pytest.raises(StructuralError):
        stacked_amalgam_sup(np.zeros((1, 16)), GridSpec(2, 4, 1.0), w)


def test_windows():
    g = gaussian_window(2.0, 2)
    assert g.l1_norm == pytest.approx(4.0)
    assert g(np.zeros(2)) == 1.0
    assert g.fourier(np.zeros(2)) == pytest.approx(4.0)
    b = bump_window(1.0)
    assert b(np.array([1.0, 1.5])).max() == 0.0
    assert b.radius() == 1.0
    yy = np.linspace(-1, 1, 200001)
    assert b.l1_norm == pytest.approx(np.trapezoid(b(yy), yy), rel=1e-8)
    assert window_from_config({"kind": "bump", "rho": 2.0}, 1) == bump_window(2.0)
    with pytest.raises(ParameterError):
        window_from_config({"kind": "hann"}, 1)
    with pytest.raises(ParameterError):
        gaussian_window(0.0)


def test_fit_loglog_recovers_power():
    x = np.logspace(0, 3, 20)
    fit = fit_loglog(x, 3 * x**-2.5)
    assert fit.slope == pytest.approx(-2.5) and fit.residual < 1e-12
    with pytest.raises(DiagnosticError):
        fit_loglog([1.0], [1.0])


def test_analytic_slices_match_grid_portrait():
    s = radial_power(2, 1)
    w = gaussian_window(1.0)
    F = fresnel_field(s, GridSpec(1, 4096, 32.0))
    P = stft(F, w, 32)
    stream = fresnel_norms(s, w, 32.0, dx=0.25)
    # the grid field is periodic, so compare slices whose window misses the seam
    inside = np.abs(P.x[:, 0]) <= 16.0 - w.radius()
    sl = stream.slice_norms(1.0)
    assert np.allclose(slice_integrals(P)[inside], sl[0], rtol=1e-6)
    # x-flat slices for the quadratic chirp
    assert sl.max() / sl.min() == pytest.approx(1.0, abs=1e-9)


def test_region_partition_and_omega_measure():
    s = SmoothedSymbol(radial_power(2, 1))
    P = stft(fresnel_field(radial_power(2, 1), GridSpec(1, 1024, 16.0)), bump_window(1.0), 16, pad=2)
    mask = region_partition(P, s, 4.0)
    grad = s.grad(P.x)
    dist = np.abs(P.xi_axis[None, :] - grad)
    assert np.array_equal(mask, dist <= 4.0)
    # for mu = x^2 the set |xi - 2x| <= 4 has x-measure 4 for every xi
    x = np.arange(-32, 32, 0.01)[:, None]
    assert omega2_sup_measure(s, 4.0, x, 0.01, np.array([[0.0], [5.0]])) == pytest.approx(4.0, abs=0.03)


def test_decay_fit_is_steep_for_quadratic_chirp():
    s = radial_power(2, 1)
    w = bump_window(1.0)
    P = stft(fresnel_field(s, GridSpec(1, 4096, 16.0)), w, 8, pad=2)
    fit = decay_exponent_fit(P, SmoothedSymbol(s), 4.0, x_limit=8.0 - w.radius())
    assert fit.slope <= -4
    with pytest.raises(DiagnosticError):
        decay_exponent_fit(P, SmoothedSymbol(s), 4.0, floor=1e3)


def test_dilation_and_window_swap():
    g = GridSpec(1, 256, 32.0)
    f = field_from_function(g, lambda x: np.exp(-np.pi * x[..., 0] ** 2 / 2))
    rows = dilation_scaling_check(f, gaussian_window(1.0), [0.5, 1.0, 2.0], 1, np.inf, x_stride=2)
    # for f = exp(-pi x^2 / s^2) and a unit Gaussian window the M^(1,inf) norm is exactly s
    for r in rows:
        assert r["norm"] == pytest.approx(np.sqrt(2) / r["lambda"], rel=1e-6)
    assert rows[1]["ratio"] == pytest.approx(0.5)
    assert all(r["ratio"] <= 1 for r in rows)
    l2 = dilation_scaling_check(f, gaussian_window(1.0), [2.0], 2, 2, x_stride=1)
    assert l2[0]["ratio"] <= 1
    ratio = window_swap_equivalence(f, gaussian_window(1.0), gaussian_window(2.0), 1, np.inf, x_stride=2)
    assert 0.1 < ratio < 10
    with pytest.raises(ParameterError):
        dilation_scaling_check(f, gaussian_window(1.0), [0.0], 1, 1)
