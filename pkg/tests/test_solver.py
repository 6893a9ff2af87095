import numpy as np
import pytest
from scipy import integrate

from fresnel_lab.errors import ModeError, NonContractionError, NumericQualityError, ParameterError, StructuralError
from fresnel_lab.grid import GridSpec, SampledField, field_from_function, forward_fourier, inverse_fourier, lp_norm
from fresnel_lab.potentials import CroppedCoulomb, DiracComb, Envelope, SphereShell
from fresnel_lab.propagator import MultiplierPropagator
from fresnel_lab.solver import (
    Nonlinearity,
    SolverConfig,
    dual_exponent,
    exp_moments,
    global_solve,
    graded_mesh,
    interval_weights,
    lipschitz_constant_C_R,
    local_step_T,
    low_regularity_solve,
    low_regularity_step_T,
    picard_solve,
    solve,
    step_from_exponent,
)
from fresnel_lab.symbols import radial_power


def datum(g, width=2.0, fl1=1.0):
    f = field_from_function(g, lambda x: np.exp(-np.pi * np.sum(x**2, -1) / width**2))
    return f * (fl1 / lp_norm(forward_fourier(f), 1))


GRID = GridSpec(1, 128, 32.0)
DELTA = DiracComb([[0.0]], [1.0])


def dirac_config(**kw):
    opts = dict(nodes=128)
    opts.update(kw)
    f = opts.pop("f", datum(GRID))
    return SolverConfig(GRID, radial_power(4, 1), opts.pop("potential", DELTA),
                        opts.pop("nonlinearity", Nonlinearity()), f, **opts)


def test_nonlinearity_values_and_constants():
    u = np.array([1 + 1j, 2.0])
    assert np.allclose(Nonlinearity("power_abs", 2.0, 1)(u), 2 * np.abs(u) ** 2 * u)
    assert np.allclose(Nonlinearity("series", coefficients=((2, 1, 1.0),))(u), u**2 * np.conj(u))
    with pytest.raises(StructuralError):
        Nonlinearity("series", coefficients=((0, 0, 1.0),))
    with pytest.raises(ParameterError):
        Nonlinearity("power", k=0)
    assert lipschitz_constant_C_R(Nonlinearity(), 5.0) == 1.0
    assert lipschitz_constant_C_R(Nonlinearity("power", 1.0, 2), 1.0, 1.0) == 2.0
    assert lipschitz_constant_C_R(Nonlinearity("power_abs", 1.0, 1), 0.5, 1.0) == pytest.approx(0.75)
    assert Nonlinearity("power", k=1).is_linear


def test_step_rules():
    # ((m - 2d) / (2 m C' C_R V))^(m / (m - 2d)) for m = 4, d = 1
    assert local_step_T(4, 1, 2.0, 1.0, 0.5) == pytest.approx((2 / (2 * 4 * 2.0 * 0.5)) ** 2)
    assert local_step_T(4, 1, 0.01, 1.0, 0.01) == 1.0
    with pytest.raises(ModeError):
        local_step_T(2, 1, 1.0, 1.0, 1.0)
    assert low_regularity_step_T(4, 1, np.inf, 2.0, 0.5) == local_step_T(4, 1, 2.0, 1.0, 0.5)
    with pytest.raises(ModeError):
        low_regularity_step_T(2, 2, 2.0, 1.0, 1.0)
    assert step_from_exponent(0.5, 1.0, 1.0, 0.0) == 1.0
    assert dual_exponent(1) == np.inf and dual_exponent(np.inf) == 1.0 and dual_exponent(3) == 1.5


def test_exp_moments_against_quadrature():
    for z in (0.0, 1e-6j, 0.3 - 1.7j, 2.5j, -40j, 3.0 + 0.5j):
        m = exp_moments(np.array([z]), kmax=5)[:, 0]
        for k in range(6):
            re = integrate.quad(lambda u: (np.exp(z * u) * u**k).real, 0, 1, epsabs=1e-14)[0]
            im = integrate.quad(lambda u: (np.exp(z * u) * u**k).imag, 0, 1, epsabs=1e-14)[0]
            assert m[k] == pytest.approx(re + 1j * im, abs=1e-13)


def test_interval_weights_are_exact_for_polynomials():
    mesh = graded_mesh(0.3, 12, 0.5)
    assert mesh[0] == 0 and mesh[-1] == pytest.approx(0.3)
    assert np.allclose(np.diff(mesh[:4]) / mesh[1], [1, 15, 65])  # (i/n)^4 grading
    mu = np.array([0.0, 7.0, 150.0])
    i = 5
    st, ws = interval_weights(mesh, i, mu, 6)
    a, b = mesh[i], mesh[i + 1]
    for k in range(6):
        got = sum(w * mesh[j] ** k for j, w in zip(st, ws))
        for q, m in enumerate(mu):
            f = lambda r: np.exp(2j * np.pi * (b - r) * m) * r**k
            ref = integrate.quad(lambda r: f(r).real, a, b, epsabs=1e-16)[0] + 1j * integrate.quad(
                lambda r: f(r).imag, a, b, epsabs=1e-16)[0]
            assert got[q] == pytest.approx(ref, abs=1e-12)


def test_zero_potential_converges_to_free_evolution():
    cfg = dirac_config(potential=None, nodes=16)
    sol = picard_solve(cfg)
    assert sol.windows[0].iterations == 1
    free = MultiplierPropagator(cfg.symbol, GRID).apply(sol.times[-1], cfg.f, check=False)
    assert np.max(np.abs(sol.final.values - free.values)) < 1e-14


def test_global_free_evolution_to_t10():
    cfg = dirac_config(potential=None, nodes=16, t_max=10.0)
    sol = global_solve(cfg)
    assert sol.times[-1] == pytest.approx(10.0)
    exact = MultiplierPropagator(cfg.symbol, GRID).apply(10.0, cfg.f, check=False)
    assert np.max(np.abs(sol.final.values - exact.values)) < 1e-12


@pytest.mark.slow
def test_dirac_window_contracts_and_is_lipschitz():
    cfg = dirac_config()
    sol = picard_solve(cfg)
    w = sol.windows[0]
    assert max(w.ratios) <= 0.6 and w.residual <= 1e-10 and w.quadrature_estimate <= 1e-11
    assert sol.norms.max() <= 2 * sol.norms[0] + cfg.tolerance
    half = picard_solve(dirac_config(f=0.5 * cfg.f), T=w.T)
    diff = max(lp_norm(forward_fourier(a - b), 1) for a, b in zip(sol.fields, half.fields))
    # the solution norm here is the W^{1,inf} amalgam norm, bounded by FL^1
    assert diff <= 2 * lp_norm(forward_fourier(0.5 * cfg.f), 1) + 2 * cfg.tolerance


@pytest.mark.slow
def test_global_windows_join_continuously():
    cfg = dirac_config(potential=DiracComb([[0.0]], [1.0], Envelope("sinusoid", (1.0, 0.5, 20.0))))
    T = picard_solve(cfg).windows[0].T
    sol = global_solve(dirac_config(potential=cfg.potential, t_max=2.5 * T))
    assert len(sol.windows) == 3
    starts = [w.start for w in sol.windows]
    assert starts[1] == pytest.approx(T) and starts[2] == pytest.approx(2 * T)
    assert np.all(np.diff(sol.times) > 0)
    assert all(max(w.ratios) <= 0.6 for w in sol.windows)


def test_workers_do_not_change_the_result():
    a = picard_solve(dirac_config(nodes=32, check_quadrature=False, step=0.002))
    b = picard_solve(dirac_config(nodes=32, check_quadrature=False, step=0.002, workers=3))
    assert np.array_equal(a.final.values, b.final.values)


def test_nonlinear_window_and_global_refusal():
    nl = Nonlinearity("power_abs", 0.5, 1)
    cfg = dirac_config(nonlinearity=nl, nodes=64, step=0.002, algebra_constant=1.0, check_quadrature=False)
    sol = picard_solve(cfg)
    assert sol.windows[0].residual <= 2e-10
    with pytest.raises(ModeError):
        global_solve(dirac_config(nonlinearity=nl, t_max=0.1, algebra_constant=1.0))


def test_config_validation():
    g2 = GridSpec(2, 16, 8.0)
    with pytest.raises(ModeError, match="m > 2d"):
        SolverConfig(g2, radial_power(4, 2), None, Nonlinearity(), datum(g2))
    with pytest.raises(ModeError, match="q <= p'"):
        SolverConfig(g2, radial_power(3, 2), None, Nonlinearity(), datum(g2), mode="low_regularity", p=3, q=2)
    with pytest.raises(ModeError, match="m > 2d/p'"):
        SolverConfig(g2, radial_power(2, 2), None, Nonlinearity(), datum(g2), mode="low_regularity", p=3, q=1)
    with pytest.raises(ModeError, match="G\\(u\\) = u"):
        SolverConfig(g2, radial_power(3, 2), None, Nonlinearity("power", 1.0, 2), datum(g2),
                     mode="low_regularity", p=3, q=1)
    g3 = GridSpec(3, 8, 8.0)
    with pytest.raises(ModeError, match="requires p > 3"):
        SolverConfig(g3, radial_power(6, 3), SphereShell(1.0, None, 3), Nonlinearity(), datum(g3),
                     mode="low_regularity", p=2, q=1)
    with pytest.raises(ModeError, match="requires p = inf"):
        SolverConfig(g2, radial_power(3, 2), DiracComb([[0.0, 0.0]], [1.0]), Nonlinearity(), datum(g2),
                     mode="low_regularity", p=3, q=1)
    with pytest.raises(ParameterError, match="exceeds R/2"):
        dirac_config(R=1.0)
    with pytest.raises(ParameterError):
        dirac_config(nodes=7)
    with pytest.raises(StructuralError):
        dirac_config(f=forward_fourier(datum(GRID)))
    assert dirac_config().R == pytest.approx(2.0)


def test_low_regularity_at_p_infinity_equals_standard():
    a = picard_solve(dirac_config(nodes=32, check_quadrature=False, step=0.002))
    b = picard_solve(dirac_config(nodes=32, check_quadrature=False, step=0.002, mode="low_regularity",
                                  p=np.inf, q=1))
    assert np.array_equal(a.final.values, b.final.values)
    with pytest.raises(ModeError):
        low_regularity_solve(dirac_config(nodes=32))


def test_quadrature_refusal_with_too_few_nodes():
    g = GridSpec(1, 256, 32.0)
    f = datum(g, width=1.0)
    cfg = SolverConfig(g, radial_power(4, 1), DELTA, Nonlinearity(), f, nodes=12)
    with pytest.raises(NumericQualityError):
        picard_solve(cfg)


def test_non_contraction_is_reported():
    strong = DiracComb([[0.0]], [400.0])
    with pytest.raises(NonContractionError):
        picard_solve(dirac_config(potential=strong, nodes=16, step=1.0, max_halvings=0, check_quadrature=False))


@pytest.mark.slow
def test_low_regularity_coulomb_window():
    g = GridSpec(2, 32, 8.0)
    cfg = SolverConfig(g, radial_power(3, 2), CroppedCoulomb(1.0, 1.0, 2), Nonlinearity(), datum(g, 1.0),
                       mode="low_regularity", p=3, q=1, norm="fourier", nodes=128, tolerance=1e-8, step=0.01)
    sol = solve(cfg)
    w = sol.windows[0]
    assert max(w.ratios) <= 0.6 and w.quadrature_estimate <= 1e-9


@pytest.mark.slow
def test_low_regularity_sphere_window():
    g = GridSpec(3, 32, 16.0)
    rng = np.random.default_rng(0)
    f = inverse_fourier(SampledField(g, np.exp(2j * np.pi * rng.uniform(size=g.shape)), "frequency"))
    f = f * (1 / lp_norm(forward_fourier(f), 1))
    cfg = SolverConfig(g, radial_power(6, 3), SphereShell(1.0, None, 3), Nonlinearity(), f,
                       mode="low_regularity", p=6, q=1, norm="fourier", nodes=32, tolerance=1e-8, step=0.01)
    w = low_regularity_solve(cfg).windows[0]
    assert max(w.ratios) <= 0.6 and w.residual <= 2e-8
