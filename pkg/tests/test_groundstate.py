import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bnlslab import suites
from bnlslab.errors import ConfigError, RegimeError
from bnlslab.functionals import ModelParams, energy_mu, j_functional, model_energy
from bnlslab.grid import Field, make_grid, norm_L2, quadratic_parts, spectral_shift
from bnlslab.groundstate import (
    GradientFlowConfig,
    PetviashviliConfig,
    gauge_fix,
    initial_guess,
    minimization_curve,
    participation_ratio,
    problem_coefficient,
    profile_coefficients,
    result_from_field,
    solve_constrained,
    solve_constrained_multistart,
    solve_profile,
)

from conftest import gaussian

# Independent oracle: scipy.integrate.solve_bvp on the half line (Q'(0) = Q'''(0) = 0,
# decay at x = 40) for gamma Q'''' + omega Q = Q^p, mass = 2 int_0^inf Q^2.
BVP_MASS = {
    ("qp", 3.0): 4.629970438659407,
    ("qp", 5.0): 3.7318887115890456,
    ("qstar", 9.0): 2.986792978326142,
}


def m0_closed_form(p: float) -> float:
    """min over y of y^2/2 - C y^s with C = C_{p,d} from the p-profile, s = (p-1)/4 (d = 1)."""
    q = suites.profile("qp", p).profile
    c_pd = 1.0 / (2.0 * norm_L2(q) ** (p - 1.0))
    s = (p - 1.0) / 4.0
    y = (s * c_pd) ** (1.0 / (2.0 - s))
    return 0.5 * y * y - c_pd * y**s


# -- configs ------------------------------------------------------------------

def test_config_invariants():
    with pytest.raises(ConfigError):
        GradientFlowConfig(time_step=0.0)
    with pytest.raises(ConfigError):
        GradientFlowConfig(shift=-1.0)
    with pytest.raises(ConfigError):
        GradientFlowConfig(energy_tol=0.0)
    with pytest.raises(ConfigError):
        GradientFlowConfig(initial_guess="file")
    assert GradientFlowConfig().shift_for(1.0) == 0.1
    assert GradientFlowConfig().shift_for(-2.0) == pytest.approx(1.1)
    with pytest.raises(ConfigError):
        GradientFlowConfig(shift=0.5).shift_for(-2.0)
    assert GradientFlowConfig(shift=1.2).shift_for(-2.0) == 1.2


def test_petviashvili_exponent():
    assert PetviashviliConfig().exponent_for(3.0) == 1.5
    with pytest.raises(ConfigError):
        PetviashviliConfig(stabilization=1.0).exponent_for(3.0)
    with pytest.raises(ConfigError):
        PetviashviliConfig(stabilization=4.0).exponent_for(3.0)


def test_nonpositive_symbol_rejected(desk_grid):
    with pytest.raises(ConfigError):
        solve_profile("qp", ModelParams(1, 3.0), desk_grid,
                      PetviashviliConfig(linear_symbol=desk_grid.k4 - 1.0))


def test_regime_errors(desk_grid):
    with pytest.raises(RegimeError):
        problem_coefficient(ModelParams(1, 9.0), "VP")
    with pytest.raises(RegimeError):
        problem_coefficient(ModelParams(1, 3.0), "VPb")
    with pytest.raises(RegimeError):
        problem_coefficient(ModelParams(1, 3.0), "ProfileQstar")
    assert problem_coefficient(ModelParams(1, 9.0, b=3.0), "VPb") == 3.0
    assert problem_coefficient(ModelParams(1, 9.0, b=3.0), "MinPc") == 1.0
    with pytest.raises(RegimeError):
        solve_constrained(ModelParams(2, 3.0), desk_grid)


def test_profile_coefficients_critical_reduce():
    """At p = 1 + 8/d the general profile equation has gamma = 1, omega = 4/d."""
    for d in (1, 2):
        p = 1.0 + 8.0 / d
        g_gen, w_gen, _ = profile_coefficients("qp", ModelParams(d, p))
        g_star, w_star, p_star = profile_coefficients("qstar", ModelParams(d, p))
        assert (g_gen, w_gen) == pytest.approx((g_star, w_star), abs=1e-15)
        assert p_star == p
    with pytest.raises(ValueError):
        profile_coefficients("eq16", ModelParams(1, 3.0))


def test_initial_guesses(desk_grid, grid2d):
    for kind in ("gaussian", "sech"):
        assert norm_L2(initial_guess(desk_grid, kind, 1.7)) == pytest.approx(1.7, rel=1e-13)
    ring = initial_guess(grid2d, "ring", 1.0)
    u = np.abs(ring.physical())
    assert u[grid2d.center_index] < u.max()
    with pytest.raises(ConfigError):
        initial_guess(desk_grid, "square")


def test_gauge_fix(desk_grid):
    u = spectral_shift(gaussian(desk_grid), (5 * desk_grid.spacing,)).scaled(np.exp(0.7j))
    g = gauge_fix(u)
    c = desk_grid.center_index
    assert abs(g.physical()[c]) == pytest.approx(np.abs(u.physical()).max())
    assert abs(g.physical()[c].imag) < 1e-15
    assert g.physical()[c].real > 0


def test_participation_ratio(desk_grid):
    assert participation_ratio(Field(desk_grid, np.ones(256) + 0j)) == pytest.approx(1.0)
    assert participation_ratio(gaussian(desk_grid)) < 0.05


# -- gradient flow examples -------------------------------------------------------

def test_vp_p3_mu0(gs3):
    assert gs3.converged and gs3.status == "converged"
    assert gs3.energy < 0
    assert norm_L2(gs3.profile) == pytest.approx(1.0, abs=1e-10)
    assert gs3.pohozaev.max_normalized < 1e-6
    assert math.isfinite(gs3.energy)


def test_vp_p3_matches_closed_form_m0():
    # the flow minimum and min f_0 agree: both equal m_0 = -0.030613076710...
    gs = suites.ground_state(3.0, 0.0, spec=suites.PROFILE_GRID)
    assert gs.energy == pytest.approx(m0_closed_form(3.0), rel=1e-10)
    assert gs.energy == pytest.approx(-0.030613076710228077, rel=1e-10)


def test_vp_p5_matches_closed_form_m0():
    gs = suites.ground_state(5.0, 0.0, spec=suites.PROFILE_GRID)
    # wide, weakly bound minimizer: the finite box costs a few parts in 1e8
    assert gs.energy == pytest.approx(m0_closed_form(5.0), rel=1e-7)
    assert gs.energy == pytest.approx(-0.000644458974966211, rel=1e-7)


def test_ground_state_beats_gaussian_trials(gs3, desk_grid):
    params = ModelParams(1, 3.0)
    trial = min(
        energy_mu(initial_guess(desk_grid, "gaussian", 1.0, w), params).total
        for w in np.linspace(0.3, 3.0, 28)
    )
    assert gs3.energy <= trial + 1e-14


def test_flow_invariants(gs3):
    hist = np.array(gs3.history)
    energies = hist[:, 1]
    # non-increasing up to the acceptance noise used by the step control
    assert np.all(np.diff(energies) <= 1e-13 * (1 + np.abs(energies[1:])))
    assert hist[:, 4].max() < 1e-12
    u = gs3.profile.physical()
    theta = np.angle(u[gs3.profile.grid.center_index])
    assert norm_L2(Field(gs3.profile.grid, np.imag(np.exp(-1j * theta) * u))) < 1e-6


@given(st.floats(-math.pi, math.pi), st.integers(-60, 60))
def test_gauge_energy_invariance(theta, k):
    gs = suites.ground_state(3.0, 0.0)
    u = gs.profile
    v = spectral_shift(u.scaled(np.exp(1j * theta)), (k * u.grid.spacing,))
    assert model_energy(v, gs.params).total == pytest.approx(gs.energy, abs=1e-12)


def test_vp_negative_mu_shift_floor():
    gs = suites.ground_state(3.0, -1.0)
    assert gs.converged
    assert gs.energy < suites.ground_state(3.0, 0.0).energy


def test_vpb_in_window():
    ct, ok, _ = suites.critical_window_results()
    mu = ok.params.mu
    assert ct.b_lower < ok.params.b < ct.b_star
    assert ok.converged
    assert ok.energy < -mu * mu / 8
    assert abs(norm_L2(ok.profile) - 1.0) < 1e-10


def test_vpb_above_b_star_diverges():
    bad = suites.critical_window_results()[2]
    assert bad.diverged and not bad.converged
    assert bad.message


def test_multistart_returns_lowest(desk_grid):
    params = ModelParams(1, 3.0, 0.5)
    r = solve_constrained_multistart(params, desk_grid)
    assert r.converged
    single = solve_constrained(params, desk_grid)
    assert r.energy <= single.energy + 1e-14


def test_max_iters_status(desk_grid):
    r = solve_constrained(ModelParams(1, 3.0), desk_grid, GradientFlowConfig(max_iters=3))
    assert r.status == "max_iters" and not r.converged
    assert "3 iterations" in r.message


def test_convergence_log(tmp_path, gs3):
    path = tmp_path / "log.csv"
    gs3.write_log(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["iter", "energy", "residual_r1", "residual_r2", "mass_drift"]
    assert len(rows) == len(gs3.history) + 1
    assert float(rows[-1][1]) == pytest.approx(gs3.history[-1][1])


def test_minimization_curve():
    g = suites.grid_of(suites.DESK)
    mus = (-1.0, 0.0, 1.0)
    curve = minimization_curve([ModelParams(1, 3.0, m) for m in mus], g)
    assert [m for m, _, _ in curve] == list(mus)
    es = [e for _, e, _ in curve]
    assert es == sorted(es)
    with pytest.raises(ConfigError):
        minimization_curve([ModelParams(1, 3.0), ModelParams(1, 5.0)], g)
    with pytest.raises(ConfigError):
        minimization_curve([ModelParams(1, 9.0, 0.0, 1.0), ModelParams(1, 9.0, 1.0, 2.0)], g, problem="VPb")
    assert minimization_curve([], g) == []


def test_minimization_curve_parallel_matches_serial():
    g = suites.grid_of(suites.DESK)
    plist = [ModelParams(1, 3.0, m) for m in (0.0, 0.5)]
    serial = minimization_curve(plist, g)
    par = minimization_curve(plist, g, workers=2)
    assert [e for _, e, _ in par] == [e for _, e, _ in serial]


def test_result_from_field(gs3):
    r = result_from_field(gs3.profile, gs3.params)
    assert r.converged
    assert r.energy == pytest.approx(gs3.energy, abs=1e-15)
    assert r.lagrange_omega == pytest.approx(gs3.lagrange_omega, rel=1e-12)
    off = result_from_field(gs3.profile.scaled(1.01), gs3.params)
    assert not off.converged and "certification" in off.message


# -- Petviashvili ----------------------------------------------------------------

@pytest.mark.parametrize("key", sorted(BVP_MASS))
def test_profile_mass_vs_bvp_oracle(key):
    which, p = key
    q = suites.profile(which, p)
    assert q.converged
    assert q.profile.grid.dim == 1
    _, _, m = quadratic_parts(q.profile)
    assert m == pytest.approx(BVP_MASS[key], rel=1e-9)


def test_qstar_mass_equals_biharmonic(qstar):
    a, _, m = quadratic_parts(qstar.profile)
    assert abs(m - a) / m < 1e-6


def test_qp_j_identity(q3):
    p = 3.0
    j = j_functional(q3.profile, q3.params)
    assert j == pytest.approx(2 / (p + 1) * norm_L2(q3.profile) ** (p - 1), rel=1e-6)


def test_general_profile_at_critical_power_is_qstar(qstar):
    qp = suites.profile("qp", 9.0)
    assert qp.converged
    assert norm_L2(qp.profile - qstar.profile) / norm_L2(qstar.profile) < 1e-6


@pytest.mark.parametrize("which,p", [("qp", 3.0), ("qp", 5.0), ("qstar", 9.0)])
def test_petviashvili_factor_monotone_tail(which, p):
    q = suites.profile(which, p)
    tail = np.abs(np.asarray(q.factors[-10:]) - 1.0)
    # |M_n - 1| shrinks step by step until it sits at the roundoff floor
    floor = 1e-14
    assert np.all((np.diff(tail) <= 0) | (tail[1:] < floor))


def test_profile_real_positive(q3):
    u = q3.profile.physical()
    assert np.abs(u.imag).max() < 1e-12
    assert u.real.max() == pytest.approx(np.abs(u).max())
    assert q3.equation_residual < 1e-9


def test_profile_nonconvergence_reported(desk_grid):
    r = solve_profile("qp", ModelParams(1, 3.0), desk_grid, PetviashviliConfig(max_iters=3))
    assert not r.converged
    assert r.status in ("oscillation", "stagnation")
