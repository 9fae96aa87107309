import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bnlslab import suites
from bnlslab.errors import BracketError, NotConvergedError, RegimeError, RootFindingError
from bnlslab.functionals import ModelParams, gn_deficit, j_functional
from bnlslab.grid import Field, spectral_shift
from bnlslab.groundstate import GroundStateResult, PetviashviliConfig, solve_profile
from bnlslab.thresholds import (
    LOCALIZED_EDGE,
    TOL_NEGATIVE,
    TOL_ZERO,
    Mu0Bracket,
    Mu0Sample,
    check_mu2_criterion,
    classify_probe,
    critical_thresholds,
    critical_trial_energy,
    default_k_grid,
    f_k,
    fk_analysis,
    fk_roots,
    gn_constants,
    locate_mu0,
    read_report,
    thresholds_report,
    write_report,
)

# Oracles from scipy.integrate.solve_bvp on the critical profile equation (d = 1, p = 9).
BVP_LAMBDA1 = 2.39800985242248
BVP_B_STAR = 79.58303301872438
BVP_B_LOWER_HALF = 50.98063602587612  # mu = -lambda1 / 2
BVP_BETA_HALF = 0.9458518014585355


def lambda0_closed_form(gn, m0):
    # y1 decreases in k, so the sup of min(k, y1(k)) sits at k = y1(k);
    # f_k(k) = -C k^s = m0 then gives k directly
    return (-m0 / gn.C_pd) ** (1.0 / gn.exponent)


@pytest.fixture(scope="module")
def gn3(q3):
    return gn_constants(q3)


@pytest.fixture(scope="module")
def crit_half(qstar):
    return critical_thresholds(qstar, -0.5 * suites.critical_constants()[1])


# -- GN constants -----------------------------------------------------------------

def test_gn_definitional_identity(gn3):
    p = 3.0
    assert gn3.B_pd == (p + 1) * gn3.C_pd
    assert (1 / gn3.B_pd) * gn3.q_norm_L2 ** (-(p - 1)) * (p + 1) / 2 == pytest.approx(1.0, abs=1e-12)
    assert gn3.B_pd > 0


@pytest.mark.parametrize("p", [3.0, 5.0])
def test_j_of_profile_is_inverse_B(p):
    q = suites.profile("qp", p)
    gn = gn_constants(q)
    assert j_functional(q.profile, q.params) == pytest.approx(1 / gn.B_pd, rel=1e-6)
    assert gn.j_mismatch < 1e-6


def test_gn_requires_converged_profile(desk_grid, qstar, gs3):
    bad = solve_profile("qp", ModelParams(1, 3.0), desk_grid, PetviashviliConfig(max_iters=2))
    with pytest.raises(NotConvergedError):
        gn_constants(bad)
    with pytest.raises(NotConvergedError):
        gn_constants(gs3)
    with pytest.raises(NotConvergedError):
        critical_thresholds(suites.profile("qp", 3.0), 0.0)


@given(st.integers(0, 10_000))
def test_gn_deficit_nonnegative(seed):
    q = suites.profile("qp", 3.0)
    gn = gn_constants(q)
    (f,) = suites.random_fields(q.profile.grid, 1, seed)
    deficit, scale = gn_deficit(f, q.params, gn)
    assert deficit >= -1e-8 * scale


@given(st.floats(-math.pi, math.pi), st.integers(-100, 100))
def test_gn_constants_gauge_invariant(theta, k):
    q = suites.profile("qp", 3.0)
    base = gn_constants(q)
    moved = spectral_shift(q.profile.scaled(np.exp(1j * theta)), (k * q.profile.grid.spacing,))
    other = gn_constants(dataclasses.replace(q, profile=moved))
    assert other.B_pd == pytest.approx(base.B_pd, rel=1e-10)
    assert other.C_pd == pytest.approx(base.C_pd, rel=1e-10)


# -- critical thresholds -------------------------------------------------------

def test_critical_against_bvp_oracle(qstar, crit_half):
    ct0 = critical_thresholds(qstar, 0.0)
    assert ct0.lambda1 == pytest.approx(BVP_LAMBDA1, rel=1e-8)
    assert ct0.b_star == pytest.approx(BVP_B_STAR, rel=1e-8)
    assert crit_half.b_lower == pytest.approx(BVP_B_LOWER_HALF, rel=1e-8)
    assert crit_half.beta == pytest.approx(BVP_BETA_HALF, rel=1e-8)


def test_critical_examples(qstar, crit_half):
    ct0 = critical_thresholds(qstar, 0.0)
    assert ct0.b_lower == ct0.b_star
    lam1 = ct0.lambda1
    assert critical_thresholds(qstar, -lam1).ratio == pytest.approx(1.0, abs=1e-10)
    assert crit_half.ratio == pytest.approx(1 - lam1**2 / 16, rel=1e-6)
    assert crit_half.closed_form_gap < 1e-6


def test_critical_wrong_regime(q3):
    fake = GroundStateResult(q3.profile, 0.0, 0.0, q3.pohozaev, 0, True, "ProfileQstar", ModelParams(1, 3.0))
    with pytest.raises(RegimeError):
        critical_thresholds(fake, 0.0)


@given(st.floats(-5.0, 2.0))
def test_window_characterisation(mu):
    q = suites.profile("qstar", 9.0)
    ct = critical_thresholds(q, mu)
    assert ct.closed_form_gap < 1e-6
    lam1 = ct.lambda1
    inside = -lam1 < mu < 0
    # near the endpoints the bracket is 1 to rounding; skip the ambiguous sliver
    if min(abs(mu), abs(mu + lam1)) > 1e-9:
        assert (ct.b_lower < ct.b_star) == inside
        if not math.isnan(ct.beta):
            assert (0 < ct.beta < 1) == inside


def test_in_window(crit_half):
    assert crit_half.in_window(0.5 * (crit_half.b_lower + crit_half.b_star))
    assert not crit_half.in_window(crit_half.b_star)
    assert not crit_half.in_window(crit_half.b_lower)


def test_mu2_criterion_strict(gs3):
    r = GroundStateResult(gs3.profile, -0.125, 0.0, gs3.pohozaev, 0, True, "VP", gs3.params)
    assert not check_mu2_criterion(r, -1.0)  # energy == -mu^2/8 exactly
    r.energy = -0.125 - 1e-15
    assert check_mu2_criterion(r, -1.0)
    # mu -> 0^-: the criterion reduces to m_mu < 0
    assert check_mu2_criterion(gs3, -1e-8) == (gs3.energy < 0)


@given(st.floats(0.05, 0.95), st.floats(0.3, 1.5))
def test_trial_energy_criterion_iff_b_above_lower(t, bscale, ):
    q = suites.profile("qstar", 9.0)
    lam1 = suites.critical_constants()[1]
    mu = -t * lam1
    ct = critical_thresholds(q, mu)
    b = bscale * ct.b_lower
    if abs(b - ct.b_lower) < 1e-8 * ct.b_lower:
        return
    e = critical_trial_energy(q, mu, b)
    assert (e < -mu * mu / 8) == (b > ct.b_lower)


# -- f_k and lambda0 -------------------------------------------------------------

@pytest.fixture(scope="module")
def fk3(gn3):
    m0 = suites.ground_state(3.0, 0.0, spec=suites.PROFILE_GRID).energy
    return fk_analysis(gn3, m0)


def test_fk_basic(fk3):
    assert fk3.m0 < 0
    assert np.all(fk3.f(fk3.k_grid, 0.0) == 0.0)
    for k, y1, y2 in zip(fk3.k_grid, fk3.y1, fk3.y2):
        assert y1 < y2
        assert fk3.f(k, y1) == pytest.approx(fk3.m0, abs=1e-10)
        assert fk3.f(k, y2) == pytest.approx(fk3.m0, abs=1e-10)
        ys = np.linspace(y1, y2, 50)[1:-1]
        assert np.all(fk3.f(k, ys) < fk3.m0)
        assert fk3.f(k, 0.5 * y1) > fk3.m0
        assert fk3.f(k, 1.5 * y2) > fk3.m0
    assert fk3.y1_decreasing and fk3.unimodal and not fk3.notes


def test_lambda0_sup_and_oracle(fk3, gn3):
    assert fk3.lambda0 > 0
    assert np.all(fk3.lambda0 >= fk3.objective() - 1e-15)
    assert fk3.lambda0 == pytest.approx(lambda0_closed_form(gn3, fk3.m0), rel=1e-9)
    assert fk3.lambda0 == pytest.approx(0.0803582346033506, rel=1e-9)
    assert fk3.k_star == pytest.approx(fk3.lambda0, rel=1e-6)


def test_lambda0_p5():
    lam = suites.lambda0_for(5.0)
    # oracle from solve_bvp mass + exact m0; the flow m0 carries a 4e-8 box effect
    assert lam == pytest.approx(0.017950751724738676, rel=1e-7)


@given(st.floats(1e-3, 50.0), st.floats(0.1, 1.5))
def test_fk_roots_property(k, depth):
    c, s = 0.107992, 0.5
    ys = np.linspace(0, 4 * (k + 1), 40001)
    lowest = f_k(ys, k, c, s).min()
    m0 = depth * lowest if depth < 1 else 0.999 * lowest
    y1, y2 = fk_roots(k, m0, c, s)
    assert y1 < y2
    assert abs(f_k(y1, k, c, s) - m0) < 1e-10
    assert abs(f_k(y2, k, c, s) - m0) < 1e-10


def test_fk_errors(gn3):
    with pytest.raises(RootFindingError):
        fk_analysis(gn3, 0.0)
    with pytest.raises(RootFindingError):
        fk_roots(1.0, -1e3, gn3.C_pd, gn3.exponent)
    with pytest.raises(ValueError):
        fk_analysis(gn3, -0.03, [1.0, 0.5])
    with pytest.raises(ValueError):
        fk_analysis(gn3, -0.03, [-1.0, 0.5])
    g = default_k_grid()
    assert len(g) == 40 and g[0] == pytest.approx(1e-2) and g[-1] == pytest.approx(1e2)


# -- mu0 machinery -------------------------------------------------------------

def test_locate_mu0_regime(desk_grid):
    with pytest.raises(RegimeError):
        locate_mu0(ModelParams(1, 3.0), desk_grid)
    with pytest.raises(RegimeError):
        locate_mu0(ModelParams(1, 9.0), desk_grid)
    with pytest.raises(BracketError):
        locate_mu0(ModelParams(1, 5.0), desk_grid, bracket0=(0.3, 0.1))


def _fake(profile, energy, status="converged"):
    return GroundStateResult(profile, energy, 0.0, None, 0, True, "VP", ModelParams(1, 5.0), status)


def test_classify_probe(gs3, desk_grid):
    loc = gs3.profile
    assert classify_probe(_fake(loc, -1e-3))[0] == "negative"
    assert classify_probe(_fake(loc, -1e-7))[0] == "zero"
    assert classify_probe(_fake(loc, 5e-5))[0] == "undecided"
    assert classify_probe(_fake(loc, float("nan")))[0] == "undecided"
    flat = Field(desk_grid, np.ones(256) / math.sqrt(desk_grid.box_length) + 0j)
    # a spread-out state never certifies a negative sign, only "zero"
    label, edge = classify_probe(_fake(flat, -2e-6))
    assert edge > LOCALIZED_EDGE and label == "zero"
    assert classify_probe(_fake(flat, -2e-5))[0] == "undecided"
    assert TOL_NEGATIVE < TOL_ZERO


def test_bracket_helpers():
    s = [Mu0Sample(0.0, -1e-3, "negative", "converged", 0.0), Mu0Sample(0.4, 0.0, "zero", "converged", 0.5)]
    b = Mu0Bracket(0.0, 0.4, 0.05, s)
    assert b.width == 0.4 and b.energy_at(0.4) == 0.0


def test_report_round_trip(tmp_path, gn3, crit_half, fk3):
    rep = thresholds_report(gn3, crit_half, fk3, digests={"q": "abc"})
    for key in ("B_pd", "C_pd", "b_star", "b_lower", "lambda1", "beta", "lambda0", "k_star", "digests"):
        assert key in rep
    path = tmp_path / "t.json"
    write_report(rep, path)
    assert read_report(path) == rep
    assert thresholds_report() == {"digests": {}}
