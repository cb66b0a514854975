import math

import numpy as np
import pytest

from gkdv.errors import OverlapError, StepError
from gkdv.evolve import (
    EvolveConfig,
    PeriodicField,
    d1,
    d3,
    default_dt,
    embed,
    invariants,
    make_field,
    rhs,
    run,
    step,
)
from gkdv.analysis import find_peaks
from gkdv.model import KDV, MKDV_K33, exact_compacton, k_mn

K22 = k_mn(2, 2)


def test_make_field_and_wrap():
    f = make_field(-10, 10, 0.5)
    assert f.M == 40 and f.h == 0.5 and f.x[0] == -10 and f.x[-1] == 9.5
    assert np.allclose(f.wrap([11.0, -11.0, 10.0]), [-9.0, 9.0, -10.0])
    with pytest.raises(ValueError):
        make_field(0, 1, 0.3)


@pytest.mark.parametrize("kh", [0.1, 0.05])
def test_stencils_on_sine(kh):
    h = 0.05
    kappa = kh / h
    M = int(round(2 * math.pi / kappa / h))
    L = M * h
    kappa = 2 * math.pi / L  # exact period on the grid
    x = np.arange(M) * h
    v = np.sin(kappa * x)
    ref1 = kappa * np.cos(kappa * x)
    ref3 = -(kappa**3) * np.cos(kappa * x)
    err1 = np.max(np.abs(d1(v, h) - ref1)) / kappa
    err3 = np.max(np.abs(d3(v, h) - ref3)) / kappa**3
    # leading errors (kappa h)^2 / 6 and (kappa h)^2 / 4
    assert err1 <= 0.01 and err3 <= 0.01
    assert err1 == pytest.approx((kappa * h) ** 2 / 6, rel=0.05)
    assert err3 == pytest.approx((kappa * h) ** 2 / 4, rel=0.05)


def test_embed_places_waves(k22_profile):
    g = make_field(-20, 20, 0.1)
    f = embed([(k22_profile, -5.0, 1), (k22_profile, 10.0, -1)], g)
    peaks = find_peaks(f, 0.5)
    assert [round(p.position, 6) for p in peaks] == [-5.0, 10.0]
    assert [p.sign for p in peaks] == [1, -1]
    # near-seam centre wraps around
    f2 = embed([(k22_profile, 19.0, 1)], g)
    assert f2.u[0] > 0.5


def test_embed_rejects_overlap(k22_profile):
    g = make_field(-20, 20, 0.1)
    with pytest.raises(OverlapError):
        embed([(k22_profile, 0.0, 1), (k22_profile, 5.0, 1)], g)
    with pytest.raises(OverlapError):
        embed([(k22_profile, 0.0, 1)], make_field(-5, 5, 0.1))
    with pytest.raises(ValueError):
        embed([(k22_profile, 0.0, 2)], g)


def test_rhs_of_travelling_wave_is_translation():
    # u_t = -rhs; for a travelling wave u_t = -lam u_x, so rhs ~ lam D1 u
    h = 0.02
    g = make_field(-20, 20, h)
    u = exact_compacton(K22, 0.75, g.x)
    r = rhs(K22, u, h)
    inner = np.abs(g.x) < 5.5
    assert np.max(np.abs(r - 0.75 * d1(u, h))[inner]) < 1e-3


def test_step_conserves_mass_and_is_pure(k22_profile):
    f = embed([(k22_profile, 0.0, 1)], make_field(-20, 20, 0.1))
    before = f.u.copy()
    g = step(f, K22, 0.01)
    assert np.array_equal(f.u, before)
    assert g.t == pytest.approx(0.01)
    assert abs(invariants(g)[0] - invariants(f)[0]) < 1e-13
    assert step(f, K22, 0.0).u is not f.u


def test_time_reversal(k22_profile):
    cfg = EvolveConfig(dt=0.01, t_end=0.0, newton_tol=1e-12)
    f = embed([(k22_profile, 0.0, 1)], make_field(-20, 20, 0.1))
    back = step(step(f, K22, 0.01, cfg), K22, -0.01, cfg)
    assert np.max(np.abs(back.u - f.u)) <= 100 * cfg.newton_tol
    assert back.t == pytest.approx(0.0, abs=1e-15)


def test_odd_equivariance(mkdv_profiles_coarse):
    ps = mkdv_profiles_coarse
    g = make_field(-40, 40, 0.05)
    f = embed([(ps[2.0], -15.0, 1), (ps[1.0], 10.0, -1)], g)
    neg = PeriodicField(f.x_left, f.x_right, -f.u, f.t)
    cfg = EvolveConfig(dt=0.002, t_end=0.1, snapshot_stride=50)
    a = run(f, MKDV_K33, cfg).final.u
    b = run(neg, MKDV_K33, cfg).final.u
    assert np.max(np.abs(a + b)) <= 100 * cfg.newton_tol


def test_second_order_in_time(k22_profile):
    g = embed([(k22_profile, -5.0, 1)], make_field(-20, 20, 0.1))

    def position(dt):
        r = run(g, K22, EvolveConfig(dt=dt, t_end=2.0, snapshot_stride=10**6))
        return find_peaks(r.final, 0.5)[0].position

    ref = position(0.0025)
    e1, e2 = abs(position(0.04) - ref), abs(position(0.02) - ref)
    assert 3.0 <= e1 / e2 <= 5.0


def test_run_lands_on_t_end(k22_profile):
    g = embed([(k22_profile, 0.0, 1)], make_field(-20, 20, 0.1))
    r = run(g, K22, EvolveConfig(dt=0.03, t_end=0.1, snapshot_stride=2))
    assert r.steps == 4
    assert r.times[-1] == pytest.approx(0.1, abs=1e-15)
    assert len(r.times) == 3  # t = 0, after step 2, final
    assert r.mass_drift() < 1e-13
    zero = run(g, K22, EvolveConfig(dt=0.03, t_end=0.0))
    assert zero.steps == 0 and len(zero.snapshots) == 1


def test_progress_callback(k22_profile):
    g = embed([(k22_profile, 0.0, 1)], make_field(-20, 20, 0.1))
    seen = []
    run(g, K22, EvolveConfig(dt=0.05, t_end=0.2), progress=lambda k, n, f: seen.append((k, n)))
    assert seen == [(1, 4), (2, 4), (3, 4), (4, 4)]


def test_step_error_reports_time():
    g = make_field(-5, 5, 0.1)
    g.u[:] = 50.0 * np.exp(-g.x**2)
    g.t = 3.0
    with pytest.raises(StepError) as err:
        step(g, KDV, 5.0, EvolveConfig(dt=5.0, t_end=0.0, newton_max=3))
    assert err.value.t == 3.0


def test_config_validation():
    with pytest.raises(ValueError):
        EvolveConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ValueError):
        EvolveConfig(dt=0.1, t_end=-1.0)
    with pytest.raises(ValueError):
        EvolveConfig(dt=0.1, t_end=1.0, snapshot_stride=0)


def test_default_dt():
    assert default_dt(0.1, [2.0, 1.0]) == pytest.approx(0.01)
    assert default_dt(0.05, [5.14], cap=0.002) == 0.002
    assert default_dt(0.01, [0.5]) == pytest.approx(0.005)
