import json
import math

import numpy as np
import pytest

from mpiset.hierarchy import (
    DEGENERATE_COEFF_TOL,
    MODE_FORCED,
    MODE_SLACK,
    Certificate,
    OdeSystem,
    inner_set_membership,
    run_hierarchy,
    solve_tightening,
)
from mpiset.polynomials import Polynomial
from mpiset.sets import SemialgebraicSet
from mpiset.solver import SdpStatus, SolverOptions

X1 = Polynomial.variable(2, 0)
X2 = Polynomial.variable(2, 1)
DISK = SemialgebraicSet([1.0 - X1 ** 2 - X2 ** 2])
CONTRACTION = OdeSystem((-1.0 * X1, -1.0 * X2))
VDP = OdeSystem((-2.0 * X2, 0.8 * X1 + 10.404 * X1 ** 2 * X2 - 2.0 * X2))


@pytest.fixture(scope="module")
def contraction_run():
    return run_hierarchy(CONTRACTION, DISK, [1, 2, 3], T=1.0, mode=MODE_FORCED)


def hand_certificate(v, u=0.0, **kw):
    fields = dict(
        k=1, mode=MODE_FORCED, T=1.0, u=u, v=v, w=X1 ** 2 + X2 ** 2,
        objective=math.pi / 2, moment_value=math.pi / 2,
        status=SdpStatus.OPTIMAL, solver_stats={}, X=DISK,
    )
    fields.update(kw)
    return Certificate(**fields)


# -- system wrapper -------------------------------------------------------------

def test_ode_system_bookkeeping():
    assert VDP.n == 2
    assert VDP.degree == 3
    assert CONTRACTION.degree == 1


def test_ode_system_rejects_bad_input():
    with pytest.raises(ValueError):
        OdeSystem(())
    with pytest.raises(ValueError):
        OdeSystem((X1, Polynomial.variable(3, 0)))
    with pytest.raises(ValueError):
        OdeSystem((X1,))  # one component for a 2-variable polynomial


# -- single tightening ---------------------------------------------------------

def test_contraction_order_one(contraction_run):
    cert = contraction_run.certificate(1)
    assert cert.status is SdpStatus.OPTIMAL and cert.ok
    assert cert.u == 0.0
    assert cert.objective == pytest.approx(math.pi / 2, abs=1e-6)
    # primal and moment-side values agree to the duality gap
    assert abs(cert.objective - cert.moment_value) <= 1e-6
    assert not cert.degenerate
    assert not cert.conditioning_warning
    assert cert.v is not None and cert.w is not None
    assert cert.v.degree() <= 2 and cert.w.degree() <= 2
    assert cert.solver_stats["eq_residual"] <= 1e-8


def test_contraction_inner_set_is_nonempty(contraction_run):
    cert = contraction_run.certificate(1)
    assert inner_set_membership(cert, [0.0, 0.0])
    # v must vanish-or-stay-nonnegative on the unit circle for the inner claim
    for theta in np.linspace(0, 2 * math.pi, 17):
        x = [math.cos(theta), math.sin(theta)]
        assert cert.v.eval(x) >= -1e-6


def test_slack_mode_keeps_u_near_zero_when_nothing_exits():
    cert = solve_tightening(CONTRACTION, DISK, 1, T=1.0, mode=MODE_SLACK)
    assert cert.status is SdpStatus.OPTIMAL
    assert 0.0 <= cert.u <= 1e-7
    assert cert.objective == pytest.approx(math.pi / 2, abs=1e-5)


def test_forced_mode_has_no_slack_stat():
    cert = solve_tightening(CONTRACTION, DISK, 1, T=1.0, mode=MODE_FORCED)
    assert cert.u == 0.0
    assert "u_raw" not in cert.solver_stats


# -- hierarchy ladder --------------------------------------------------------

def test_contraction_ladder_values(contraction_run):
    # the degree-limited optima land on pi/2, pi/4, pi/6 for k = 1, 2, 3
    d = [contraction_run.certificate(k).objective for k in (1, 2, 3)]
    assert d[0] == pytest.approx(math.pi / 2, abs=1e-4)
    assert d[1] == pytest.approx(math.pi / 4, abs=1e-4)
    assert d[2] == pytest.approx(math.pi / 6, abs=1e-4)


def test_contraction_ladder_monotone(contraction_run):
    d = [c.objective for c in contraction_run.certificates]
    for a, b in zip(d, d[1:]):
        assert b <= a + 1e-6 * (1 + abs(a))
    assert contraction_run.monotonicity_violations == []
    assert contraction_run.u_trend_violations == []
    assert contraction_run.flags == []


def test_hierarchy_rejects_bad_k_range():
    with pytest.raises(ValueError):
        run_hierarchy(CONTRACTION, DISK, [], T=1.0, mode=MODE_FORCED)
    with pytest.raises(ValueError):
        run_hierarchy(CONTRACTION, DISK, [2, 1], T=1.0, mode=MODE_FORCED)
    with pytest.raises(ValueError):
        run_hierarchy(CONTRACTION, DISK, [1, 1], T=1.0, mode=MODE_FORCED)


def test_failed_orders_are_recorded_not_dropped():
    opts = SolverOptions(max_iter=1)
    run = run_hierarchy(CONTRACTION, DISK, [1, 2], T=1.0, mode=MODE_FORCED, options=opts)
    assert len(run.certificates) == 2
    for cert in run.certificates:
        assert cert.status is SdpStatus.MAX_ITER
        assert not cert.ok
    assert any("max_iter" in f for f in run.flags)


def test_degenerate_high_order_is_flagged():
    # by order 4 the slack formulation on this system collapses v to ~0 and
    # the objective to the full disk area
    cert = solve_tightening(VDP, DISK, 4, T=100 / math.pi, mode=MODE_SLACK)
    assert cert.status is SdpStatus.OPTIMAL
    assert cert.degenerate
    assert cert.v.max_abs_coeff() < DEGENERATE_COEFF_TOL
    assert cert.objective == pytest.approx(math.pi, abs=1e-4)
    with pytest.raises(ValueError):
        inner_set_membership(cert, [0.0, 0.0])


# -- membership queries ------------------------------------------------------

def test_membership_basic():
    cert = hand_certificate(v=X1 ** 2 + X2 ** 2 - 1.0)
    assert inner_set_membership(cert, [0.0, 0.0])
    assert inner_set_membership(cert, [0.9, 0.0])
    assert not inner_set_membership(cert, [1.0, 0.0])   # boundary, not interior
    assert not inner_set_membership(cert, [1.1, 0.0])   # outside X


def test_membership_finite_horizon_uses_u():
    cert = hand_certificate(v=X1 ** 2 + X2 ** 2 - 0.05, u=0.1, mode=MODE_SLACK)
    x = [0.0, 0.0]  # v(x) = -0.05
    assert inner_set_membership(cert, x, t=0.4)        # -0.05 + 0.04 < 0
    assert not inner_set_membership(cert, x, t=1.0)    # -0.05 + 0.10 >= 0


def test_membership_requires_usable_certificate():
    degen = hand_certificate(v=1e-6 * X1, degenerate=True)
    with pytest.raises(ValueError):
        inner_set_membership(degen, [0.0, 0.0])
    failed = hand_certificate(v=None, status=SdpStatus.MAX_ITER)
    with pytest.raises(ValueError):
        inner_set_membership(failed, [0.0, 0.0])
    missing_x = hand_certificate(v=X1 ** 2 + X2 ** 2 - 1.0, X=None)
    with pytest.raises(ValueError):
        inner_set_membership(missing_x, [0.0, 0.0])
    # but passing the set explicitly recovers the query
    assert inner_set_membership(missing_x, [0.0, 0.0], X=DISK)


# -- serialization ------------------------------------------------------------

def test_certificate_round_trip(contraction_run, tmp_path):
    cert = contraction_run.certificate(2)
    again = Certificate.from_dict(cert.to_dict(), n=2, X=DISK)
    assert again.k == cert.k
    assert again.mode == cert.mode
    assert again.T == cert.T
    assert again.u == cert.u
    assert again.objective == cert.objective
    assert again.moment_value == cert.moment_value
    assert again.status is cert.status
    assert (again.v - cert.v).max_abs_coeff() == 0.0
    assert (again.w - cert.w).max_abs_coeff() == 0.0
    assert again.degenerate == cert.degenerate

    path = tmp_path / "cert.json"
    cert.save(path)
    loaded = Certificate.from_dict(json.loads(path.read_text()), n=2, X=DISK)
    assert loaded.objective == cert.objective
    assert inner_set_membership(loaded, [0.0, 0.0])


def test_certificate_round_trip_survives_failed_solve():
    cert = hand_certificate(
        v=None, w=None, status=SdpStatus.PRIMAL_INFEASIBLE,
        objective=math.nan, moment_value=math.nan,
    )
    payload = json.loads(json.dumps(cert.to_dict()))
    again = Certificate.from_dict(payload, n=2)
    assert again.v is None and again.w is None
    assert again.status is SdpStatus.PRIMAL_INFEASIBLE


def test_certificate_format_version_checked():
    cert = hand_certificate(v=X1 ** 2 + X2 ** 2 - 1.0)
    data = cert.to_dict()
    data["format_version"] = 99
    with pytest.raises(ValueError):
        Certificate.from_dict(data, n=2)


def test_serialized_stats_have_no_wall_clock():
    cert = hand_certificate(
        v=X1 ** 2 + X2 ** 2 - 1.0,
        solver_stats={"iterations": 7, "solve_time": 1.23, "eq_residual": 1e-10},
    )
    data = cert.to_dict()
    assert "solve_time" not in data["solver_stats"]
    assert data["solver_stats"]["iterations"] == 7


def test_hierarchy_run_to_dict_is_json_ready(contraction_run):
    payload = contraction_run.to_dict()
    text = json.dumps(payload)
    assert json.loads(text)["mode"] == MODE_FORCED
