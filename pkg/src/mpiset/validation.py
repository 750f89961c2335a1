"""Trajectory simulation and certificate validation.

Fixed-step fourth-order Runge-Kutta with bisection refinement of the
boundary-crossing time. Certificates are validated against the dynamics
they claim to certify: sampled constraint residuals, invariance of the
{v < 0} sublevel set under the flow, Monte Carlo volume, and finite-horizon
containment for positive slack u.

The inward-pointing-field hypothesis at tangency points of the invariant
set with the boundary (needed by the convergence theory, not by the
certificates) has no constructive check and is not verified here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hierarchy import Certificate, OdeSystem
from .moments import ball_moment
from .polynomials import Polynomial, lie_derivative
from .sets import Membership, SemialgebraicSet

RESIDUAL_TOL_SCALE = 1e-6
EXIT_TIME_TOL = 1e-10


def _field_batch(system: OdeSystem, P: np.ndarray) -> np.ndarray:
    return np.stack([fi.eval_batch(P) for fi in system.f], axis=1)


def _rk4_batch(system: OdeSystem, P: np.ndarray, h: float) -> np.ndarray:
    k1 = _field_batch(system, P)
    k2 = _field_batch(system, P + 0.5 * h * k1)
    k3 = _field_batch(system, P + 0.5 * h * k2)
    k4 = _field_batch(system, P + h * k3)
    return P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_point(system: OdeSystem, x: np.ndarray, h: float) -> np.ndarray:
    return _rk4_batch(system, x[None, :], h)[0]


@dataclass
class TrajectoryResult:
    outcome: str  # "exited" or "stayed"
    exit_time: float | None
    exit_point: np.ndarray | None
    samples: list[tuple[float, np.ndarray]]
    max_violation: float

    @property
    def exited(self) -> bool:
        return self.outcome == "exited"


def _refine_exit(
    system: OdeSystem,
    X: SemialgebraicSet,
    x_prev: np.ndarray,
    h: float,
) -> tuple[float, np.ndarray]:
    """Bisect the step [0, h] from x_prev for the boundary-crossing offset."""
    lo, hi = 0.0, h
    x_hi = _rk4_point(system, x_prev, h)
    best = (hi, x_hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        x_mid = _rk4_point(system, x_prev, mid) if mid > 0 else x_prev
        m = float(X.min_constraint_batch(x_mid[None, :])[0])
        if abs(m) <= X.tol_b:
            return mid, x_mid
        if m > X.tol_b:
            lo = mid
        else:
            hi = mid
            best = (mid, x_mid)
        if hi - lo < EXIT_TIME_TOL:
            break
    return best


def integrate(
    system: OdeSystem,
    X: SemialgebraicSet,
    x0: Sequence[float],
    horizon: float,
    step: float = 1e-3,
    sample_times: Sequence[float] | None = None,
) -> TrajectoryResult:
    """Integrate from an interior point until exit or the horizon.

    The boundary crossing is refined by bisection to within 1e-10 in time;
    the returned exit point lies in the boundary band of X.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if X.contains(x0) is not Membership.INTERIOR:
        raise ValueError("initial point is not in the interior of X")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    wanted = sorted(sample_times) if sample_times else []
    w_idx = 0
    samples: list[tuple[float, np.ndarray]] = []
    x = x0.copy()
    t = 0.0
    max_violation = 0.0
    while t < horizon - 1e-15:
        h = min(step, horizon - t)
        while w_idx < len(wanted) and wanted[w_idx] <= t + h + 1e-15:
            ts = wanted[w_idx]
            if ts >= t:
                xs = _rk4_point(system, x, ts - t) if ts > t else x.copy()
                samples.append((ts, xs))
            w_idx += 1
        x_new = _rk4_point(system, x, h)
        if not np.all(np.isfinite(x_new)):
            raise ValueError(f"state became non-finite near t = {t + h:.6g}")
        m = float(X.min_constraint_batch(x_new[None, :])[0])
        if m <= X.tol_b:
            max_violation = max(max_violation, -m)
            dt, x_exit = _refine_exit(system, X, x, h)
            return TrajectoryResult(
                outcome="exited",
                exit_time=t + dt,
                exit_point=x_exit,
                samples=samples,
                max_violation=max(max_violation, 0.0),
            )
        x = x_new
        t += h
    return TrajectoryResult(
        outcome="stayed",
        exit_time=None,
        exit_point=None,
        samples=samples,
        max_violation=max_violation,
    )


def _batch_exit_times(
    system: OdeSystem,
    X: SemialgebraicSet,
    P0: np.ndarray,
    horizon: float,
    step: float,
    refine: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Exit times over a batch of interior starts; nan where censored."""
    m = len(P0)
    exit_times = np.full(m, np.nan)
    idx = np.arange(m)
    P = P0.copy()
    t = 0.0
    while t < horizon - 1e-15 and len(P):
        h = min(step, horizon - t)
        P_new = _rk4_batch(system, P, h)
        if not np.all(np.isfinite(P_new)):
            raise ValueError(f"state became non-finite near t = {t + h:.6g}")
        mg = X.min_constraint_batch(P_new)
        crossed = mg <= X.tol_b
        if crossed.any():
            for j in np.nonzero(crossed)[0]:
                if refine:
                    dt, _ = _refine_exit(system, X, P[j], h)
                else:
                    dt = h
                exit_times[idx[j]] = t + dt
            keep = ~crossed
            P_new = P_new[keep]
            idx = idx[keep]
        P = P_new
        t += h
    exited = np.isfinite(exit_times)
    return exit_times, exited


def estimate_avg_exit_time(
    system: OdeSystem,
    X: SemialgebraicSet,
    samples: int,
    horizon: float = 50.0,
    seed: int = 0,
    step: float = 1e-3,
) -> dict:
    """Monte Carlo estimate of the average exit time over X.

    Uniform draws over X; trajectories that never leave contribute zero to
    the numerator but count in the normalization, matching the
    volume-normalized integral of the exit time over the escaping region.
    Draws still inside at the horizon are censored and reported.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    P0 = X.sample_interior(samples, seed)
    exit_times, exited = _batch_exit_times(system, X, P0, horizon, step)
    contrib = np.where(exited, exit_times, 0.0)
    tau_bar = float(contrib.mean())
    stderr = float(contrib.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return {
        "tau_bar": tau_bar,
        "stderr": stderr,
        "censored_fraction": float(1.0 - exited.mean()),
        "samples": samples,
        "horizon": horizon,
        "seed": seed,
    }


def estimate_volume(
    v: Polynomial,
    X: SemialgebraicSet,
    samples: int,
    seed: int,
    level: float = 0.0,
) -> tuple[float, float]:
    """Monte Carlo volume of {x interior to X : v(x) < level} with stderr."""
    R = X.require_ball()
    rng = np.random.default_rng(seed)
    pts = X.sample_in_ball(samples, rng)
    inside = X.interior_mask(pts) & (v.eval_batch(pts) < level)
    ball_vol = ball_moment(X.n, R, (0,) * X.n)
    frac = inside.mean()
    vol = ball_vol * float(frac)
    stderr = ball_vol * float(np.sqrt(max(frac * (1 - frac), 0.0) / samples))
    return vol, stderr


@dataclass
class ValidationConfig:
    residual_interior: int = 10_000
    residual_boundary: int = 1_000
    invariance_points: int = 2_000
    volume_samples: int = 100_000
    horizons: tuple[float, ...] = ()
    t_sim: float | None = None  # default max(20, 5*T)
    step: float = 1e-3
    v_check_interval: float = 0.1
    v_slack: float = 1e-4
    seed: int = 0
    estimate_tau: bool = False
    tau_samples: int = 2_000
    tau_horizon: float = 50.0

    def to_dict(self) -> dict:
        return {
            "residual_interior": self.residual_interior,
            "residual_boundary": self.residual_boundary,
            "invariance_points": self.invariance_points,
            "volume_samples": self.volume_samples,
            "horizons": list(self.horizons),
            "t_sim": self.t_sim,
            "step": self.step,
            "v_check_interval": self.v_check_interval,
            "v_slack": self.v_slack,
            "seed": self.seed,
            "estimate_tau": self.estimate_tau,
            "tau_samples": self.tau_samples,
            "tau_horizon": self.tau_horizon,
        }


@dataclass
class ValidationReport:
    residuals: dict[str, dict]
    invariance: dict
    volume: dict
    horizon_checks: list[dict]
    tau_bar: dict | None
    config: dict
    margin: float

    @property
    def residuals_passed(self) -> bool:
        return all(entry["passed"] for entry in self.residuals.values())

    @property
    def invariance_failures(self) -> int:
        return self.invariance["failures"]

    @property
    def passed(self) -> bool:
        horizon_ok = all(h["failures"] == 0 for h in self.horizon_checks)
        return self.residuals_passed and self.invariance_failures == 0 and horizon_ok

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "margin": self.margin,
            "residuals": self.residuals,
            "invariance": self.invariance,
            "volume": self.volume,
            "horizon_checks": self.horizon_checks,
            "tau_bar": self.tau_bar,
            "config": self.config,
        }


def _residual_entry(values: np.ndarray, scale_poly: Polynomial) -> dict:
    s = 1.0 + scale_poly.max_abs_coeff()
    threshold = -RESIDUAL_TOL_SCALE * s
    mn = float(values.min())
    return {
        "min": mn,
        "threshold": threshold,
        "passed": bool(mn >= threshold),
        "samples": int(len(values)),
    }


def _simulate_members(
    system: OdeSystem,
    X: SemialgebraicSet,
    P0: np.ndarray,
    horizon: float,
    step: float,
    v: Polynomial,
    u: float,
    v_slack: float,
    v_interval: float,
) -> tuple[int, list[dict]]:
    """Flow the member points; any exit or v-growth beyond slack is a failure."""
    failures: list[dict] = []
    v0 = v.eval_batch(P0)
    idx = np.arange(len(P0))
    P = P0.copy()
    t = 0.0
    next_check = v_interval
    while t < horizon - 1e-15 and len(P):
        h = min(step, horizon - t)
        P = _rk4_batch(system, P, h)
        if not np.all(np.isfinite(P)):
            raise ValueError(f"state became non-finite near t = {t + h:.6g}")
        t += h
        mg = X.min_constraint_batch(P)
        crossed = mg <= X.tol_b
        if crossed.any():
            for j in np.nonzero(crossed)[0]:
                failures.append(
                    {
                        "kind": "left_interior",
                        "point_index": int(idx[j]),
                        "x0": P0[idx[j]].tolist(),
                        "t": t,
                        "min_g": float(mg[j]),
                    }
                )
            keep = ~crossed
            P = P[keep]
            idx = idx[keep]
        if len(P) and (t >= next_check - 1e-12 or t >= horizon - 1e-15):
            vt = v.eval_batch(P)
            bound = v0[idx] + u * t + v_slack
            bad = vt > bound
            if bad.any():
                for j in np.nonzero(bad)[0]:
                    failures.append(
                        {
                            "kind": "v_increased",
                            "point_index": int(idx[j]),
                            "x0": P0[idx[j]].tolist(),
                            "t": t,
                            "v_excess": float(vt[j] - bound[j]),
                        }
                    )
                keep = ~bad
                P = P[keep]
                idx = idx[keep]
            while next_check <= t + 1e-12:
                next_check += v_interval
    return len(P0), failures


def sample_sublevel_points(
    v: Polynomial,
    X: SemialgebraicSet,
    count: int,
    seed: int,
    threshold: float,
    max_batches: int = 400,
) -> np.ndarray:
    """Interior points with v < threshold; may return fewer if the set is thin."""
    rng = np.random.default_rng(seed)
    batch = max(4 * count, 4096)
    found: list[np.ndarray] = []
    total = 0
    for _ in range(max_batches):
        pts = X.sample_in_ball(batch, rng)
        mask = X.interior_mask(pts) & (v.eval_batch(pts) < threshold)
        pts = pts[mask]
        if len(pts):
            found.append(pts)
            total += len(pts)
        if total >= count:
            return np.concatenate(found)[:count]
    return np.concatenate(found) if found else np.empty((0, X.n))


def validate_certificate(
    cert: Certificate,
    system: OdeSystem,
    X: SemialgebraicSet | None = None,
    config: ValidationConfig | None = None,
) -> ValidationReport:
    """Check a certificate against sampled points and simulated trajectories.

    Records failures instead of raising. Phases: (a) constraint residuals
    on interior and boundary samples, (b) invariance of sampled sublevel
    members under the flow, (c) Monte Carlo sublevel volume, (d) optional
    finite-horizon containment checks for positive slack.
    """
    X = X if X is not None else cert.X
    if X is None:
        raise ValueError("certificate carries no constraint set; pass X explicitly")
    if cert.v is None or cert.w is None:
        raise ValueError("certificate has no polynomials (failed solve)")
    if cert.degenerate:
        raise ValueError("degenerate certificate; validation is meaningless")
    config = config or ValidationConfig()
    v, w, u = cert.v, cert.w, cert.u

    # (a) sampled residuals of the certificate constraints
    interior = X.sample_interior(config.residual_interior, config.seed)
    boundary = np.array(X.sample_boundary(config.residual_boundary, config.seed + 1))
    lie_v = lie_derivative(v, list(system.f))
    slack_poly = Polynomial.constant(X.n, u) - lie_v
    wv1_poly = w - v - 1.0
    residuals = {
        "lie_slack": _residual_entry(
            u - lie_v.eval_batch(interior), slack_poly
        ),
        "w_minus_v_minus_1": _residual_entry(
            wv1_poly.eval_batch(interior), wv1_poly
        ),
        "w_nonneg": _residual_entry(w.eval_batch(interior), w),
        "v_boundary": _residual_entry(v.eval_batch(boundary), v),
    }

    # (b) invariance of the sublevel set under the flow
    margin = 1e-3 * (1.0 + v.max_abs_coeff())
    t_sim = config.t_sim if config.t_sim is not None else max(20.0, 5.0 * cert.T)
    members = sample_sublevel_points(
        v, X, config.invariance_points, config.seed + 2, -margin
    )
    if len(members):
        checked, failures = _simulate_members(
            system, X, members, t_sim, config.step,
            v, u, config.v_slack, config.v_check_interval,
        )
        invariance = {
            "checked": checked,
            "failures": len(failures),
            "failure_examples": failures[:5],
            "t_sim": t_sim,
            "vacuous": False,
        }
    else:
        invariance = {
            "checked": 0,
            "failures": 0,
            "failure_examples": [],
            "t_sim": t_sim,
            "vacuous": True,
        }

    # (c) volume of the claimed inner set
    vol, vol_err = estimate_volume(v, X, config.volume_samples, config.seed + 3)
    volume = {
        "value": vol,
        "stderr": vol_err,
        "samples": config.volume_samples,
    }

    # (d) finite-horizon containment for positive slack
    horizon_checks: list[dict] = []
    if cert.mode == "slack" and u > 0.0:
        for t_h in config.horizons:
            pts = sample_sublevel_points(
                v, X, config.invariance_points, config.seed + 4,
                -(margin + u * t_h),
            )
            if not len(pts):
                horizon_checks.append(
                    {"t": t_h, "checked": 0, "failures": 0, "vacuous": True}
                )
                continue
            _, exited = _batch_exit_times(
                system, X, pts, t_h, config.step, refine=False
            )
            horizon_checks.append(
                {
                    "t": t_h,
                    "checked": int(len(pts)),
                    "failures": int(exited.sum()),
                    "vacuous": False,
                }
            )

    tau = None
    if config.estimate_tau:
        tau = estimate_avg_exit_time(
            system, X, config.tau_samples,
            horizon=config.tau_horizon, seed=config.seed + 5, step=config.step,
        )

    return ValidationReport(
        residuals=residuals,
        invariance=invariance,
        volume=volume,
        horizon_checks=horizon_checks,
        tau_bar=tau,
        config=config.to_dict(),
        margin=margin,
    )
