"""Hierarchy of SOS tightenings whose solutions certify inner
approximations of the maximal positively invariant set.

At relaxation order k the program searches polynomials v, w of degree
<= 2k and a scalar slack u >= 0 (or u fixed to 0 in forced mode) with
Putinar-form identities over X = {g_i >= 0}:

    (i)   u - grad(v).f = q0 + sum_i q_i g_i
    (ii)  w - v - 1     = p0 + sum_i p_i g_i
    (iii) w             = s0 + sum_i s_i g_i
    (iv)  v             = t0 + sum_i t_i_plus g_i - sum_i t_i_minus g_i

minimizing integral of w over X plus u*T*vol(X) (slack mode) or just the
integral of w (forced mode). The sublevel set {x interior : v(x) < 0} is
then invariant up to the slack: along trajectories v grows at most at rate
u. Identity (iv) pins v to the degree-2k span with sign-split multipliers,
which keeps the dual (moment-side) problem bounded.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .moments import MomentVector, moment_vector
from .polynomials import Monomial, Polynomial, lie_derivative
from .sets import Membership, SemialgebraicSet
from .solver import SdpSolution, SdpStatus, SolverOptions, solve
from .sos import PolyExpr, SosProgram

log = logging.getLogger(__name__)

CERTIFICATE_FORMAT_VERSION = 1

# below this, slack-mode u is treated as numerically zero and the
# infinite-horizon inner-approximation claim applies
U_NEAR_ZERO = 1e-5

# a v with no coefficient above this is solver roundoff, not a certificate
DEGENERATE_COEFF_TOL = 1e-4

# monomial-basis conditioning warning threshold
CONDITIONING_WARN = 1e4

MODE_SLACK = "slack"
MODE_FORCED = "forced"


@dataclass(frozen=True)
class OdeSystem:
    """Polynomial vector field x' = f(x)."""

    f: tuple[Polynomial, ...]

    def __post_init__(self):
        if not self.f:
            raise ValueError("vector field needs at least one component")
        n = self.f[0].n
        if len(self.f) != n:
            raise ValueError(f"field has {len(self.f)} components for dimension {n}")
        for fi in self.f:
            if fi.n != n:
                raise ValueError("field component dimensions disagree")

    @property
    def n(self) -> int:
        return self.f[0].n

    @property
    def degree(self) -> int:
        return max(fi.degree() for fi in self.f)


def build_tightening(
    system: OdeSystem,
    X: SemialgebraicSet,
    k: int,
    T: float,
    mode: str,
    moments: MomentVector | None = None,
    mc_samples: int = 1_000_000,
    moment_seed: int = 0,
) -> SosProgram:
    """Assemble the order-k SOS program; see module docstring for the identities.

    Degree caps: v, w get 2k; the multiplier of g_i gets 2(k - k_i); each
    free SOS term gets the smallest even cap covering its identity's other
    side (2k + delta0 - 1 rounded up for q0, 2k for the rest).
    """
    if mode not in (MODE_SLACK, MODE_FORCED):
        raise ValueError(f"mode must be {MODE_SLACK!r} or {MODE_FORCED!r}, got {mode!r}")
    if system.n != X.n:
        raise ValueError("system and constraint set dimensions disagree")
    if k < X.k_min:
        raise ValueError(f"order k={k} below the set's k_min={X.k_min}")
    X.require_ball()
    if mode == MODE_SLACK and not T > 0:
        raise ValueError(f"time bound T must be positive, got {T}")

    n = system.n
    delta0 = system.degree
    prog = SosProgram(n)
    v = prog.declare_poly("v", 2 * k)
    w = prog.declare_poly("w", 2 * k)
    u = prog.declare_nonneg("u") if mode == MODE_SLACK else PolyExpr.from_const(n, 0.0)

    def even_up(d: int) -> int:
        return 2 * math.ceil(d / 2)

    def sos_family(prefix: str, free_cap: int) -> PolyExpr:
        """q0 + sum_i q_i g_i with the per-constraint degree caps."""
        acc = prog.declare_sos(f"{prefix}0", free_cap)
        for i, g in enumerate(X.constraints):
            cap = 2 * (k - X.half_degrees[i])
            acc = acc + prog.declare_sos(f"{prefix}{i + 1}", cap).times_poly(g)
        return acc

    lie_v = v.lie(list(system.f))
    prog.add_identity(u - lie_v, sos_family("q", even_up(2 * k + delta0 - 1)))
    prog.add_identity(w - v - 1.0, sos_family("p", 2 * k))
    prog.add_identity(w, sos_family("s", 2 * k))

    t_acc = prog.declare_sos("t0", 2 * k)
    for i, g in enumerate(X.constraints):
        cap = 2 * (k - X.half_degrees[i])
        plus = prog.declare_sos(f"t{i + 1}_plus", cap)
        minus = prog.declare_sos(f"t{i + 1}_minus", cap)
        t_acc = t_acc + (plus - minus).times_poly(g)
    prog.add_identity(v, t_acc)

    if moments is None:
        moments = moment_vector(X, 2 * k, mc_samples=mc_samples, seed=moment_seed)
    elif moments.degree < 2 * k:
        raise ValueError(f"moment vector degree {moments.degree} < 2k = {2 * k}")
    objective = prog.poly_objective("w", moments)
    if mode == MODE_SLACK:
        objective[prog.scalar_vars["u"]] = T * moments.volume
    prog.set_objective(objective)
    return prog


@dataclass
class Certificate:
    """Solved order-k tightening: the data backing an inner-set claim."""

    k: int
    mode: str
    T: float
    u: float
    v: Polynomial | None
    w: Polynomial | None
    objective: float
    moment_value: float
    status: SdpStatus
    solver_stats: dict
    degenerate: bool = False
    conditioning_warning: bool = False
    format_version: int = CERTIFICATE_FORMAT_VERSION
    X: SemialgebraicSet | None = None  # runtime-only, not serialized

    @property
    def ok(self) -> bool:
        return self.status is SdpStatus.OPTIMAL

    def to_dict(self) -> dict:
        def poly_payload(p: Polynomial | None):
            if p is None:
                return None
            items = p.items()
            return {
                "basis": [list(m) for m, _ in items],
                "coeffs": [c for _, c in items],
            }

        return {
            "format_version": self.format_version,
            "k": self.k,
            "mode": self.mode,
            "T": self.T,
            "u": self.u,
            "v": poly_payload(self.v),
            "w": poly_payload(self.w),
            "objective": self.objective,
            "moment_value": self.moment_value,
            "status": self.status.value,
            "degenerate": self.degenerate,
            "conditioning_warning": self.conditioning_warning,
            # solve_time is wall clock; dropping it keeps reruns byte-identical
            "solver_stats": {
                k2: v2 for k2, v2 in self.solver_stats.items() if k2 != "solve_time"
            },
        }

    @staticmethod
    def from_dict(data: dict, n: int, X: SemialgebraicSet | None = None) -> "Certificate":
        if data.get("format_version") != CERTIFICATE_FORMAT_VERSION:
            raise ValueError(
                f"unsupported certificate format {data.get('format_version')!r}"
            )

        def poly_load(payload):
            if payload is None:
                return None
            return Polynomial(
                n,
                {
                    tuple(m): c
                    for m, c in zip(payload["basis"], payload["coeffs"])
                },
            )

        return Certificate(
            k=data["k"],
            mode=data["mode"],
            T=data["T"],
            u=data["u"],
            v=poly_load(data["v"]),
            w=poly_load(data["w"]),
            objective=data["objective"],
            moment_value=data["moment_value"],
            status=SdpStatus(data["status"]),
            solver_stats=data["solver_stats"],
            degenerate=data["degenerate"],
            conditioning_warning=data["conditioning_warning"],
            X=X,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _extract_certificate(
    prog: SosProgram,
    solution: SdpSolution,
    k: int,
    mode: str,
    T: float,
    X: SemialgebraicSet,
    options: SolverOptions,
) -> Certificate:
    stats = {
        "status": solution.status.value,
        "backend": solution.backend,
        "iterations": solution.iterations,
        "solve_time": solution.solve_time,
        "messages": solution.messages,
        **{k2: float(v2) for k2, v2 in solution.achieved.items()},
    }
    if solution.x is None:
        return Certificate(
            k=k, mode=mode, T=T, u=0.0, v=None, w=None,
            objective=math.nan, moment_value=math.nan,
            status=solution.status, solver_stats=stats, X=X,
        )
    v = prog.poly_value("v", solution.x)
    w = prog.poly_value("w", solution.x)
    status = solution.status
    u = 0.0
    if mode == MODE_SLACK:
        u_raw = prog.scalar_value("u", solution.x)
        stats["u_raw"] = u_raw
        if u_raw < -10.0 * options.feas_tol:
            status = SdpStatus.NUMERICAL_TROUBLE
            stats["messages"] = stats["messages"] + [
                f"slack u = {u_raw:.3e} is negative beyond tolerance"
            ]
        u = max(u_raw, 0.0)
    degenerate = v.max_abs_coeff() < DEGENERATE_COEFF_TOL
    conditioning = max(v.max_abs_coeff(), w.max_abs_coeff()) > CONDITIONING_WARN
    if conditioning:
        log.warning(
            "order %d certificate has coefficients above %g; "
            "monomial-basis conditioning is degrading", k, CONDITIONING_WARN,
        )
    if degenerate and status is SdpStatus.OPTIMAL:
        log.warning(
            "order %d certificate is degenerate (max |v coeff| < %g); "
            "its sublevel set carries no inner-approximation claim",
            k, DEGENERATE_COEFF_TOL,
        )
    return Certificate(
        k=k, mode=mode, T=T, u=u, v=v, w=w,
        objective=solution.primal_objective,
        moment_value=solution.dual_objective,
        status=status, solver_stats=stats,
        degenerate=degenerate, conditioning_warning=conditioning, X=X,
    )


def solve_tightening(
    system: OdeSystem,
    X: SemialgebraicSet,
    k: int,
    T: float,
    mode: str,
    options: SolverOptions | None = None,
    moments: MomentVector | None = None,
    mc_samples: int = 1_000_000,
    moment_seed: int = 0,
) -> Certificate:
    """Build, solve and post-check a single order; never raises on solver failure."""
    options = options or SolverOptions()
    prog = build_tightening(
        system, X, k, T, mode,
        moments=moments, mc_samples=mc_samples, moment_seed=moment_seed,
    )
    solution = solve(prog.compile(), options)
    return _extract_certificate(prog, solution, k, mode, T, X, options)


@dataclass
class HierarchyRun:
    """Certificates over ascending orders plus convergence diagnostics."""

    mode: str
    T: float
    certificates: list[Certificate]
    monotonicity_violations: list[int] = field(default_factory=list)
    u_trend_violations: list[int] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def orders(self) -> list[int]:
        return [c.k for c in self.certificates]

    def certificate(self, k: int) -> Certificate:
        for c in self.certificates:
            if c.k == k:
                return c
        raise KeyError(f"no certificate for order {k}")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "T": self.T,
            "orders": self.orders,
            "objectives": [c.objective for c in self.certificates],
            "moment_values": [c.moment_value for c in self.certificates],
            "u_values": [c.u for c in self.certificates],
            "duality_gaps": [
                c.solver_stats.get("duality_gap") for c in self.certificates
            ],
            "statuses": [c.status.value for c in self.certificates],
            "degenerate": [c.degenerate for c in self.certificates],
            "monotonicity_violations": self.monotonicity_violations,
            "u_trend_violations": self.u_trend_violations,
            "flags": self.flags,
        }


def run_hierarchy(
    system: OdeSystem,
    X: SemialgebraicSet,
    k_range: Sequence[int],
    T: float,
    mode: str,
    options: SolverOptions | None = None,
    mc_samples: int = 1_000_000,
    moment_seed: int = 0,
) -> HierarchyRun:
    """Solve ascending orders; failed solves are recorded, never dropped."""
    ks = list(k_range)
    if not ks:
        raise ValueError("k_range must be nonempty")
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError(f"k_range must be strictly ascending, got {ks}")
    options = options or SolverOptions()
    moments = moment_vector(X, 2 * max(ks), mc_samples=mc_samples, seed=moment_seed)
    certs = [
        solve_tightening(
            system, X, k, T, mode,
            options=options, moments=moments.truncated(2 * k),
        )
        for k in ks
    ]
    run = HierarchyRun(mode=mode, T=T, certificates=certs)
    for a, b in zip(certs, certs[1:]):
        if not (a.ok and b.ok):
            continue
        if b.objective > a.objective + 1e-6 * (1.0 + abs(a.objective)):
            run.monotonicity_violations.append(b.k)
            run.flags.append(
                f"objective rose from {a.objective:.6g} (k={a.k}) "
                f"to {b.objective:.6g} (k={b.k})"
            )
        if mode == MODE_SLACK:
            grew = b.u > a.u + 1e-9 * (1.0 + a.u)
            if grew and b.u > U_NEAR_ZERO:
                run.u_trend_violations.append(b.k)
                run.flags.append(f"u rose from {a.u:.3e} (k={a.k}) to {b.u:.3e} (k={b.k})")
    for c in certs:
        if not c.ok:
            run.flags.append(f"order {c.k} solve ended with status {c.status.value}")
    return run


def inner_set_membership(
    cert: Certificate,
    x: Sequence[float],
    t: float | None = None,
    X: SemialgebraicSet | None = None,
) -> bool:
    """Is x in the certified inner set {interior, v < 0} (or v + u*t < 0)?

    Without t this is the infinite-horizon claim, valid when u is zero or
    numerically near zero; with t it is the finite-horizon containment
    claim at horizon t.
    """
    X = X if X is not None else cert.X
    if X is None:
        raise ValueError("certificate carries no constraint set; pass X explicitly")
    if cert.v is None:
        raise ValueError("certificate has no v polynomial (failed solve)")
    if cert.degenerate:
        raise ValueError(
            "degenerate certificate (near-zero v) carries no inner-set claim"
        )
    if X.contains(x) is not Membership.INTERIOR:
        return False
    vx = cert.v.eval(x)
    if t is None:
        return vx < 0.0
    return vx + cert.u * t < 0.0
