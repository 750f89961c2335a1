"""Monomial bases and Lebesgue moments over the constraint set.

The solver objectives need l_alpha = integral of x^alpha over X. Balls and
boxes get closed forms; anything else is estimated by Monte Carlo over the
bounding ball with rejection, carrying standard errors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polynomials import Monomial, Polynomial, grlex_key
from .sets import Membership, SemialgebraicSet

# Monte Carlo draws are consumed in fixed chunks, chunk j seeded with
# seed + j, so the estimate is independent of how chunks map to workers.
MC_CHUNK = 100_000


def basis(n: int, d: int) -> list[Monomial]:
    """All monomials of total degree <= d in graded-lex order."""
    if d < 0:
        raise ValueError(f"max degree must be >= 0, got {d}")
    monos = [
        m
        for m in itertools.product(range(d + 1), repeat=n)
        if sum(m) <= d
    ]
    monos.sort(key=grlex_key)
    return monos


def basis_size(n: int, d: int) -> int:
    return math.comb(n + d, d)


def ball_moment(n: int, R: float, alpha: Sequence[int]) -> float:
    """Integral of x^alpha over the ball |x| <= R in R^n.

    Zero when any exponent is odd; otherwise
    R^(n+|a|) * 2 * prod_j Gamma((a_j+1)/2) / ((n+|a|) * Gamma(sum_j (a_j+1)/2)).
    """
    if R <= 0:
        raise ValueError(f"ball radius must be positive, got {R}")
    if len(alpha) != n:
        raise ValueError(f"exponent vector has length {len(alpha)}, expected {n}")
    if any(a < 0 for a in alpha):
        raise ValueError(f"exponents must be nonnegative, got {tuple(alpha)}")
    if any(a % 2 for a in alpha):
        return 0.0
    total = sum(alpha)
    num = 2.0
    for a in alpha:
        num *= math.gamma((a + 1) / 2.0)
    den = (n + total) * math.gamma(sum((a + 1) / 2.0 for a in alpha))
    return R ** (n + total) * num / den


def box_moment(bounds: Sequence[tuple[float, float]], alpha: Sequence[int]) -> float:
    """Integral of x^alpha over the axis-aligned box prod [lo_j, hi_j]."""
    if len(alpha) != len(bounds):
        raise ValueError("bounds and exponent vector lengths disagree")
    out = 1.0
    for (lo, hi), a in zip(bounds, alpha):
        if not lo < hi:
            raise ValueError(f"degenerate interval [{lo}, {hi}]")
        out *= (hi ** (a + 1) - lo ** (a + 1)) / (a + 1)
    return out


@dataclass(frozen=True)
class MomentVector:
    """Lebesgue moments over X for the graded-lex basis up to a degree."""

    n: int
    degree: int
    basis: tuple[Monomial, ...]
    values: np.ndarray
    method: str  # "ball", "box" or "monte-carlo"
    stderrs: np.ndarray | None = None
    mc_samples: int = 0
    seed: int | None = None

    def __post_init__(self):
        if len(self.basis) != len(self.values):
            raise ValueError("basis and values lengths disagree")
        if self.values[0] <= 0:
            raise ValueError("volume moment lambda(X) must be positive")

    @property
    def volume(self) -> float:
        """lambda(X), the moment of the constant monomial."""
        return float(self.values[0])

    def value(self, alpha: Monomial) -> float:
        return float(self.values[self.basis.index(alpha)])

    def truncated(self, degree: int) -> "MomentVector":
        """Restriction to basis monomials of total degree <= degree."""
        if degree > self.degree:
            raise ValueError(f"cannot extend degree {self.degree} to {degree}")
        keep = basis_size(self.n, degree)
        return MomentVector(
            n=self.n,
            degree=degree,
            basis=self.basis[:keep],
            values=self.values[:keep],
            method=self.method,
            stderrs=None if self.stderrs is None else self.stderrs[:keep],
            mc_samples=self.mc_samples,
            seed=self.seed,
        )


def _box_intervals(X: SemialgebraicSet) -> list[tuple[float, float]] | None:
    """Per-coordinate bounded intervals if every constraint is one; else None.

    Recognized shapes: linear a + b*x_j and even quadratic a + b*x_j^2 with
    b < 0. Anything else means X is not an axis box we can integrate
    exactly.
    """
    lows = [-math.inf] * X.n
    highs = [math.inf] * X.n
    for g in X.constraints:
        seen_var: int | None = None
        const = 0.0
        lin = 0.0
        quad = 0.0
        for mono, coef in g.terms.items():
            nz = [j for j, e in enumerate(mono) if e > 0]
            if not nz:
                const = coef
                continue
            if len(nz) > 1:
                return None
            j = nz[0]
            if seen_var is None:
                seen_var = j
            elif seen_var != j:
                return None
            if mono[j] == 1:
                lin = coef
            elif mono[j] == 2:
                quad = coef
            else:
                return None
        if seen_var is None:
            if const < 0:
                raise ValueError("constraint is a negative constant; X is empty")
            continue
        j = seen_var
        if quad == 0.0:
            # a + b x >= 0
            bound = -const / lin
            if lin > 0:
                lows[j] = max(lows[j], bound)
            else:
                highs[j] = min(highs[j], bound)
        else:
            if quad > 0 or lin != 0.0:
                return None
            # a - |b| x^2 >= 0, a symmetric interval
            if const <= 0:
                raise ValueError("quadratic interval constraint is empty")
            r = math.sqrt(const / -quad)
            lows[j] = max(lows[j], -r)
            highs[j] = min(highs[j], r)
    out = []
    for lo, hi in zip(lows, highs):
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            return None
        out.append((lo, hi))
    return out


def moment_vector(
    X: SemialgebraicSet,
    d: int,
    mc_samples: int = 1_000_000,
    seed: int = 0,
) -> MomentVector:
    """Moments of all basis monomials of degree <= d over X.

    Closed forms when X is exactly a centered ball or an axis box;
    otherwise Monte Carlo over the bounding ball with rejection against
    membership, with standard errors attached.
    """
    monos = tuple(basis(X.n, d))
    if len(X.constraints) == 1 and X.ball_index == 0:
        vals = np.array([ball_moment(X.n, X.ball_radius, a) for a in monos])
        return MomentVector(X.n, d, monos, vals, "ball")
    bounds = _box_intervals(X)
    if bounds is not None:
        vals = np.array([box_moment(bounds, a) for a in monos])
        return MomentVector(X.n, d, monos, vals, "box")
    return _monte_carlo_moments(X, d, monos, mc_samples, seed)


def _monte_carlo_moments(
    X: SemialgebraicSet,
    d: int,
    monos: tuple[Monomial, ...],
    mc_samples: int,
    seed: int,
) -> MomentVector:
    R = X.require_ball()
    ball_vol = ball_moment(X.n, R, (0,) * X.n)
    E = np.array(monos, dtype=np.int64)  # (B, n)
    sums = np.zeros(len(monos))
    sq_sums = np.zeros(len(monos))
    accepted = 0
    drawn = 0
    chunk_index = 0
    while drawn < mc_samples:
        m = min(MC_CHUNK, mc_samples - drawn)
        rng = np.random.default_rng(seed + chunk_index)
        pts = X.sample_in_ball(m, rng)
        inside = X.min_constraint_batch(pts) >= -X.tol_b
        vals = np.zeros((m, len(monos)))
        if inside.any():
            P = pts[inside]
            vals[inside] = np.prod(P[:, None, :] ** E[None, :, :], axis=2)
        sums += vals.sum(axis=0)
        sq_sums += (vals ** 2).sum(axis=0)
        accepted += int(inside.sum())
        drawn += m
        chunk_index += 1
    if accepted == 0:
        raise ValueError(
            f"no draw of {mc_samples} landed in X; empty interior suspected"
        )
    mean = sums / drawn
    var = sq_sums / drawn - mean ** 2
    var = np.maximum(var, 0.0)
    values = ball_vol * mean
    stderrs = ball_vol * np.sqrt(var / drawn)
    return MomentVector(
        X.n, d, monos, values, "monte-carlo",
        stderrs=stderrs, mc_samples=mc_samples, seed=seed,
    )
