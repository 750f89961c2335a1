"""Basic semialgebraic sets X = {x : g_i(x) >= 0} with degree bookkeeping.

The boundary is treated operationally as the band where some g_i vanishes
within tol_b; descriptions whose topological interior differs from
{x : g_i(x) > 0 for all i} are not detected. Compactness is not verified
beyond requiring the bounding-ball constraint where samplers need one.
"""

from __future__ import annotations

import enum
import math
from typing import Sequence

import numpy as np

from .polynomials import Monomial, Polynomial

DEFAULT_BOUNDARY_TOL = 1e-9


class Membership(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def _ball_radius_of(g: Polynomial) -> float | None:
    """Radius R if g equals R^2 - sum x_j^2 coefficient-wise, else None."""
    n = g.n
    expected_len = n + 1
    terms = g.terms
    if len(terms) != expected_len:
        return None
    const = terms.get((0,) * n)
    if const is None or const <= 0:
        return None
    for j in range(n):
        mono = tuple(2 if i == j else 0 for i in range(n))
        if terms.get(mono) != -1.0:
            return None
    return math.sqrt(const)


class SemialgebraicSet:
    """Immutable constraint set; constraints indexed g_1..g_nX (0-based here)."""

    def __init__(
        self,
        constraints: Sequence[Polynomial],
        tol_b: float = DEFAULT_BOUNDARY_TOL,
    ):
        if not constraints:
            raise ValueError("need at least one constraint polynomial")
        n = constraints[0].n
        for g in constraints:
            if g.n != n:
                raise ValueError("constraint dimensions disagree")
            if g.is_zero():
                raise ValueError("zero polynomial is not a valid constraint")
        self.n = n
        self.constraints: tuple[Polynomial, ...] = tuple(constraints)
        self.tol_b = float(tol_b)
        self.degrees: tuple[int, ...] = tuple(g.degree() for g in self.constraints)
        self.half_degrees: tuple[int, ...] = tuple(
            math.ceil(d / 2) for d in self.degrees
        )
        self.k_min: int = max(self.half_degrees)
        self.ball_index: int | None = None
        self.ball_radius: float | None = None
        for i, g in enumerate(self.constraints):
            r = _ball_radius_of(g)
            if r is not None:
                self.ball_index = i
                self.ball_radius = r
                break

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemialgebraicSet):
            return NotImplemented
        return self.constraints == other.constraints and self.tol_b == other.tol_b

    def __repr__(self) -> str:
        gs = ", ".join(g.to_text() for g in self.constraints)
        return f"SemialgebraicSet([{gs}])"

    # -- membership --------------------------------------------------------

    def constraint_values(self, x: Sequence[float]) -> np.ndarray:
        if len(x) != self.n:
            raise ValueError(f"point has {len(x)} coordinates, expected {self.n}")
        return np.array([g.eval(x) for g in self.constraints])

    def contains(self, x: Sequence[float]) -> Membership:
        vals = self.constraint_values(x)
        if np.all(vals > self.tol_b):
            return Membership.INTERIOR
        if np.all(vals >= -self.tol_b):
            return Membership.BOUNDARY
        return Membership.OUTSIDE

    def min_constraint_batch(self, points: np.ndarray) -> np.ndarray:
        """min_i g_i over an (m, n) array of points; shape (m,)."""
        points = np.asarray(points, dtype=np.float64)
        out = self.constraints[0].eval_batch(points)
        for g in self.constraints[1:]:
            np.minimum(out, g.eval_batch(points), out=out)
        return out

    def interior_mask(self, points: np.ndarray) -> np.ndarray:
        return self.min_constraint_batch(points) > self.tol_b

    # -- ball bookkeeping ----------------------------------------------------

    def ensure_ball_constraint(self, R: float) -> "SemialgebraicSet":
        """Append R^2 - |x|^2 unless some ball constraint is already present."""
        if R <= 0:
            raise ValueError(f"ball radius must be positive, got {R}")
        if self.ball_index is not None:
            return self
        terms: dict[Monomial, float] = {(0,) * self.n: R * R}
        for j in range(self.n):
            terms[tuple(2 if i == j else 0 for i in range(self.n))] = -1.0
        ball = Polynomial(self.n, terms)
        return SemialgebraicSet(self.constraints + (ball,), tol_b=self.tol_b)

    def require_ball(self) -> float:
        if self.ball_radius is None:
            raise ValueError(
                "set has no bounding-ball constraint R^2 - |x|^2; "
                "call ensure_ball_constraint(R) first"
            )
        return self.ball_radius

    # -- sampling --------------------------------------------------------

    def sample_in_ball(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform draws from the bounding ball, shape (count, n)."""
        R = self.require_ball()
        z = rng.standard_normal((count, self.n))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        radii = R * rng.random((count, 1)) ** (1.0 / self.n)
        return z / norms * radii

    def sample_interior(self, count: int, seed: int, max_batches: int = 1000) -> np.ndarray:
        """Uniform-over-X interior points by rejection from the bounding ball."""
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        batch = max(count, 1024)
        found: list[np.ndarray] = []
        total = 0
        for _ in range(max_batches):
            pts = self.sample_in_ball(batch, rng)
            pts = pts[self.interior_mask(pts)]
            if len(pts):
                found.append(pts)
                total += len(pts)
            if total >= count:
                return np.concatenate(found)[:count]
        raise ValueError(
            f"could not find {count} interior points after {max_batches} batches; "
            "the set may have (near-)empty interior"
        )

    def _find_interior_anchor(self, rng: np.random.Generator, tries: int = 2000) -> np.ndarray:
        origin = np.zeros(self.n)
        if self.contains(origin) is Membership.INTERIOR:
            return origin
        scale = self.ball_radius if self.ball_radius is not None else 1.0
        for t in range(tries):
            x = rng.standard_normal(self.n) * scale * (0.3 + 0.7 * rng.random())
            if self.contains(x) is Membership.INTERIOR:
                return x
        raise ValueError(f"no interior anchor found after {tries} random tries")

    def sample_boundary(self, count: int, seed: int) -> list[np.ndarray]:
        """Boundary points by bisection along random rays from an interior anchor.

        Deterministic for a given seed; every returned point satisfies the
        Boundary membership predicate.
        """
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        anchor = self._find_interior_anchor(rng)
        out: list[np.ndarray] = []
        attempts = 0
        while len(out) < count:
            attempts += 1
            if attempts > 100 * count:
                raise ValueError("boundary sampling failed to converge")
            d = rng.standard_normal(self.n)
            norm = np.linalg.norm(d)
            if norm == 0:
                continue
            d /= norm
            # march outward until leaving X; doubling is bounded because the
            # relevant sets carry a bounding ball
            t_hi = self.ball_radius * 1e-3 if self.ball_radius else 1e-3
            for _ in range(64):
                if self.contains(anchor + t_hi * d) is Membership.OUTSIDE:
                    break
                t_hi *= 2.0
            else:
                continue  # ray never left X; pick a fresh direction
            t_lo = 0.0
            point = None
            for _ in range(200):
                t_mid = 0.5 * (t_lo + t_hi)
                x_mid = anchor + t_mid * d
                member = self.contains(x_mid)
                if member is Membership.BOUNDARY:
                    point = x_mid
                    break
                if member is Membership.OUTSIDE:
                    t_hi = t_mid
                else:
                    t_lo = t_mid
            if point is not None:
                out.append(point)
        return out
