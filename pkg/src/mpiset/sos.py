"""Compile polynomial identities with SOS multipliers into a conic SDP.

An SOS variable sigma is modeled by its Gram matrix Q over the monomial
basis b(x) of half its degree cap: sigma = b(x)^T Q b(x). Identities are
enforced by matching coefficients monomial-by-monomial over the union of
supports, one linear equality per monomial. Variable and row ordering is
deterministic (declaration order, graded-lex within), so compiling the
same program twice yields identical problems.

Gram entries are stored for the upper triangle in column-stacked order
((0,0), (0,1), (1,1), (0,2), ...), matching the scaled-triangle convention
of PSD cones in conic solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .moments import MomentVector, basis
from .polynomials import Monomial, Polynomial, grlex_key, monomial_mul

# var kinds
FREE = "free"
NONNEG = "nonneg"
GRAM = "gram"


class PolyExpr:
    """Polynomial in x whose coefficients are affine in decision variables.

    lin maps monomial -> {variable id: multiplier}; const maps monomial ->
    float. Instances are value-like; operations return new objects.
    """

    __slots__ = ("n", "lin", "const")

    def __init__(
        self,
        n: int,
        lin: dict[Monomial, dict[int, float]] | None = None,
        const: dict[Monomial, float] | None = None,
    ):
        self.n = n
        self.lin = lin or {}
        self.const = const or {}

    @staticmethod
    def from_poly(p: Polynomial) -> "PolyExpr":
        return PolyExpr(p.n, {}, dict(p.terms))

    @staticmethod
    def from_const(n: int, c: float) -> "PolyExpr":
        return PolyExpr(n, {}, {(0,) * n: float(c)}) if c else PolyExpr(n)

    def _check(self, other: "PolyExpr") -> None:
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other) -> "PolyExpr":
        if isinstance(other, Polynomial):
            other = PolyExpr.from_poly(other)
        elif isinstance(other, (int, float)):
            other = PolyExpr.from_const(self.n, other)
        if not isinstance(other, PolyExpr):
            return NotImplemented
        self._check(other)
        lin = {m: dict(vs) for m, vs in self.lin.items()}
        for m, vs in other.lin.items():
            tgt = lin.setdefault(m, {})
            for vid, c in vs.items():
                tgt[vid] = tgt.get(vid, 0.0) + c
        const = dict(self.const)
        for m, c in other.const.items():
            const[m] = const.get(m, 0.0) + c
        return PolyExpr(self.n, lin, const)

    __radd__ = __add__

    def __neg__(self) -> "PolyExpr":
        return self.scaled(-1.0)

    def __sub__(self, other) -> "PolyExpr":
        if isinstance(other, Polynomial):
            other = PolyExpr.from_poly(other)
        elif isinstance(other, (int, float)):
            other = PolyExpr.from_const(self.n, other)
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "PolyExpr":
        return (-self) + other

    def scaled(self, a: float) -> "PolyExpr":
        return PolyExpr(
            self.n,
            {m: {vid: c * a for vid, c in vs.items()} for m, vs in self.lin.items()},
            {m: c * a for m, c in self.const.items()},
        )

    def times_poly(self, p: Polynomial) -> "PolyExpr":
        if p.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {p.n}")
        lin: dict[Monomial, dict[int, float]] = {}
        const: dict[Monomial, float] = {}
        for mp, cp in p.terms.items():
            for m, vs in self.lin.items():
                mono = monomial_mul(m, mp)
                tgt = lin.setdefault(mono, {})
                for vid, c in vs.items():
                    tgt[vid] = tgt.get(vid, 0.0) + c * cp
            for m, c in self.const.items():
                mono = monomial_mul(m, mp)
                const[mono] = const.get(mono, 0.0) + c * cp
        return PolyExpr(self.n, lin, const)

    def partial(self, i: int) -> "PolyExpr":
        lin: dict[Monomial, dict[int, float]] = {}
        const: dict[Monomial, float] = {}
        for m, vs in self.lin.items():
            if m[i] == 0:
                continue
            lowered = tuple(e - 1 if j == i else e for j, e in enumerate(m))
            tgt = lin.setdefault(lowered, {})
            for vid, c in vs.items():
                tgt[vid] = tgt.get(vid, 0.0) + c * m[i]
        for m, c in self.const.items():
            if m[i] == 0:
                continue
            lowered = tuple(e - 1 if j == i else e for j, e in enumerate(m))
            const[lowered] = const.get(lowered, 0.0) + c * m[i]
        return PolyExpr(self.n, lin, const)

    def lie(self, f: Sequence[Polynomial]) -> "PolyExpr":
        if len(f) != self.n:
            raise ValueError(f"field has {len(f)} components, expected {self.n}")
        out = PolyExpr(self.n)
        for i, fi in enumerate(f):
            out = out + self.partial(i).times_poly(fi)
        return out

    def value(self, x: np.ndarray) -> Polynomial:
        """Substitute a solution vector for the decision variables."""
        terms: dict[Monomial, float] = {}
        for m, vs in self.lin.items():
            terms[m] = terms.get(m, 0.0) + sum(c * x[vid] for vid, c in vs.items())
        for m, c in self.const.items():
            terms[m] = terms.get(m, 0.0) + c
        return Polynomial(self.n, terms)


@dataclass(frozen=True)
class SdpProblem:
    """Standard-form conic problem: minimize q'x over equality rows plus
    nonnegativity and PSD-Gram structure on designated variables."""

    n_vars: int
    var_kinds: tuple[tuple, ...]
    nonneg_ids: tuple[int, ...]
    psd_blocks: tuple[tuple[str, int, tuple[int, ...]], ...]  # (name, dim, svec ids)
    eq_rows: tuple[tuple[tuple[int, float], ...], ...]
    eq_rhs: tuple[float, ...]
    objective: tuple[tuple[int, float], ...]
    objective_const: float = 0.0

    @property
    def n_eq(self) -> int:
        return len(self.eq_rows)

    def to_text(self) -> str:
        """Sparse text interchange form; one line per nonzero."""
        lines = ["sdp-text 1", f"nvars {self.n_vars}", f"nrows {self.n_eq}"]
        if self.nonneg_ids:
            lines.append("nonneg " + " ".join(str(i) for i in self.nonneg_ids))
        for name, dim, ids in self.psd_blocks:
            lines.append(f"block {name} {dim} " + " ".join(str(i) for i in ids))
        lines.append(f"objconst {self.objective_const!r}")
        for vid, c in self.objective:
            lines.append(f"o {vid} {c!r}")
        for r, row in enumerate(self.eq_rows):
            for vid, c in row:
                lines.append(f"e {r} {vid} {c!r}")
        for r, rhs in enumerate(self.eq_rhs):
            if rhs != 0.0:
                lines.append(f"b {r} {rhs!r}")
        lines.append("end")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "SdpProblem":
        n_vars = 0
        n_rows = 0
        nonneg: tuple[int, ...] = ()
        blocks: list[tuple[str, int, tuple[int, ...]]] = []
        obj: dict[int, float] = {}
        obj_const = 0.0
        rows_nz: dict[int, list[tuple[int, float]]] = {}
        rhs: dict[int, float] = {}
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].split() != ["sdp-text", "1"]:
            raise ValueError("not an sdp-text v1 payload")
        for ln in lines[1:]:
            parts = ln.split()
            tag = parts[0]
            if tag == "nvars":
                n_vars = int(parts[1])
            elif tag == "nrows":
                n_rows = int(parts[1])
            elif tag == "nonneg":
                nonneg = tuple(int(p) for p in parts[1:])
            elif tag == "block":
                blocks.append((parts[1], int(parts[2]), tuple(int(p) for p in parts[3:])))
            elif tag == "objconst":
                obj_const = float(parts[1])
            elif tag == "o":
                obj[int(parts[1])] = float(parts[2])
            elif tag == "e":
                rows_nz.setdefault(int(parts[1]), []).append((int(parts[2]), float(parts[3])))
            elif tag == "b":
                rhs[int(parts[1])] = float(parts[2])
            elif tag == "end":
                break
            else:
                raise ValueError(f"unknown sdp-text line {ln!r}")
        kinds: list[tuple] = [(FREE,)] * n_vars
        for vid in nonneg:
            kinds[vid] = (NONNEG,)
        for bi, (name, dim, ids) in enumerate(blocks):
            pos = 0
            for c in range(dim):
                for r in range(c + 1):
                    kinds[ids[pos]] = (GRAM, bi, r, c)
                    pos += 1
        return SdpProblem(
            n_vars=n_vars,
            var_kinds=tuple(kinds),
            nonneg_ids=nonneg,
            psd_blocks=tuple(blocks),
            eq_rows=tuple(
                tuple(sorted(rows_nz.get(r, []))) for r in range(n_rows)
            ),
            eq_rhs=tuple(rhs.get(r, 0.0) for r in range(n_rows)),
            objective=tuple(sorted(obj.items())),
            objective_const=obj_const,
        )


class SosProgram:
    """Builder for SOS-constrained polynomial identity programs."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        self.n = n
        self.var_kinds: list[tuple] = []
        self.names: dict[str, str] = {}  # name -> kind of declaration
        self.poly_vars: dict[str, tuple[tuple[int, ...], tuple[Monomial, ...]]] = {}
        self.scalar_vars: dict[str, int] = {}
        self.sos_vars: dict[str, int] = {}  # name -> block index
        self.blocks: list[tuple[str, int, tuple[int, ...]]] = []
        self.identities: list[PolyExpr] = []
        self.objective: dict[int, float] = {}
        self.objective_const = 0.0

    # -- declarations -----------------------------------------------------

    def _claim_name(self, name: str, kind: str) -> None:
        if name in self.names:
            raise ValueError(f"name {name!r} already declared")
        self.names[name] = kind

    def _new_var(self, kind: tuple) -> int:
        self.var_kinds.append(kind)
        return len(self.var_kinds) - 1

    def declare_poly(self, name: str, degree_cap: int) -> PolyExpr:
        """Polynomial variable with free coefficients over basis(n, cap)."""
        if degree_cap < 0:
            raise ValueError(f"degree cap must be >= 0, got {degree_cap}")
        self._claim_name(name, "poly")
        monos = tuple(basis(self.n, degree_cap))
        ids = tuple(self._new_var((FREE,)) for _ in monos)
        self.poly_vars[name] = (ids, monos)
        return PolyExpr(self.n, {m: {vid: 1.0} for vid, m in zip(ids, monos)})

    def declare_nonneg(self, name: str) -> PolyExpr:
        """Nonnegative scalar, exposed as a constant-monomial expression."""
        self._claim_name(name, "nonneg")
        vid = self._new_var((NONNEG,))
        self.scalar_vars[name] = vid
        return PolyExpr(self.n, {(0,) * self.n: {vid: 1.0}})

    def declare_sos(self, name: str, degree_cap: int) -> PolyExpr:
        """SOS variable with Gram block over basis(n, cap/2); cap must be even."""
        if degree_cap < 0 or degree_cap % 2:
            raise ValueError(f"SOS degree cap must be even and >= 0, got {degree_cap}")
        self._claim_name(name, "sos")
        half = basis(self.n, degree_cap // 2)
        dim = len(half)
        block_index = len(self.blocks)
        ids: list[int] = []
        lin: dict[Monomial, dict[int, float]] = {}
        for c in range(dim):
            for r in range(c + 1):
                vid = self._new_var((GRAM, block_index, r, c))
                ids.append(vid)
                mono = monomial_mul(half[r], half[c])
                mult = 1.0 if r == c else 2.0
                lin.setdefault(mono, {})[vid] = mult
        self.blocks.append((name, dim, tuple(ids)))
        self.sos_vars[name] = block_index
        return PolyExpr(self.n, lin)

    # -- constraints and objective ------------------------------------------

    def add_identity(self, lhs: PolyExpr | Polynomial, rhs: PolyExpr | Polynomial) -> None:
        """Require lhs == rhs coefficient-wise; one equality per monomial."""
        if isinstance(lhs, Polynomial):
            lhs = PolyExpr.from_poly(lhs)
        if isinstance(rhs, Polynomial):
            rhs = PolyExpr.from_poly(rhs)
        diff = lhs - rhs
        for vs in diff.lin.values():
            for vid in vs:
                if not 0 <= vid < len(self.var_kinds):
                    raise ValueError(f"identity references undeclared variable {vid}")
        self.identities.append(diff)

    def set_objective(self, terms: Mapping[int, float], const: float = 0.0) -> None:
        for vid in terms:
            if not 0 <= vid < len(self.var_kinds):
                raise ValueError(f"objective references undeclared variable {vid}")
        self.objective = dict(terms)
        self.objective_const = float(const)

    def poly_objective(self, name: str, moments: MomentVector) -> dict[int, float]:
        """Coefficients of integral-over-X of a polynomial variable: w -> w'l."""
        ids, monos = self.poly_vars[name]
        if moments.basis[: len(monos)] != monos:
            raise ValueError("moment basis does not cover the polynomial variable")
        return {vid: float(moments.values[i]) for i, vid in enumerate(ids)}

    # -- solution readback ----------------------------------------------------

    def poly_value(self, name: str, x: np.ndarray) -> Polynomial:
        ids, monos = self.poly_vars[name]
        return Polynomial(self.n, {m: float(x[vid]) for vid, m in zip(ids, monos)})

    def scalar_value(self, name: str, x: np.ndarray) -> float:
        return float(x[self.scalar_vars[name]])

    def gram_value(self, name: str, x: np.ndarray) -> np.ndarray:
        block_index = self.sos_vars[name]
        _, dim, ids = self.blocks[block_index]
        Q = np.zeros((dim, dim))
        pos = 0
        for c in range(dim):
            for r in range(c + 1):
                Q[r, c] = Q[c, r] = x[ids[pos]]
                pos += 1
        return Q

    def identity_residual(self, index: int, x: np.ndarray) -> Polynomial:
        """lhs - rhs of identity `index` after substituting a solution."""
        return self.identities[index].value(x)

    # -- compilation ------------------------------------------------------

    def compile(self) -> SdpProblem:
        rows: list[tuple[tuple[int, float], ...]] = []
        rhs: list[float] = []
        for diff in self.identities:
            support = set(diff.lin) | set(diff.const)
            for mono in sorted(support, key=grlex_key):
                coefs = sorted(
                    (vid, c)
                    for vid, c in diff.lin.get(mono, {}).items()
                    if c != 0.0
                )
                b = -diff.const.get(mono, 0.0)
                if not coefs and b == 0.0:
                    continue
                rows.append(tuple(coefs))
                rhs.append(b)
        nonneg = tuple(
            vid for vid, kind in enumerate(self.var_kinds) if kind[0] == NONNEG
        )
        return SdpProblem(
            n_vars=len(self.var_kinds),
            var_kinds=tuple(self.var_kinds),
            nonneg_ids=nonneg,
            psd_blocks=tuple(self.blocks),
            eq_rows=tuple(rows),
            eq_rhs=tuple(rhs),
            objective=tuple(sorted(self.objective.items())),
            objective_const=self.objective_const,
        )
