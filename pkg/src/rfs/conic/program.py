"""Conic-program representation: linear, second-order-cone and exponential-cone
constraint blocks over a flat variable vector, compiled to the standard form

    minimize  q'x   subject to   A x + s = b,   s in K,

with K a product of zero, nonnegative, second-order and exponential cones
(exponential cone: (a, b, c) with b*exp(a/b) <= c, b > 0, closed at b = 0 by
a <= 0, c >= 0).
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class LinExpr:
    """Sparse affine expression const + sum(val[k] * x[idx[k]])."""

    __slots__ = ("idx", "val", "const")

    def __init__(self, idx=(), val=(), const=0.0):
        self.idx = np.asarray(idx, dtype=int)
        self.val = np.asarray(val, dtype=float)
        self.const = float(const)
        if self.idx.shape != self.val.shape:
            raise ValueError("idx and val must have the same length")

    @classmethod
    def of(cls, term, coef=1.0, const=0.0):
        """A single-variable term coef * x[term] + const."""
        return cls([int(term)], [float(coef)], const)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return LinExpr(self.idx, self.val, self.const + other)
        return LinExpr(np.concatenate([self.idx, other.idx]),
                       np.concatenate([self.val, other.val]),
                       self.const + other.const)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return self + (-other)
        return self + other * -1.0

    def __mul__(self, factor):
        return LinExpr(self.idx, self.val * float(factor), self.const * float(factor))

    __rmul__ = __mul__

    def value(self, x):
        return self.const + float(self.val @ x[self.idx]) if self.idx.size else self.const


def affine(pairs=(), const=0.0) -> LinExpr:
    """Build an expression from (variable index, coefficient) pairs."""
    if pairs:
        idx, val = zip(*pairs)
    else:
        idx, val = (), ()
    return LinExpr(idx, val, const)


class ConicProgram:
    def __init__(self):
        self.nvar = 0
        self.var_blocks = {}
        self._obj = {}
        self._eq = []       # LinExpr == 0
        self._nonneg = []   # LinExpr >= 0
        self._soc = []      # [t_expr, v1, ..., vk] with ||v|| <= t
        self._exp = []      # (a_expr, b_expr, c_expr) in K_exp

    # -- variables and objective ------------------------------------------

    def add_vars(self, name, count) -> np.ndarray:
        if name in self.var_blocks:
            raise ValueError(f"variable block {name!r} already declared")
        idx = np.arange(self.nvar, self.nvar + count)
        self.var_blocks[name] = idx
        self.nvar += count
        return idx

    def set_objective(self, expr: LinExpr):
        """Minimize the given linear functional (constants are dropped)."""
        self._check(expr)
        self._obj = {}
        for j, v in zip(expr.idx, expr.val):
            self._obj[int(j)] = self._obj.get(int(j), 0.0) + float(v)
        self._obj_const = expr.const

    def _check(self, expr: LinExpr):
        if expr.idx.size and (expr.idx.min() < 0 or expr.idx.max() >= self.nvar):
            raise ValueError("expression references undeclared variables")
        if not (np.all(np.isfinite(expr.val)) and np.isfinite(expr.const)):
            raise ValueError("non-finite coefficients")

    # -- constraint blocks -------------------------------------------------

    def add_eq(self, expr: LinExpr):
        self._check(expr)
        self._eq.append(expr)
        return ("zero", len(self._eq) - 1)

    def add_nonneg(self, expr: LinExpr):
        self._check(expr)
        self._nonneg.append(expr)
        return ("nonneg", len(self._nonneg) - 1)

    def add_soc(self, exprs):
        for e in exprs:
            self._check(e)
        self._soc.append(list(exprs))
        return ("soc", len(self._soc) - 1)

    def add_exp(self, a, b, c):
        for e in (a, b, c):
            self._check(e)
        self._exp.append((a, b, c))
        return ("exp", len(self._exp) - 1)

    # -- epigraph gadgets ---------------------------------------------------

    def add_softplus_epigraph(self, z: LinExpr, d: LinExpr, scale=1.0):
        """Enforce scale * ln(1 + exp(z)) <= d for affine z, d and a constant
        scale >= 0, via the perspective encoding

            (scale*z - d, scale, u) in K_exp,  (-d, scale, v) in K_exp,
            u + v <= scale,  u, v >= 0 auxiliary.

        At scale = 0 the encoding closes to the correct constraint d >= 0.
        """
        scale = float(scale)
        if scale < 0:
            raise ValueError("scale must be nonnegative")
        aux = self.add_vars(f"__softplus_{len(self._exp)}", 2)
        u, v = LinExpr.of(aux[0]), LinExpr.of(aux[1])
        const_scale = LinExpr(const=scale)
        h1 = self.add_exp(z * scale - d, const_scale, u)
        h2 = self.add_exp(d * -1.0, const_scale, v)
        h3 = self.add_nonneg((u + v) * -1.0 + scale)
        return (h1, h2, h3)

    def add_norm_epigraph(self, vec, t: LinExpr, scale=1.0):
        """Enforce scale * ||vec||_2 <= t as a second-order cone."""
        scale = float(scale)
        if scale < 0:
            raise ValueError("scale must be nonnegative")
        return self.add_soc([t] + [e * scale for e in vec])

    # -- compilation --------------------------------------------------------

    def compile(self):
        """Standard-form data (q, A, b, cone layout). Row order: zero block,
        nonnegative block, SOC blocks, exponential triples."""
        q = np.zeros(self.nvar)
        for j, v in self._obj.items():
            q[j] = v

        rows = []
        layout = []
        if self._eq:
            rows.extend(self._eq)
            layout.append(("zero", len(self._eq)))
        if self._nonneg:
            rows.extend(self._nonneg)
            layout.append(("nonneg", len(self._nonneg)))
        for block in self._soc:
            rows.extend(block)
            layout.append(("soc", len(block)))
        for triple in self._exp:
            rows.extend(triple)
            layout.append(("exp", 3))

        nrow = len(rows)
        b = np.empty(nrow)
        data, ri, ci = [], [], []
        for i, e in enumerate(rows):
            b[i] = e.const            # s_i = const + val.x  ==>  A row = -val
            if e.idx.size:
                ri.append(np.full(e.idx.size, i))
                ci.append(e.idx)
                data.append(-e.val)
        if data:
            A = sp.csc_matrix(
                (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
                shape=(nrow, self.nvar))
        else:
            A = sp.csc_matrix((nrow, self.nvar))
        A.sum_duplicates()
        return q, A, b, layout

    def dump(self) -> str:
        """Plain-text form of the compiled program for external cross-checks.

        Format (one record per line):
            conic-program v1
            nvar N
            objective            followed by "j coef" lines
            cones                followed by "zero M" / "nonneg M" / "soc DIM" / "exp" lines
            A                    followed by "i j val" triplets of the row-major compiled matrix
            b                    followed by "i val" lines for nonzero entries
        """
        q, A, b, layout = self.compile()
        out = ["conic-program v1", f"nvar {self.nvar}", "objective"]
        out.extend(f"{j} {q[j]!r}" for j in np.flatnonzero(q))
        out.append("cones")
        for kind, size in layout:
            out.append("exp" if kind == "exp" else f"{kind} {size}")
        out.append("A")
        coo = A.tocoo()
        order = np.lexsort((coo.col, coo.row))
        out.extend(f"{coo.row[k]} {coo.col[k]} {coo.data[k]!r}" for k in order)
        out.append("b")
        out.extend(f"{i} {b[i]!r}" for i in np.flatnonzero(b))
        return "\n".join(out) + "\n"
