"""Canonical contact structure of R^(2n+1) in Darboux coordinates.

The contact form is eta = dz - p_i dq^i, so d(eta) = dq^i ^ dp_i, the Reeb
field is d/dz, and the musical isomorphisms have the closed frame form

    flat(v)  = iota_v d(eta) + eta(v) eta
    sharp(dq^i) = -d/dp_i
    sharp(dp_i) =  d/dq^i + p_i d/dz
    sharp(dz)   =  d/dz - p_i d/dp_i

The bivector is Lambda(a, b) = -d(eta)(sharp a, sharp b) with companion
field E = -Reeb; sharp_Lambda(a) = sharp(a) - a(Reeb) Reeb.  Everything here
is stateless and O(n) per call; the 2-tensor d(eta) + eta (x) eta is never
materialized as a matrix.
"""

import numpy as np

from . import expressions as ex
from .fields import (
    OneFormValue,
    PhasePoint,
    ScalarField,
    SymbolicVectorField,
    VectorField,
    VectorValue,
)


def eta_at(x, v):
    """eta(v) = vz - p . vq."""
    return float(v.vz - x.p @ v.vq)


def deta_at(x, v, w):
    """d(eta)(v, w) = sum_i (vq_i wp_i - vp_i wq_i)."""
    return float(v.vq @ w.vp - v.vp @ w.vq)


def flat_at(x, v):
    ev = eta_at(x, v)
    aq = -v.vp - ev * x.p
    ap = v.vq.copy()
    return OneFormValue(aq, ap, ev)


def sharp_at(x, a):
    vq = a.ap.copy()
    vp = -a.aq - a.az * x.p
    vz = float(a.ap @ x.p) + a.az
    return VectorValue(vq, vp, vz)


def reeb(x):
    return VectorValue(np.zeros(x.n), np.zeros(x.n), 1.0)


def eta_form(x):
    """Components of eta at x: (-p, 0, 1)."""
    return OneFormValue(-x.p, np.zeros(x.n), 1.0)


def lambda_at(x, a, b):
    """Jacobi bivector: Lambda(a, b) = -d(eta)(sharp a, sharp b)."""
    return -deta_at(x, sharp_at(x, a), sharp_at(x, b))


def sharp_lambda_at(x, a):
    """sharp_Lambda(a) = sharp(a) - a(Reeb) Reeb; kernel is the span of eta."""
    s = sharp_at(x, a)
    return VectorValue(s.vq, s.vp, s.vz - a.az)


class HamiltonianVectorField(VectorField):
    """X_H with flat(X_H) = dH - (Reeb(H) + H) eta.

    In components: X_H = dH/dp_i d/dq^i - (dH/dq^i + p_i dH/dz) d/dp_i
    + (p_i dH/dp_i - H) d/dz.  When H is expression-backed the component
    expressions are assembled symbolically so the jacobian is exact.
    """

    def __init__(self, H):
        super().__init__(H.n)
        self.H = H
        self._symbolic = None
        expr = getattr(H, "expr", None)
        if expr is not None:
            self._symbolic = SymbolicVectorField(self._component_exprs(expr, H.n), H.n)

    @staticmethod
    def _component_exprs(h_expr, n):
        names = ex.variable_names(n)
        dq = [h_expr.diff(names[i]) for i in range(n)]
        dp = [h_expr.diff(names[n + i]) for i in range(n)]
        dz = h_expr.diff("z")
        comps = []
        comps.extend(dp)
        for i in range(n):
            comps.append(ex.neg(ex.add(dq[i], ex.mul(ex.Var(names[n + i]), dz))))
        vz = ex.const(0.0)
        for i in range(n):
            vz = ex.add(vz, ex.mul(ex.Var(names[n + i]), dp[i]))
        comps.append(ex.sub(vz, h_expr))
        return comps

    def value(self, x):
        if self._symbolic is not None:
            return self._symbolic.value(x)
        dh = self.H.gradient(x)
        hv = self.H.value(x)
        vq = dh.ap.copy()
        vp = -dh.aq - dh.az * x.p
        vz = float(x.p @ dh.ap) - hv
        return VectorValue(vq, vp, vz)

    def jacobian(self, x):
        if self._symbolic is not None:
            return self._symbolic.jacobian(x)
        return super().jacobian(x)


def hamiltonian_vf(H):
    """Hamiltonian vector field of the scalar field H."""
    return HamiltonianVectorField(H)


def jacobi_bracket(f, g, x):
    """Jacobi bracket {f, g} = Lambda(df, dg) + f E(g) - g E(f), E = -Reeb."""
    df = f.gradient(x)
    dg = g.gradient(x)
    return lambda_at(x, df, dg) - f.value(x) * dg.az + g.value(x) * df.az
