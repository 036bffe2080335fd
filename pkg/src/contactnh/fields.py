"""Points, one-forms, vectors and fields on the Darboux chart of R^(2n+1).

Component conventions: arrays are laid out as [q1..qn, p1..pn, z], matching
:func:`contactnh.expressions.variable_names`.  OneFormValue and VectorValue
hold the frame components in (dq, dp, dz) / (d/dq, d/dp, d/dz); pairing a
one-form with a vector is then the plain dot product of their arrays.

Scalar and vector fields built from expressions carry exact partial
derivatives.  Fields that only exist numerically (projected fields,
bracket-valued fields) fall back to central finite differences with step
h = FD_STEP_FACTOR * max(1, |x|_inf); a five-point stencil keeps the
truncation error below the 1e-10 residual budgets of the identity checks.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import expressions as ex

FD_STEP_FACTOR = 1e-5


@dataclass
class PhasePoint:
    n: int
    q: np.ndarray
    p: np.ndarray
    z: float

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.z = float(self.z)
        if self.n < 1 or self.q.shape != (self.n,) or self.p.shape != (self.n,):
            raise ValueError("inconsistent chart dimensions")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p)) and math.isfinite(self.z)):
            raise ValueError("non-finite phase point")

    @classmethod
    def from_array(cls, arr, n):
        arr = np.asarray(arr, dtype=float)
        return cls(n, arr[:n], arr[n : 2 * n], arr[2 * n])

    def to_array(self):
        return np.concatenate([self.q, self.p, [self.z]])

    def binding(self):
        env = {f"q{i + 1}": self.q[i] for i in range(self.n)}
        env.update({f"p{i + 1}": self.p[i] for i in range(self.n)})
        env["z"] = self.z
        return env

    def norm_inf(self):
        return float(np.max(np.abs(self.to_array())))


@dataclass
class OneFormValue:
    aq: np.ndarray
    ap: np.ndarray
    az: float

    def __post_init__(self):
        self.aq = np.asarray(self.aq, dtype=float)
        self.ap = np.asarray(self.ap, dtype=float)
        self.az = float(self.az)

    @classmethod
    def from_array(cls, arr, n):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:n], arr[n : 2 * n], arr[2 * n])

    def to_array(self):
        return np.concatenate([self.aq, self.ap, [self.az]])

    def __call__(self, v):
        """Natural pairing with a VectorValue."""
        return float(self.aq @ v.vq + self.ap @ v.vp + self.az * v.vz)


@dataclass
class VectorValue:
    vq: np.ndarray
    vp: np.ndarray
    vz: float

    def __post_init__(self):
        self.vq = np.asarray(self.vq, dtype=float)
        self.vp = np.asarray(self.vp, dtype=float)
        self.vz = float(self.vz)

    @classmethod
    def from_array(cls, arr, n):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[:n], arr[n : 2 * n], arr[2 * n])

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0.0)

    def to_array(self):
        return np.concatenate([self.vq, self.vp, [self.vz]])


def fd_step(x):
    return FD_STEP_FACTOR * max(1.0, x.norm_inf())


def _fd_derivative(sample, base, j, h, n):
    """Five-point central difference of a (vector- or scalar-valued) map."""
    def at(offset):
        arr = base.copy()
        arr[j] += offset
        return sample(PhasePoint.from_array(arr, n))

    return (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h)


class ScalarField:
    """Expression-backed scalar function with exact symbolic partials."""

    def __init__(self, expr, n):
        self.expr = expr
        self.n = n
        self._partials = None

    @classmethod
    def from_string(cls, text, n):
        return cls(ex.parse(text, n), n)

    def partials(self):
        if self._partials is None:
            self._partials = tuple(
                self.expr.diff(name) for name in ex.variable_names(self.n)
            )
        return self._partials

    def value(self, x):
        return self.expr.eval(x.binding())

    def gradient(self, x):
        env = x.binding()
        comps = np.array([p.eval(env) for p in self.partials()])
        return OneFormValue.from_array(comps, self.n)


class NumericScalarField:
    """Scalar function defined only pointwise; gradient by central differences."""

    def __init__(self, func, n, step=None):
        self.func = func
        self.n = n
        self.step = step

    def value(self, x):
        return self.func(x)

    def gradient(self, x):
        h = self.step if self.step is not None else fd_step(x)
        base = x.to_array()
        comps = np.array(
            [_fd_derivative(self.func, base, j, h, self.n) for j in range(2 * self.n + 1)]
        )
        return OneFormValue.from_array(comps, self.n)


class ProductField:
    """Pointwise product g*h with the exact Leibniz gradient."""

    def __init__(self, g, h):
        if g.n != h.n:
            raise ValueError("mismatched chart dimensions")
        self.g = g
        self.h = h
        self.n = g.n

    def value(self, x):
        return self.g.value(x) * self.h.value(x)

    def gradient(self, x):
        gv, hv = self.g.value(x), self.h.value(x)
        ga, ha = self.g.gradient(x).to_array(), self.h.gradient(x).to_array()
        return OneFormValue.from_array(gv * ha + hv * ga, self.n)


class VectorField:
    """Base vector field: subclasses provide value(); jacobian() defaults to FD.

    jacobian(x)[c, j] is the partial of component c with respect to
    coordinate j, both in [q, p, z] layout.
    """

    def __init__(self, n):
        self.n = n

    def value(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def value_array(self, x):
        return self.value(x).to_array()

    def jacobian(self, x):
        h = fd_step(x)
        dim = 2 * self.n + 1
        base = x.to_array()
        jac = np.empty((dim, dim))
        for j in range(dim):
            jac[:, j] = _fd_derivative(self.value_array, base, j, h, self.n)
        return jac


class SymbolicVectorField(VectorField):
    """Vector field whose 2n+1 components are expressions; exact jacobian."""

    def __init__(self, components, n):
        super().__init__(n)
        if len(components) != 2 * n + 1:
            raise ValueError("need 2n+1 component expressions")
        self.components = tuple(components)
        self._jac_exprs = None

    def value(self, x):
        env = x.binding()
        return VectorValue.from_array(
            np.array([c.eval(env) for c in self.components]), self.n
        )

    def jacobian(self, x):
        if self._jac_exprs is None:
            names = ex.variable_names(self.n)
            self._jac_exprs = tuple(
                tuple(c.diff(name) for name in names) for c in self.components
            )
        env = x.binding()
        return np.array([[d.eval(env) for d in row] for row in self._jac_exprs])


class CallableVectorField(VectorField):
    def __init__(self, func, n):
        super().__init__(n)
        self.func = func

    def value(self, x):
        return self.func(x)


class ZeroVectorField(VectorField):
    def value(self, x):
        return VectorValue.zero(self.n)

    def jacobian(self, x):
        dim = 2 * self.n + 1
        return np.zeros((dim, dim))


# ---------------------------------------------------------------------------
# Differential operators


def gradient(f, x):
    """Exterior derivative df at x as a OneFormValue."""
    return f.gradient(x)


def lie_scalar(X, f, x):
    """Lie derivative of the scalar field f along X at x: df(X)."""
    return f.gradient(x)(X.value(x))


def lie_eta(X, x):
    """Lie derivative of the contact form along X at x.

    Computed by Cartan's formula as iota_X d(eta) + d(eta(X)); the second
    term needs the first derivatives of X, so fields without symbolic
    components fall back to finite differences through jacobian().
    """
    n = X.n
    val = X.value(x)
    jac = X.jacobian(x)
    # iota_X d(eta) = sum_i (Xq_i dp_i - Xp_i dq^i)
    iota = np.concatenate([-val.vp, val.vq, [0.0]])
    # d of the scalar s(x) = eta_x(X(x)) = Xz - p . Xq
    ds = jac[2 * n, :] - x.p @ jac[0:n, :]
    ds[n : 2 * n] -= val.vq
    return OneFormValue.from_array(iota + ds, n)


def divergence(X, x):
    """Coordinate divergence of X at x (trace of the component jacobian)."""
    return float(np.trace(X.jacobian(x)))
