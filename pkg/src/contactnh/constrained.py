"""Constrained contact dynamics: multiplier solves, projectors, diagnostics.

A constrained system is the data (chart, H, constraint functions phi^a,
force one-forms Psi^a).  The constraint set M = {phi = 0} carries the
dynamics; the force basis spans the annihilator of the reaction
distribution F.  The constrained field is obtained by eliminating the
Lagrange multipliers through the matrix

    C[a, b] = X_b(phi^a),   X_b = sharp(Psi^b),

so that X_cons = X_H - sum_a lambda^a X_a with C lambda = X_H(phi).  The
same solve yields the complementary projectors P (onto TM) and Q (onto the
span of the X_a), and a second projector pair built from the additional
directions Y_c = sharp(d phi^c) when the structural hypotheses (forces
close under sharp-pairing, Reeb annihilated by the forces, H constant in
the force directions on M) hold.

Rank decisions use singular values with relative threshold RANK_RTOL; all
pass/fail tolerances are scaled by 1 + |H(x)| + |x|_inf so they survive
unit changes.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import expressions as ex
from .contact import eta_at, eta_form, flat_at, hamiltonian_vf, reeb, sharp_at
from .errors import NotInSplit, OffConstraint, PreconditionFailed, SingularC, SingularG
from .fields import (
    CallableVectorField,
    PhasePoint,
    ScalarField,
    SymbolicVectorField,
    VectorField,
    VectorValue,
    lie_eta,
)

RANK_RTOL = 1e-9
ON_M_TOL_FACTOR = 1e-8
SPLIT_RESIDUAL_TOL = 1e-8
# RK4 stage points leave M by O(h^2); field evaluation only rejects points
# that are grossly off the constraint set, strict membership is enforced at
# trajectory starts and in the per-point public operations.
FIELD_GUARD_FACTOR = 1e-3


def _null_space(A, rtol=RANK_RTOL):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    _, s, vt = np.linalg.svd(A)
    if s.size == 0:
        return np.eye(A.shape[1])
    rank = int(np.sum(s > rtol * s[0]))
    return vt[rank:].T


def _rank(A, rtol=RANK_RTOL):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if min(A.shape) == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass
class ForceBasis:
    """One-forms Psi^a = Phi^a_i dq^i + Psi^a_i dp_i + mu^a dz spanning ann F."""

    n: int
    dq: list  # k rows of n expressions (dq^i components)
    dp: list  # k rows of n expressions (dp_i components)
    dz: list  # k expressions (dz components)

    def __post_init__(self):
        if not (len(self.dq) == len(self.dp) == len(self.dz)):
            raise ValueError("inconsistent force basis sizes")
        for row in list(self.dq) + list(self.dp):
            if len(row) != self.n:
                raise ValueError("force component row has wrong length")

    @property
    def k(self):
        return len(self.dz)

    @classmethod
    def from_strings(cls, n, rows):
        """rows: iterable of (dq_strings, dp_strings, dz_string)."""
        dq, dp, dz = [], [], []
        for row_q, row_p, mu in rows:
            dq.append([ex.parse(t, n) for t in row_q])
            dp.append([ex.parse(t, n) for t in row_p])
            dz.append(ex.parse(mu, n))
        return cls(n, dq, dp, dz)

    def covector_matrix(self, x):
        """k x (2n+1) matrix whose rows are the Psi^a components at x."""
        env = x.binding()
        rows = np.empty((self.k, 2 * self.n + 1))
        for a in range(self.k):
            rows[a, : self.n] = [e.eval(env) for e in self.dq[a]]
            rows[a, self.n : 2 * self.n] = [e.eval(env) for e in self.dp[a]]
            rows[a, 2 * self.n] = self.dz[a].eval(env)
        return rows

    def vector_matrix(self, x):
        """(2n+1) x k matrix with columns X_a = sharp(Psi^a) at x."""
        psi = self.covector_matrix(x)
        cols = np.empty((2 * self.n + 1, self.k))
        for a in range(self.k):
            from .fields import OneFormValue

            v = sharp_at(x, OneFormValue.from_array(psi[a], self.n))
            cols[:, a] = v.to_array()
        return cols

    def vector_fields(self):
        """Symbolic fields X_a; components follow the sharp frame formulas."""
        out = []
        names = ex.variable_names(self.n)
        for a in range(self.k):
            comps = []
            mu = self.dz[a]
            for i in range(self.n):
                comps.append(self.dp[a][i])
            for i in range(self.n):
                comps.append(
                    ex.neg(ex.add(self.dq[a][i], ex.mul(mu, ex.Var(names[self.n + i]))))
                )
            vz = mu
            for i in range(self.n):
                vz = ex.add(vz, ex.mul(self.dp[a][i], ex.Var(names[self.n + i])))
            comps.append(vz)
            out.append(SymbolicVectorField(comps, self.n))
        return out


@dataclass
class ConstraintSet:
    """Constraint functions phi^a whose common zero set is M."""

    n: int
    fields: list

    @property
    def m(self):
        return len(self.fields)

    @classmethod
    def from_strings(cls, n, texts):
        return cls(n, [ScalarField.from_string(t, n) for t in texts])

    def values_at(self, x):
        return np.array([f.value(x) for f in self.fields])

    def jacobian_at(self, x):
        """m x (2n+1) matrix with rows d phi^a at x."""
        if self.m == 0:
            return np.zeros((0, 2 * self.n + 1))
        return np.stack([f.gradient(x).to_array() for f in self.fields])


@dataclass
class ConstrainedSystem:
    n: int
    H: ScalarField
    constraints: ConstraintSet
    forces: ForceBasis

    def __post_init__(self):
        if self.constraints.m > 2 * self.n or self.forces.k > 2 * self.n + 1:
            raise ValueError("too many constraints or forces for the chart")

    @property
    def m(self):
        return self.constraints.m

    @property
    def k(self):
        return self.forces.k

    def scale(self, x):
        return 1.0 + abs(self.H.value(x)) + x.norm_inf()

    def tol_on_m(self, x):
        return ON_M_TOL_FACTOR * (1.0 + x.norm_inf())

    def drift(self, x):
        if self.m == 0:
            return 0.0
        return float(np.max(np.abs(self.constraints.values_at(x))))

    def require_on_constraint(self, x, tol=None):
        tol = self.tol_on_m(x) if tol is None else tol
        d = self.drift(x)
        if d > tol:
            raise OffConstraint(f"|phi|={d:.3e} exceeds tolerance {tol:.3e}")

    def hamiltonian_field(self):
        return hamiltonian_vf(self.H)


def force_vector_fields(sys, x):
    """Values of the force fields X_a = sharp(Psi^a) at x."""
    mat = sys.forces.vector_matrix(x)
    return [VectorValue.from_array(mat[:, a], sys.n) for a in range(sys.k)]


def _c_matrix_raw(sys, x):
    return sys.constraints.jacobian_at(x) @ sys.forces.vector_matrix(x)


def c_matrix(sys, x):
    """Multiplier matrix C[a, b] = X_b(phi^a); requires x on M."""
    sys.require_on_constraint(x)
    return _c_matrix_raw(sys, x)


def _solve_multipliers(sys, x, C, w, scale=None):
    """Solve C lambda = w.

    Square C: direct solve (SingularC on rank loss).  Wide C (k > m) always
    has a kernel, so uniqueness is impossible: SingularC.  Tall C (k < m):
    least squares, with the residual telling whether w is realizable inside
    the span; beyond tolerance the input is outside the direct sum the
    projector acts on (NotInSplit).
    """
    m, k = C.shape
    if k == 0:
        return np.zeros(0)
    if _rank(C) < k:
        raise SingularC(f"multiplier matrix rank {_rank(C)} < {k}")
    if m == k:
        return np.linalg.solve(C, w)
    lam, *_ = np.linalg.lstsq(C, w, rcond=None)
    residual = float(np.max(np.abs(C @ lam - w)))
    scale = sys.scale(x) if scale is None else scale
    if residual > SPLIT_RESIDUAL_TOL * scale:
        raise NotInSplit(f"projection residual {residual:.3e}")
    return lam


def uniqueness_check(sys, x):
    """Uniqueness holds iff no force direction is tangent to M: rank(C) = k."""
    sys.require_on_constraint(x)
    C = _c_matrix_raw(sys, x)
    rank = _rank(C)
    return {"unique": rank == sys.k, "rank": rank}


def existence_check(sys, x):
    """Pair dH - (H + Reeb(H)) eta against a basis of (TM^perp) cap F.

    The intersection is assembled by stacking the linear conditions that cut
    out each side and extracting the null space.
    """
    sys.require_on_constraint(x)
    n = sys.n
    dim = 2 * n + 1
    tm_basis = _null_space(sys.constraints.jacobian_at(x))
    flat_rows = np.stack(
        [flat_at(x, VectorValue.from_array(tm_basis[:, j], n)).to_array() for j in range(tm_basis.shape[1])]
    ) if tm_basis.shape[1] else np.zeros((0, dim))
    psi = sys.forces.covector_matrix(x)
    inter = _null_space(np.vstack([flat_rows, psi]))
    if inter.shape[1] == 0:
        return {"exists": True, "residual": 0.0}
    dh = sys.H.gradient(x).to_array()
    hv = sys.H.value(x)
    rh = sys.H.gradient(x).az
    form = dh - (hv + rh) * eta_form(x).to_array()
    residual = float(np.max(np.abs(form @ inter)))
    return {"exists": residual <= SPLIT_RESIDUAL_TOL * sys.scale(x), "residual": residual}


class ConstrainedVectorField(VectorField):
    """X_cons = X_H - X_H(phi^b) C^{ba} X_a, evaluated pointwise.

    The multiplier elimination extends smoothly off M, so the field is
    defined on a neighborhood; only grossly off-constraint points are
    rejected.  The jacobian falls back to finite differences (the solve has
    no closed symbolic form).
    """

    def __init__(self, sys):
        super().__init__(sys.n)
        self.sys = sys
        self._xh = sys.hamiltonian_field()

    def multipliers(self, x):
        sys = self.sys
        if sys.m == 0 or sys.k == 0:
            if sys.k:
                return np.zeros(sys.k)
            return np.zeros(0)
        C = _c_matrix_raw(sys, x)
        dphi = sys.constraints.jacobian_at(x)
        w = dphi @ self._xh.value(x).to_array()
        return _solve_multipliers(sys, x, C, w)

    def value(self, x):
        sys = self.sys
        guard = FIELD_GUARD_FACTOR * (1.0 + x.norm_inf())
        if sys.drift(x) > guard:
            raise OffConstraint(f"field queried far from M: |phi|={sys.drift(x):.3e}")
        xh = self._xh.value(x).to_array()
        if sys.m == 0 or sys.k == 0:
            return VectorValue.from_array(xh, sys.n)
        lam = self.multipliers(x)
        return VectorValue.from_array(xh - sys.forces.vector_matrix(x) @ lam, sys.n)


def constrained_vf(sys):
    """The constrained Hamiltonian vector field (defined along M)."""
    return ConstrainedVectorField(sys)


# ---------------------------------------------------------------------------
# Projectors


def projector_Q(sys, x, Y):
    """Q(Y) = Y(phi^b) C^{ba} X_a: the reaction-force part of Y."""
    if sys.m == 0 or sys.k == 0:
        return VectorValue.zero(sys.n)
    C = _c_matrix_raw(sys, x)
    w = sys.constraints.jacobian_at(x) @ Y.to_array()
    lam = _solve_multipliers(sys, x, C, w)
    return VectorValue.from_array(sys.forces.vector_matrix(x) @ lam, sys.n)


def projector_P(sys, x, Y):
    """P(Y) = Y - Q(Y): the part of Y tangent to M."""
    qy = projector_Q(sys, x, Y)
    return VectorValue.from_array(Y.to_array() - qy.to_array(), sys.n)


def p_matrix(sys, x):
    """Matrix of the projector P onto TM along the force directions.

    Requires the square splitting (k = m); the per-vector projector_P also
    covers the tall residual-checked case.
    """
    dim = 2 * sys.n + 1
    if sys.m == 0 or sys.k == 0:
        return np.eye(dim)
    if sys.k != sys.m:
        raise PreconditionFailed("projector matrix needs k = m")
    C = _c_matrix_raw(sys, x)
    if _rank(C) < sys.k:
        raise SingularC("multiplier matrix is singular")
    dphi = sys.constraints.jacobian_at(x)
    xmat = sys.forces.vector_matrix(x)
    return np.eye(dim) - xmat @ np.linalg.solve(C, dphi)


def structural_checks(sys, x, tol=None):
    """Pointwise structural hypotheses of the second projector pair.

    reeb_in_F:          Psi^a(Reeb) = mu^a vanishes for all a
    F_self_orthogonal:  Psi^b(X_a) vanishes for all a, b
    mechanical:         dH(X_a) vanishes for all a (x on M)
    """
    sys.require_on_constraint(x)
    tol = 1e-9 * sys.scale(x) if tol is None else tol
    psi = sys.forces.covector_matrix(x)
    xmat = sys.forces.vector_matrix(x)
    mu_res = float(np.max(np.abs(psi[:, -1]))) if sys.k else 0.0
    ortho_res = float(np.max(np.abs(psi @ xmat))) if sys.k else 0.0
    dh = sys.H.gradient(x).to_array()
    mech_res = float(np.max(np.abs(dh @ xmat))) if sys.k else 0.0
    return {
        "reeb_in_F": mu_res <= tol,
        "F_self_orthogonal": ortho_res <= tol,
        "mechanical": mech_res <= tol,
        "residuals": {"reeb_in_F": mu_res, "F_self_orthogonal": ortho_res, "mechanical": mech_res},
    }


def y_c_matrix(sys, x):
    """(2n+1) x m matrix with columns Y_c = sharp(d phi^c)."""
    dphi = sys.constraints.jacobian_at(x)
    cols = np.empty((2 * sys.n + 1, sys.m))
    for c in range(sys.m):
        from .fields import OneFormValue

        cols[:, c] = sharp_at(x, OneFormValue.from_array(dphi[c], sys.n)).to_array()
    return cols


def g_matrix(sys, x):
    """G[d, c] = Psi^d(Y_c)."""
    return sys.forces.covector_matrix(x) @ y_c_matrix(sys, x)


def roman_p_projector(sys, x, Y):
    """Projection onto TM cap F along the span of {Y_c, X_a}.

    Valid under the structural hypotheses; on the Hamiltonian field it
    produces the same constrained field as projector_P.
    """
    checks = structural_checks(sys, x)
    if not (checks["reeb_in_F"] and checks["F_self_orthogonal"] and checks["mechanical"]):
        failed = [k for k in ("reeb_in_F", "F_self_orthogonal", "mechanical") if not checks[k]]
        raise PreconditionFailed(f"structural hypotheses failed: {', '.join(failed)}")
    if sys.m == 0 or sys.k == 0:
        return VectorValue.from_array(Y.to_array(), sys.n)
    qy = roman_q_projector(sys, x, Y)
    return VectorValue.from_array(Y.to_array() - qy.to_array(), sys.n)


def roman_q_projector(sys, x, Y):
    G = g_matrix(sys, x)
    if _rank(G) < min(G.shape):
        raise SingularG("force/constraint-gradient pairing matrix is singular")
    psi = sys.forces.covector_matrix(x)
    ymat = y_c_matrix(sys, x)
    dphi = sys.constraints.jacobian_at(x)
    C = _c_matrix_raw(sys, x)
    yarr = Y.to_array()
    if G.shape[0] == G.shape[1]:
        nu = np.linalg.solve(G, psi @ yarr)
    else:
        nu, *_ = np.linalg.lstsq(G, psi @ yarr, rcond=None)
    w = dphi @ yarr - (dphi @ ymat) @ nu
    lam = _solve_multipliers(sys, x, C, w)
    out = ymat @ nu + sys.forces.vector_matrix(x) @ lam
    return VectorValue.from_array(out, sys.n)


def roman_p_matrix(sys, x):
    dim = 2 * sys.n + 1
    if sys.m == 0 or sys.k == 0:
        return np.eye(dim)
    if sys.k != sys.m:
        raise PreconditionFailed("projector matrix needs k = m")
    G = g_matrix(sys, x)
    if _rank(G) < sys.m:
        raise SingularG("force/constraint-gradient pairing matrix is singular")
    psi = sys.forces.covector_matrix(x)
    ymat = y_c_matrix(sys, x)
    dphi = sys.constraints.jacobian_at(x)
    C = _c_matrix_raw(sys, x)
    if _rank(C) < sys.k:
        raise SingularC("multiplier matrix is singular")
    ginv_psi = np.linalg.solve(G, psi)
    q_mat = ymat @ ginv_psi + sys.forces.vector_matrix(x) @ np.linalg.solve(
        C, dphi - (dphi @ ymat) @ ginv_psi
    )
    return np.eye(dim) - q_mat


# ---------------------------------------------------------------------------
# Identity and equivalence diagnostics


def f_basis(sys, x):
    """Orthonormal basis of the reaction distribution F = ker(Psi) at x."""
    return _null_space(sys.forces.covector_matrix(x))


def eq64_membership_residual(sys, x, xval):
    """Pairing of flat(X) - dH + (H + Reeb(H)) eta with a basis of F."""
    beta = (
        flat_at(x, xval).to_array()
        - sys.H.gradient(x).to_array()
        + (sys.H.value(x) + sys.H.gradient(x).az) * eta_form(x).to_array()
    )
    basis = f_basis(sys, x)
    if basis.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(beta @ basis)))


def theorem_pair_residuals(sys, x, X):
    """Residuals of the two equivalent conditions: eta(X) = -H and
    (L_X eta + Reeb(H) eta) paired against a basis of F."""
    xval = X.value(x)
    r1 = abs(eta_at(x, xval) + sys.H.value(x))
    lie = lie_eta(X, x).to_array() + sys.H.gradient(x).az * eta_form(x).to_array()
    basis = f_basis(sys, x)
    r2 = float(np.max(np.abs(lie @ basis))) if basis.shape[1] else 0.0
    return {"eta_residual": r1, "lie_residual": r2}


def identity_report(sys, x):
    """Residuals of the energy/contact-form evolution laws of the
    constrained field, plus the volume law of the unconstrained field."""
    xh_field = sys.hamiltonian_field()
    cons = constrained_vf(sys)
    hv = sys.H.value(x)
    rh = sys.H.gradient(x).az
    dh = sys.H.gradient(x)

    q_of_xh = projector_Q(sys, x, xh_field.value(x))
    energy_res = abs(dh(cons.value(x)) + rh * hv + dh(q_of_xh))

    q_field = CallableVectorField(
        lambda pt: projector_Q(sys, pt, xh_field.value(pt)), sys.n
    )
    lie_cons = lie_eta(cons, x).to_array()
    lie_q = lie_eta(q_field, x).to_array()
    eta_arr = eta_form(x).to_array()
    eta_res = float(np.max(np.abs(lie_cons + rh * eta_arr + lie_q)))

    from .fields import divergence

    div_res = abs(divergence(xh_field, x) + (sys.n + 1) * rh)
    return {
        "energy_residual": energy_res,
        "eta_residual": eta_res,
        "divergence_residual": div_res,
    }


# ---------------------------------------------------------------------------
# Points on the constraint set


def newton_project(sys, x, max_iter=10, tol=1e-12):
    """Move x onto {phi = 0} along the force directions X_a frozen at x.

    Solves phi(x + X c) = 0 for the coefficient vector c by Newton
    iteration; raises OffConstraint if it does not converge.
    """
    if sys.m == 0:
        return x
    if sys.k == 0:
        raise OffConstraint("no force directions to project along")
    base = x.to_array()
    xmat = sys.forces.vector_matrix(x)
    c = np.zeros(sys.k)
    for _ in range(max_iter):
        pt = PhasePoint.from_array(base + xmat @ c, sys.n)
        r = sys.constraints.values_at(pt)
        if float(np.max(np.abs(r))) <= tol:
            return pt
        jac = sys.constraints.jacobian_at(pt) @ xmat
        step, *_ = np.linalg.lstsq(jac, r, rcond=None)
        c -= step
    pt = PhasePoint.from_array(base + xmat @ c, sys.n)
    if float(np.max(np.abs(sys.constraints.values_at(pt)))) <= tol:
        return pt
    raise OffConstraint("projection onto the constraint set did not converge")


def sample_on_constraint(sys, count, seed, spread=1.0, max_attempts=None):
    """Seeded ambient sampling followed by Newton projection onto M.

    Points where projection fails or the multiplier solve is not unique are
    rejected.
    """
    rng = np.random.default_rng(seed)
    out = []
    attempts = 0
    limit = max_attempts if max_attempts is not None else 50 * count
    while len(out) < count and attempts < limit:
        attempts += 1
        arr = spread * rng.standard_normal(2 * sys.n + 1)
        x = PhasePoint.from_array(arr, sys.n)
        try:
            pt = newton_project(sys, x)
            if sys.m > 0 and not uniqueness_check(sys, pt)["unique"]:
                continue
            out.append(pt)
        except (OffConstraint, SingularC, np.linalg.LinAlgError):
            continue
    if len(out) < count:
        raise OffConstraint(
            f"could only sample {len(out)} of {count} requested constraint points"
        )
    return out
