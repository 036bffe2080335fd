import numpy as np
import pytest

from contactnh import contact
from contactnh.fields import (
    CallableVectorField,
    PhasePoint,
    ProductField,
    ScalarField,
    SymbolicVectorField,
    VectorValue,
    ZeroVectorField,
    divergence,
    gradient,
    lie_eta,
    lie_scalar,
)
from contactnh import expressions as ex


SAMPLE = PhasePoint(2, [1.0, 0.0], [1.0, 1.0], 0.0)


def random_points(rng, n, count):
    return [
        PhasePoint(n, rng.normal(size=n), rng.normal(size=n), rng.normal())
        for _ in range(count)
    ]


def test_gradient_coordinate_function():
    f = ScalarField.from_string("z", 2)
    g = gradient(f, SAMPLE)
    assert np.allclose(g.aq, 0) and np.allclose(g.ap, 0) and g.az == 1.0


def test_gradient_hand_values():
    f = ScalarField.from_string("p2 - q1*p1", 2)
    g = gradient(f, SAMPLE)
    assert np.allclose(g.aq, [-1.0, 0.0])
    assert np.allclose(g.ap, [-1.0, 1.0])
    assert g.az == 0.0

    h = ScalarField.from_string("(p1^2 + p2^2)/2 + z", 2)
    gh = gradient(h, SAMPLE)
    assert np.allclose(gh.aq, [0.0, 0.0])
    assert np.allclose(gh.ap, [1.0, 1.0])
    assert gh.az == 1.0


def fd_gradient(f, x, h=1e-5):
    """Independent oracle: plain two-point central difference at step h."""
    base = x.to_array()
    out = np.empty(base.size)
    for j in range(base.size):
        hi, lo = base.copy(), base.copy()
        hi[j] += h
        lo[j] -= h
        out[j] = (
            f.value(PhasePoint.from_array(hi, f.n)) - f.value(PhasePoint.from_array(lo, f.n))
        ) / (2.0 * h)
    return out


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    fields = [
        ScalarField.from_string("sin(q1)*p2 + exp(z/4) - q2^2*p1", 2),
        ScalarField.from_string("tanh(p1) + cos(q2)*z", 2),
    ]
    for f in fields:
        for x in random_points(rng, 2, 100):
            a = f.gradient(x).to_array()
            b = fd_gradient(f, x)
            assert np.allclose(a, b, rtol=1e-6, atol=1e-6)


def test_lie_scalar_zero_field_and_constant():
    f = ScalarField.from_string("q1*p2 + z", 2)
    assert lie_scalar(ZeroVectorField(2), f, SAMPLE) == 0.0
    c = ScalarField.from_string("3.5", 2)
    X = contact.hamiltonian_vf(f)
    assert lie_scalar(X, c, SAMPLE) == 0.0


def test_lie_scalar_energy_dissipation():
    H = ScalarField.from_string("(p1^2 + p2^2)/2 + z", 2)
    X = contact.hamiltonian_vf(H)
    # L_{X_H} H = -Reeb(H) * H = -1 * 1 at the sample point
    assert lie_scalar(X, H, SAMPLE) == pytest.approx(-1.0, abs=1e-12)


def test_lie_eta_reeb_and_zero():
    reeb_field = CallableVectorField(lambda x: contact.reeb(x), 2)
    val = lie_eta(reeb_field, SAMPLE).to_array()
    assert np.allclose(val, 0.0, atol=1e-9)
    assert np.allclose(lie_eta(ZeroVectorField(2), SAMPLE).to_array(), 0.0)


def test_lie_eta_hamiltonian_identity():
    # L_{X_H} eta = -Reeb(H) eta; for H with Reeb(H)=1 this is -eta
    H = ScalarField.from_string("(p1^2 + p2^2)/2 + z", 2)
    X = contact.hamiltonian_vf(H)
    rng = np.random.default_rng(1)
    for x in random_points(rng, 2, 20):
        got = lie_eta(X, x)
        assert np.allclose(got.aq, x.p, atol=1e-8)
        assert np.allclose(got.ap, 0.0, atol=1e-8)
        assert got.az == pytest.approx(-1.0, abs=1e-8)


def test_divergence_values():
    H = ScalarField.from_string("(p1^2 + p2^2)/2 + z", 2)
    X = contact.hamiltonian_vf(H)
    assert divergence(X, SAMPLE) == pytest.approx(-3.0, abs=1e-10)

    const_field = CallableVectorField(
        lambda x: VectorValue(np.array([2.0, -1.0]), np.array([0.5, 0.0]), 3.0), 2
    )
    assert divergence(const_field, SAMPLE) == pytest.approx(0.0, abs=1e-9)

    linear = SymbolicVectorField(
        [ex.parse("q1", 2)] + [ex.const(0.0)] * 4, 2
    )
    assert divergence(linear, SAMPLE) == pytest.approx(1.0, abs=1e-12)


def test_divergence_identity_random_hamiltonians():
    rng = np.random.default_rng(2)
    for text in ["p1*p2 + cos(q1) + z*q2", "sin(p1) + q1^2*z"]:
        H = ScalarField.from_string(text, 2)
        X = contact.hamiltonian_vf(H)
        for x in random_points(rng, 2, 30):
            dz = H.gradient(x).az
            assert divergence(X, x) + 3.0 * dz == pytest.approx(0.0, abs=1e-8)


def test_product_field_gradient():
    g = ScalarField.from_string("q1*p2", 2)
    h = ScalarField.from_string("z + p1", 2)
    prod = ProductField(g, h)
    direct = ScalarField.from_string("(q1*p2)*(z + p1)", 2)
    rng = np.random.default_rng(3)
    for x in random_points(rng, 2, 20):
        assert prod.value(x) == pytest.approx(direct.value(x), rel=1e-14)
        assert np.allclose(
            prod.gradient(x).to_array(), direct.gradient(x).to_array(), rtol=1e-12, atol=1e-12
        )


def test_fd_jacobian_matches_symbolic():
    comps = [ex.parse(t, 2) for t in ["q1*p1", "sin(q2)", "p2^2", "z*q1", "p1 + z"]]
    sym = SymbolicVectorField(comps, 2)
    num = CallableVectorField(sym.value, 2)
    rng = np.random.default_rng(4)
    for x in random_points(rng, 2, 10):
        assert np.allclose(sym.jacobian(x), num.jacobian(x), rtol=1e-6, atol=1e-6)
