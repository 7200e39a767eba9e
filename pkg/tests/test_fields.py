import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cblab.fields import (
    BASE_SHIFT,
    BUILTIN_FIELDS,
    AtomisticDeformation,
    ConnectionRule,
    ScaledField,
    builtin_field,
    dirder,
    dirder_eps,
    dirder_tuples,
    fd,
    fd_tuples,
    homogeneous,
    recover,
    sample,
    sup_norms,
)
from cblab.lattice import MultiIndex, PeriodicCell, neg, range_from_cutoff, sim


def reference_range(d):
    return range_from_cutoff(np.eye(d), (np.zeros(d), np.array(BASE_SHIFT[:d])), 1.45)


def central(fn, x, h=1e-5):
    cols = []
    for j in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[j] = h
        cols.append((fn(x + e) - fn(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


@pytest.mark.parametrize("name", BUILTIN_FIELDS)
@pytest.mark.parametrize("d", [1, 2, 3])
def test_derivatives_match_central_differences(name, d):
    f = builtin_field(name, d, 0.05)
    x = np.random.default_rng(d).uniform(0, 1, (100, d))
    for hi, lo in [("grad_U", "U"), ("hess_U", "grad_U"), ("d3_U", "hess_U"),
                   ("grad_P", "P"), ("hess_P", "grad_P"), ("d3_P", "hess_P")]:
        exact = getattr(f, hi)(x)
        approx = central(getattr(f, lo), x)
        scale = max(np.abs(exact).max(), 1e-300)
        assert np.abs(exact - approx).max() <= 1e-5 * scale + 1e-12, (hi, lo)


def test_trig_generic_formula():
    f = builtin_field("trig_generic", 2, 0.05)
    x = np.array([0.3, 0.7])
    np.testing.assert_allclose(f.U(x), 0.05 * np.sin(2 * np.pi * x + [1, 2]), rtol=1e-15)
    np.testing.assert_allclose(f.P(x), [0.5, 0.25] + 0.05 * np.cos(2 * np.pi * x[[1, 0]] + [2, 4]), rtol=1e-15)
    g = builtin_field("trig_aligned", 2, 0.05)
    np.testing.assert_allclose(g.P(x), [0.5, 0.25] + 0.05 * np.cos(2 * np.pi * x + [2, 4]), rtol=1e-15)


def test_zero_amplitude_is_affine():
    x = np.random.default_rng(0).uniform(0, 1, (20, 2))
    a = builtin_field("affine", 2)
    t = builtin_field("trig_generic", 2, 0.0)
    for name in ("Y", "grad_Y", "P", "grad_P"):
        np.testing.assert_array_equal(getattr(a, name)(x), getattr(t, name)(x))
    norms = sup_norms(a)
    assert norms["hess_Y"] == 0 and norms["grad_P"] == 0


@pytest.mark.parametrize("name", BUILTIN_FIELDS)
def test_periodicity(name):
    f = builtin_field(name, 2)
    x = np.random.default_rng(1).uniform(0, 1, (50, 2))
    for eta in ([1, 0], [0, -1], [3, 2]):
        np.testing.assert_allclose(f.U(x + eta), f.U(x), atol=1e-14)
        np.testing.assert_allclose(f.P(x + eta), f.P(x), atol=1e-14)


@pytest.mark.parametrize("N", [2, 4, 16])
def test_scaling_identities(N):
    f = builtin_field("trig_generic", 2, 0.05)
    s = ScaledField(f, N)
    base = sup_norms(f, n=100)
    scaled = sup_norms(s, n=100, period=N)
    assert scaled["hess_Y"] == pytest.approx(base["hess_Y"] / N, rel=1e-10)
    assert scaled["d3_Y"] == pytest.approx(base["d3_Y"] / N**2, rel=1e-10)
    assert scaled["grad_P"] == pytest.approx(base["grad_P"] / N, rel=1e-10)
    x = np.random.default_rng(N).uniform(0, N, (30, 2))
    np.testing.assert_allclose(s.grad_Y(x), f.grad_Y(x / N), rtol=1e-15)
    eta = np.array([1, -2])
    np.testing.assert_allclose(s.Y(x + N * eta), s.Y(x) + N * eta, atol=1e-12)


def test_sample_homogeneous_classical():
    p = np.array([0.5, 0.25])
    y = sample(ScaledField(builtin_field("affine", 2), 4), "classical")
    xi = PeriodicCell(4, 2).sites()
    np.testing.assert_allclose(y.positions()[0], xi, atol=0)
    np.testing.assert_allclose(y.positions()[1], xi + p, atol=0)


def test_sample_homogeneous_centroid():
    y0, y1 = sample(ScaledField(builtin_field("affine", 2), 4), ConnectionRule.CENTROID).positions()
    xi = PeriodicCell(4, 2).sites()
    np.testing.assert_allclose(y1 - y0, np.broadcast_to([0.5, 0.25], y0.shape), atol=1e-15)
    np.testing.assert_allclose(0.5 * (y0 + y1), xi, atol=1e-15)


@pytest.mark.parametrize("rule", list(ConnectionRule))
def test_sample_periodicity_and_roundtrip(rule):
    N = 8
    s = ScaledField(builtin_field("trig_generic", 2), N)
    y = sample(s, rule)
    for alpha in (0, 1):
        for xi in ([0, 0], [3, 5], [7, 7]):
            xi = np.array(xi)
            np.testing.assert_allclose(y.y(alpha, xi + [N, 0]) - y.y(alpha, xi), [N, 0], atol=1e-12)
    Y, P = recover(y, rule)
    xi = PeriodicCell(N, 2).sites().astype(float)
    assert np.abs(Y - s.Y(xi)).max() <= 1e-12
    assert np.abs(P - s.P(xi)).max() <= 1e-12


def test_recover_homogeneous_and_zero():
    F = np.array([[1.1, 0.2], [0.0, 0.9]])
    y = homogeneous(3, F, [0.1, 0.0], [0.6, 0.3])
    Y, P = recover(y, "centroid")
    xi = PeriodicCell(3, 2).sites()
    np.testing.assert_allclose(Y, xi @ F.T + [0.35, 0.15], atol=1e-15)
    np.testing.assert_allclose(P, np.broadcast_to([0.5, 0.3], P.shape), atol=1e-15)
    cell = PeriodicCell(3, 2)
    zero = AtomisticDeformation(cell, np.eye(2), -np.stack([cell.sites(), cell.sites()]).astype(float))
    for rule in ConnectionRule:
        Y, P = recover(zero, rule)
        assert not Y.any() and not P.any()


def test_fd_homogeneous_and_reflection():
    rng = reference_range(2)
    F = np.array([[1.05, 0.1], [-0.05, 0.95]])
    p = np.array([0.3, -0.2])
    y = homogeneous(5, F, -p / 2, p / 2)
    g = fd_tuples(y, rng)
    expected = rng.rho @ F.T + (rng.beta - rng.alpha)[:, None] * p
    np.testing.assert_allclose(g, np.broadcast_to(expected, g.shape), atol=1e-14)
    image = rng.image_indices("neg")
    assert np.abs(g + g[:, image]).max() <= 1e-15


def test_fd_across_boundary_matches_unwrapped():
    N = 4
    s = ScaledField(builtin_field("trig_generic", 2), N)
    y = sample(s, "classical")
    for mi in [MultiIndex((1, 1), 0, 1), MultiIndex((-1, 0), 1, 0), MultiIndex((0, 1), 1, 1)]:
        for xi in ([3, 3], [0, 0], [3, 0]):
            xi = np.array(xi)
            # the field itself is the extended-grid reference
            ref = s.Y(xi + mi.rho) + mi.beta * s.P(xi + mi.rho) - s.Y(xi) - mi.alpha * s.P(xi)
            np.testing.assert_allclose(fd(y, xi, mi), ref, atol=1e-12)


def test_fd_tuples_agrees_with_fd():
    rng = reference_range(2)
    y = sample(ScaledField(builtin_field("trig_generic", 2), 4), "centroid")
    g = fd_tuples(y, rng)
    for site, xi in enumerate(PeriodicCell(4, 2).sites()):
        for k, mi in enumerate(rng):
            np.testing.assert_array_equal(g[site, k], fd(y, xi, mi))


def test_sampled_affine_fd_equals_dirder():
    f = builtin_field("affine", 2, B=np.array([[1.1, 0.1], [0.0, 0.9]]))
    rng = reference_range(2)
    g = fd_tuples(sample(ScaledField(f, 4), "classical"), rng)
    ref = dirder_tuples(f, np.zeros(2), rng)[0]
    assert np.abs(g - ref).max() <= 1e-14


def test_dirder_examples():
    f = builtin_field("trig_generic", 2)
    x = np.array([0.2, 0.9])
    same = MultiIndex((1, -1), 1, 1)
    np.testing.assert_allclose(dirder(f, x, same), f.grad_Y(x) @ [1, -1], rtol=1e-15)
    mi = MultiIndex((1, 0), 0, 1)
    aff = builtin_field("affine", 2)
    np.testing.assert_allclose(dirder(aff, x, mi), [1.5, 0.25], rtol=1e-15)
    np.testing.assert_allclose(dirder(f, x, neg(mi)), -dirder(f, x, mi), rtol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 0.5), st.sampled_from(list(reference_range(2))))
def test_dirder_eps_properties(x0, x1, eps, mi):
    f = builtin_field("trig_generic", 2)
    x = np.array([x0, x1])
    np.testing.assert_array_equal(dirder_eps(f, x, mi, 0.0), dirder(f, x, mi))
    np.testing.assert_allclose(dirder_eps(f, x, sim(mi), eps), -dirder_eps(f, x, mi, eps), atol=1e-15)
    if mi.alpha == mi.beta == 0:
        np.testing.assert_array_equal(dirder_eps(f, x, mi, eps), dirder(f, x, mi))
    rng = reference_range(2)
    np.testing.assert_allclose(dirder_tuples(f, x, rng, eps)[0, rng.index(mi)], dirder_eps(f, x, mi, eps), atol=1e-15)


def test_dirder_eps_rejects_negative():
    with pytest.raises(ValueError):
        dirder_eps(builtin_field("affine", 1), [0.0], MultiIndex((1,), 0, 0), -0.1)


def test_unknown_field():
    with pytest.raises(ValueError):
        builtin_field("gaussian", 2)


def test_without_shift():
    f = builtin_field("trig_generic", 2).without_shift()
    x = np.random.default_rng(3).uniform(0, 1, (5, 2))
    assert f.shift_free and not f.P(x).any() and not f.grad_P(x).any()
    np.testing.assert_array_equal(f.Y(x), builtin_field("trig_generic", 2).Y(x))
