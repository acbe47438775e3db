import math

import numpy as np
import pytest

from zakharov import (
    DomainSpec,
    Field,
    ModelParams,
    build_operators,
    energy,
    energy_identity_gap,
    dilate,
    fibering_project,
    gradient,
    hess_matrix,
    hess_vec,
    nehari_residual,
    measure,
)
from zakharov.energy import FUNCTIONALS

from conftest import random_smooth_fields

PI = math.pi

# frozen oracle: 2e6-point trapezoid evaluation of the exponential
# energy at u = sin(x), kappa = 3.5, omega^2 = 1 on (0, pi)
SIN_ZAKHAROV_ENERGY = 0.7734232815245942


def _params(functional):
    return ModelParams(3.5, 1.0, functional)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.0, "taylor3")


def test_energy_oracle_sin(ops_1d_512):
    x = ops_1d_512.spec.axis_nodes(0)
    u = Field(ops_1d_512.spec, np.sin(x))
    e = energy(u, _params("zakharov"), ops_1d_512)
    assert abs(e - SIN_ZAKHAROV_ENERGY) <= 5e-5


def test_energy_approx1_sin_analytic(ops_1d_512):
    # E1(sin) = 1/2*(pi/2) + w2/2*(pi/2) - k/4*(3 pi/8) at k=1, w2=1
    x = ops_1d_512.spec.axis_nodes(0)
    u = Field(ops_1d_512.spec, np.sin(x))
    e = energy(u, ModelParams(1.0, 1.0, "approx1"), ops_1d_512)
    exact = PI / 2 - 3 * PI / 32
    assert abs(e - exact) <= 1e-4


def test_energy_approx2_sin_analytic(ops_1d_512):
    # adds k/12 * int cos^6 = k/12 * 5 pi/16
    x = ops_1d_512.spec.axis_nodes(0)
    u = Field(ops_1d_512.spec, np.sin(x))
    e = energy(u, ModelParams(1.0, 1.0, "approx2"), ops_1d_512)
    exact = PI / 2 - 3 * PI / 32 + 5 * PI / 192
    assert abs(e - exact) <= 1e-4


@pytest.mark.parametrize("functional", FUNCTIONALS)
def test_gradient_matches_finite_differences(ops_1d_128, functional):
    p = _params(functional)
    rng = np.random.default_rng(3)
    eps = 1e-5
    for u in random_smooth_fields(ops_1d_128, 5, seed=hash(functional) % 2**31):
        v = rng.standard_normal(128)
        fd = (energy(Field(u.spec, u.values + eps * v), p, ops_1d_128)
              - energy(Field(u.spec, u.values - eps * v), p, ops_1d_128)) / (2 * eps)
        g = gradient(u, p, ops_1d_128)
        assert abs(fd - g @ v) <= 1e-6 * (abs(fd) + 1e-300)


@pytest.mark.parametrize("functional", FUNCTIONALS)
def test_hess_vec_matches_differenced_gradients(ops_1d_128, functional):
    p = _params(functional)
    rng = np.random.default_rng(4)
    eps = 1e-5
    for u in random_smooth_fields(ops_1d_128, 3, seed=11):
        v = rng.standard_normal(128)
        fd = (gradient(Field(u.spec, u.values + eps * v), p, ops_1d_128)
              - gradient(Field(u.spec, u.values - eps * v), p, ops_1d_128)) / (2 * eps)
        hv = hess_vec(u, v, p, ops_1d_128)
        assert np.linalg.norm(fd - hv) <= 1e-5 * (np.linalg.norm(fd) + 1e-300)


@pytest.mark.parametrize("functional", FUNCTIONALS)
def test_hessian_symmetry_and_assembly(ops_1d_128, functional):
    p = _params(functional)
    u = random_smooth_fields(ops_1d_128, 1, seed=5)[0]
    H = hess_matrix(u, p, ops_1d_128)
    asym = abs(H - H.T).max() / abs(H).max()
    assert asym <= 1e-10
    rng = np.random.default_rng(6)
    for _ in range(3):
        v = rng.standard_normal(128)
        hv = hess_vec(u, v, p, ops_1d_128)
        assert np.linalg.norm(H @ v - hv) <= 1e-12 * (np.linalg.norm(hv) + 1.0)


def test_hessian_2d_cross_terms(ops_2d_24):
    p = _params("zakharov")
    u = random_smooth_fields(ops_2d_24, 1, seed=7)[0]
    H = hess_matrix(u, p, ops_2d_24)
    rng = np.random.default_rng(8)
    eps = 1e-5
    v = rng.standard_normal(u.values.size)
    fd = (gradient(Field(u.spec, u.values + eps * v), p, ops_2d_24)
          - gradient(Field(u.spec, u.values - eps * v), p, ops_2d_24)) / (2 * eps)
    assert np.linalg.norm(H @ v - fd) <= 1e-5 * np.linalg.norm(fd)


def test_hessian_at_zero_is_linearization(ops_1d_128):
    # Phi'(0) = omega^2/2 for the exponential density, so the
    # linearization at zero is exactly A + omega^2 B (via G^T G = B)
    p = _params("zakharov")
    H = hess_matrix(Field(ops_1d_128.spec), p, ops_1d_128)
    ref = (ops_1d_128.w * (ops_1d_128.A + p.omega_sq * ops_1d_128.B)).tocsr()
    assert abs(H - ref).max() <= 1e-12 * abs(ref).max()


def test_nehari_residual_is_gradient_pairing(ops_1d_128):
    p = _params("zakharov")
    for u in random_smooth_fields(ops_1d_128, 3, seed=9):
        direct = gradient(u, p, ops_1d_128) @ u.values
        assert abs(nehari_residual(u, p, ops_1d_128) - direct) <= 1e-9 * (abs(direct) + 1)


def test_nehari_residual_zero_rejected(ops_1d_128):
    with pytest.raises(ValueError):
        nehari_residual(Field(ops_1d_128.spec), _params("zakharov"), ops_1d_128)


def test_fibering_closed_form_tu(ops_1d_512):
    x = ops_1d_512.spec.axis_nodes(0)
    u = Field(ops_1d_512.spec, np.sin(x))
    p = ModelParams(1.0, 1.0, "approx1")
    res = fibering_project(u, p, ops_1d_512)
    h2 = ops_1d_512.h[0] ** 2
    assert abs(res.t_root - math.sqrt(8.0 / 3.0)) <= max(1e-10, 10 * h2)
    # generic scanner agrees with the closed form
    scan = fibering_project(u, p, ops_1d_512, method="scan")
    assert abs(scan.t_root - res.t_root) <= 1e-10


def test_fibering_projection_iff_threshold(ops_1d_128):
    x = ops_1d_128.spec.axis_nodes(0)
    u = Field(ops_1d_128.spec, np.sin(x))
    below = fibering_project(u, ModelParams(2.0, 1.5, "zakharov"), ops_1d_128)
    assert below.t_root is None and below.h_value >= 0
    above = fibering_project(u, ModelParams(3.5, 1.0, "zakharov"), ops_1d_128)
    assert above.t_root is not None and above.h_value < 0
    # residual vanishes at the projection
    t = above.t_root
    res = nehari_residual(Field(u.spec, t * u.values),
                          ModelParams(3.5, 1.0, "zakharov"), ops_1d_128)
    assert abs(res) <= 1e-10


def test_fibering_residual_positive_when_absent(ops_1d_128):
    # below threshold the fibering derivative never crosses zero
    x = ops_1d_128.spec.axis_nodes(0)
    u = Field(ops_1d_128.spec, np.sin(x))
    p = ModelParams(2.0, 1.5, "zakharov")
    for t in (0.1, 0.5, 1.0, 3.0, 10.0):
        assert nehari_residual(Field(u.spec, t * u.values), p, ops_1d_128) > 0


def test_fibering_zero_rejected(ops_1d_128):
    with pytest.raises(ValueError):
        fibering_project(Field(ops_1d_128.spec), _params("zakharov"), ops_1d_128)
    with pytest.raises(ValueError):
        fibering_project(Field(ops_1d_128.spec, np.ones(128)),
                         _params("zakharov"), ops_1d_128, method="newton")


def test_energy_identity_gap_random_fields(ops_1d_128, ops_2d_24, ops_dir_128):
    p = ModelParams(2.3, 0.7, "zakharov")
    for ops in (ops_1d_128, ops_2d_24, ops_dir_128):
        for u in random_smooth_fields(ops, 5, seed=10):
            ident = energy_identity_gap(u, p, ops)
            e = energy(u, p, ops)
            assert ident.gap <= 1e-12 * (1.0 + abs(e))
            assert 0.0 < ident.value < 0.5 * p.kappa * measure(ops.spec)


def test_energy_identity_zakharov_only(ops_1d_128):
    u = random_smooth_fields(ops_1d_128, 1, seed=12)[0]
    with pytest.raises(ValueError):
        energy_identity_gap(u, ModelParams(1.0, 0.0, "approx1"), ops_1d_128)


def test_dilate_dyadic_exact(ops_1d_512):
    # sigma = 1/2 with this node layout is exact nodal resampling
    spec = ops_1d_512.spec
    x = spec.axis_nodes(0)
    u = Field(spec, np.where(x < PI / 2, np.sin(2 * x) ** 2, 0.0))
    d = dilate(u, 0.5)
    ref = np.where(x / 0.5 < PI, u_at(u, x / 0.5, spec), 0.0)
    assert np.abs(d.values - ref).max() <= 1e-12


def u_at(u, xq, spec):
    x = spec.axis_nodes(0)
    return np.interp(xq, np.concatenate(([0.0], x, [spec.extents[0]])),
                     np.concatenate(([0.0], u.values, [0.0])))


def test_dilate_validation(ops_1d_128):
    u = Field(ops_1d_128.spec, np.ones(128))
    with pytest.raises(ValueError):
        dilate(u, 0.0)
    with pytest.raises(ValueError):
        dilate(u, 1.5)


def test_dilate_2d(ops_2d_24):
    X, Y = ops_2d_24.spec.meshgrid()
    u = Field(ops_2d_24.spec, np.sin(X) * np.sin(Y))
    d = dilate(u, 0.5)
    assert d.values.shape == u.values.shape
    assert np.isfinite(d.values).all()
