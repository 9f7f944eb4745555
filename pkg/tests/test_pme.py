import numpy as np
import pytest
from scipy import linalg

from pmelab.errors import ContractError, UndefinedMetricError
from pmelab.metrics import nmse
from pmelab.pme import (
    PmeWeights,
    fit_pme,
    load_pme,
    pme_backmap,
    pme_encode,
    pme_reconstruct_geometry,
    retained_variance,
    save_pme,
)


def test_hand_rank_one_case():
    D = np.array([[-1.0, 0.0], [1.0, 0.0]])
    U = np.array([[0.0], [2.0]])
    m = fit_pme(D, U)
    assert m.r == 1
    np.testing.assert_allclose(m.eigenvalues, [1.0])
    s = np.sign(m.Q[0, 0])  # fix the sign convention
    np.testing.assert_allclose(s * m.Q[:, 0], [1.0, 0.0])
    np.testing.assert_allclose(s * m.alpha_train[:, 0], [-1.0, 1.0])
    np.testing.assert_allclose(s * m.V[:, 0], [1.0])
    np.testing.assert_allclose(pme_reconstruct_geometry(m, [s * 1.0]), [1.0, 0.0])
    np.testing.assert_allclose(pme_backmap(m, [s * 1.0]), [2.0])


def brute_force(D, metric):
    Dc = D - D.mean(axis=0)
    Mh = np.sqrt(metric)
    C = (Mh[:, None] * (Dc.T @ Dc) * Mh[None, :]) / len(D)
    lam, E = linalg.eigh(C)
    return lam[::-1], E[:, ::-1] / Mh[:, None]


@pytest.mark.parametrize("S", [40, 12])  # covariance path and Gram path
def test_matches_dense_eigensolver(S):
    rng = np.random.default_rng(3)
    D = rng.standard_normal((S, 20))
    U = rng.uniform(size=(S, 5))
    G = rng.uniform(0.5, 2.0, 20)
    m = fit_pme(D, U, PmeWeights(G_diag=G, w_g=1.5))
    lam, Q = brute_force(D, 1.5 * G)
    np.testing.assert_allclose(m.eigenvalues, lam[: m.r], atol=1e-8)
    signs = np.sign(np.sum(m.Q * Q[:, : m.r], axis=0))
    np.testing.assert_allclose(m.Q * signs, Q[:, : m.r], atol=1e-6)


def test_metric_orthonormality():
    rng = np.random.default_rng(4)
    D = rng.standard_normal((30, 15))
    G = rng.uniform(0.5, 2.0, 15)
    m = fit_pme(D, rng.uniform(size=(30, 3)), PmeWeights(G_diag=G))
    np.testing.assert_allclose(m.Q.T @ (G[:, None] * m.Q), np.eye(m.n_stored), atol=1e-8)


def test_identical_samples_rank_zero():
    D = np.tile(np.arange(5.0), (6, 1))
    m = fit_pme(D, np.zeros((6, 2)))
    assert m.r == 0
    with pytest.raises(UndefinedMetricError):
        retained_variance(m, 0)


def test_encode_examples(affine):
    data, _ = affine
    m = fit_pme(data.D, data.U)
    np.testing.assert_allclose(pme_encode(m, m.d_mean), 0, atol=1e-12)
    e1 = pme_encode(m, m.d_mean + m.Q[:, 0])
    np.testing.assert_allclose(e1, np.eye(m.n_stored)[0], atol=1e-12)
    np.testing.assert_allclose(pme_encode(m, data.D), m.alpha_train, atol=1e-12)
    with pytest.raises(ContractError):
        pme_encode(m, np.zeros(3))


def test_full_rank_round_trip_and_backmap(affine):
    data, _ = affine
    m = fit_pme(data.D, data.U)
    assert m.r == 6
    d = data.D[17]
    d_hat = pme_reconstruct_geometry(m, pme_encode(m, d, 6))
    assert np.linalg.norm(d_hat - d) <= 1e-8 * np.linalg.norm(d)
    np.testing.assert_allclose(pme_backmap(m, pme_encode(m, data.D, 6)), data.U, atol=1e-6)
    np.testing.assert_allclose(pme_backmap(m, np.zeros(2)), m.u_mean)
    np.testing.assert_allclose(pme_reconstruct_geometry(m, np.zeros(3)), m.d_mean)


def test_backmap_clip_flags():
    rng = np.random.default_rng(5)
    m = fit_pme(rng.standard_normal((20, 8)), rng.uniform(size=(20, 3)))
    u, outside = pme_backmap(m, np.full(2, 50.0), clip=True)
    assert np.all((u >= 0) & (u <= 1))
    assert outside.any()


def test_variance_identity_and_monotone():
    rng = np.random.default_rng(6)
    D = rng.standard_normal((50, 12)) @ rng.standard_normal((12, 12))
    m = fit_pme(D, rng.uniform(size=(50, 4)))
    eps = [nmse(D, pme_reconstruct_geometry(m, m.alpha_train[:, :N])) for N in range(m.r + 1)]
    for N, e in enumerate(eps):
        np.testing.assert_allclose(e, 1 - retained_variance(m, N), atol=1e-8)
    assert np.all(np.diff(eps) <= 1e-12)
    assert retained_variance(m, m.r) == pytest.approx(1.0)
    assert retained_variance(m, 0) == 0.0


def test_sign_flip_invariance(affine):
    data, _ = affine
    m = fit_pme(data.D, data.U)
    a = pme_encode(m, data.D[:5], 3)
    ref_d, ref_u = pme_reconstruct_geometry(m, a), pme_backmap(m, a)
    m.Q[:, 1] *= -1
    m.V[:, 1] *= -1
    a2 = pme_encode(m, data.D[:5], 3)
    np.testing.assert_allclose(pme_reconstruct_geometry(m, a2), ref_d, atol=1e-12)
    np.testing.assert_allclose(pme_backmap(m, a2), ref_u, atol=1e-12)


def test_rank_error(affine):
    data, _ = affine
    m = fit_pme(data.D, data.U)
    with pytest.raises(ContractError):
        pme_reconstruct_geometry(m, np.zeros(m.n_stored + 1))


def test_nonzero_parameter_weight_rejected():
    with pytest.raises(ContractError):
        PmeWeights(w_u=0.5).metric(4)


def test_bundle_round_trip(affine, tmp_path):
    data, _ = affine
    m = fit_pme(data.D, data.U)
    save_pme(m, tmp_path / "pme", comment="config_hash=x")
    back = load_pme(tmp_path / "pme")
    np.testing.assert_array_equal(pme_encode(back, data.D), pme_encode(m, data.D))
    np.testing.assert_array_equal(back.V, m.V)
