import numpy as np
import pytest

from pmelab.dataset import build_dataset
from pmelab.errors import ContractError, IntegrityError
from pmelab.metrics import nmse
from pmelab.neuralnet import Mlp, TrainConfig, mlp_init
from pmelab.nlpme import (
    NlpmeModel,
    load_nlpme,
    nlpme_decode,
    nlpme_encode,
    nlpme_geometry,
    nlpme_reconstruct,
    save_nlpme,
    train_nlpme,
)
from pmelab.pme import fit_pme, pme_encode, pme_reconstruct_geometry
from pmelab.shapegen import GeneratorConfig, default_config, generate_geometry, geometry, validity_check
from pmelab.surrogate import SurrogateModel, train_surrogate

LIN = TrainConfig(max_epochs=400, batch_size=64, lr_initial=0.01, plateau_patience=20,
                  early_stop_patience=100, min_improvement=0.0, dtype="float64")
SMALL = TrainConfig(max_epochs=40, batch_size=32, lr_initial=3e-3, plateau_patience=10, early_stop_patience=30)


@pytest.fixture(scope="module")
def affine_setup():
    from conftest import affine_dataset

    data, _ = affine_dataset()
    return data, train_surrogate(data, LIN, hidden=[])


@pytest.fixture(scope="module")
def wing(small_cfg):
    data = build_dataset(small_cfg, 160)
    sur = train_surrogate(data, SMALL.with_(max_epochs=60), hidden=[32, 64])
    before = sur.network.checksum()
    model = train_nlpme(data, sur, 3, SMALL, [32, 16], [16])
    return data, sur, model, before


def test_surrogate_untouched_by_training(wing):
    _, sur, model, before = wing
    assert sur.network.checksum() == before == model.surrogate_checksum


def test_requires_frozen_surrogate_and_valid_N(affine_setup):
    data, sur = affine_setup
    loose = SurrogateModel(network=mlp_init([data.M, data.n_g], ["linear"]), stats=data.stats)
    with pytest.raises(ContractError):
        train_nlpme(data, loose, 2, SMALL)
    for N in (0, data.M):
        with pytest.raises(ContractError):
            train_nlpme(data, sur, N, SMALL)


def test_linear_case_close_to_pme(affine_setup):
    data, sur = affine_setup
    N = data.M - 1
    cfg = TrainConfig(max_epochs=50, batch_size=32, lr_initial=3e-3, plateau_patience=20,
                      early_stop_patience=60, dtype="float64")
    model = train_nlpme(data, sur, N, cfg, [32, 32], [16])
    pme = fit_pme(data.D, data.U)
    eps_pme = nmse(data.D, pme_reconstruct_geometry(pme, pme_encode(pme, data.D, N)))
    assert nmse(data.D, nlpme_reconstruct(model, data.D)[0]) <= 2 * eps_pme


def test_deterministic(affine_setup):
    data, sur = affine_setup
    cfg = SMALL.with_(max_epochs=3)
    a = train_nlpme(data, sur, 2, cfg, [8], [8])
    b = train_nlpme(data, sur, 2, cfg, [8], [8])
    assert a.history.loss == b.history.loss
    assert a.network.checksum() == b.network.checksum()


def test_encode_properties(wing):
    data, _, model, _ = wing
    z = nlpme_encode(model, data.D[:5])
    assert z.shape == (5, 3)
    np.testing.assert_array_equal(nlpme_encode(model, data.D[2]), nlpme_encode(model, data.D[2]))
    singles = np.array([nlpme_encode(model, d) for d in data.D[:5]])
    np.testing.assert_allclose(z, singles, rtol=1e-5, atol=1e-6)
    assert not np.allclose(z[0], z[1])
    with pytest.raises(ContractError):
        nlpme_encode(model, np.zeros(7))


def test_decode_in_open_box(wing):
    data, _, model, _ = wing
    z = np.random.default_rng(0).standard_normal((200, 3)) * 1e4
    u = nlpme_decode(model, z)
    assert np.all((u > 0) & (u < 1))
    with pytest.raises(ContractError):
        nlpme_decode(model, np.zeros(4))


def test_zero_decoder_gives_half():
    dec = mlp_init([2, 4, 3], ["gelu", "sigmoid"], seed=0)
    dec.set_params([np.zeros_like(p) for p in dec.params()])
    enc = mlp_init([5, 2], ["linear"], seed=0)
    net = Mlp(enc.widths + dec.widths[1:], enc.activations + dec.activations,
              enc.weights + dec.weights, enc.biases + dec.biases)
    model = NlpmeModel(network=net, n_encoder_layers=1, surrogate=None, N=2, stats=None, surrogate_checksum="")
    np.testing.assert_array_equal(nlpme_decode(model, np.zeros(2)), np.full(3, 0.5))


def test_decoded_designs_valid(wing, small_cfg):
    data, _, model, _ = wing
    g0 = geometry(small_cfg.u_base, small_cfg)
    _, U_hat = nlpme_reconstruct(model, data.D)
    valid = [generate_geometry(u, small_cfg, g0).valid for u in U_hat]
    assert np.mean(valid) >= 0.99


def test_generator_path_identity(wing, small_cfg):
    data, _, model, _ = wing
    d_hat, u_hat = nlpme_reconstruct(model, data.D[:4], "generator", small_cfg)
    g0 = geometry(small_cfg.u_base, small_cfg)
    for dh, u in zip(d_hat, u_hat):
        np.testing.assert_array_equal(dh + g0, generate_geometry(u, small_cfg, g0).g)
    with pytest.raises(Exception, match="generator configuration"):
        nlpme_reconstruct(model, data.D[:2], "generator")


def translation_config():
    """Default wing with only leading-edge x/z offsets free: G is affine in u."""
    base = default_config(pts_per_section=12, n_span=6)
    active = np.zeros(30, dtype=bool)
    active[[14, 24, 26]] = True  # mid le_x, tip le_x, tip le_z
    return GeneratorConfig(3, 12, 6, base.base, base.lower, base.upper, active)


def test_paths_agree_with_exact_surrogate():
    cfg = translation_config()
    data = build_dataset(cfg, 32)
    g0 = geometry(cfg.u_base, cfg)
    ub = cfg.u_base
    B = np.column_stack([geometry(ub + 0.1 * e, cfg) - g0 for e in np.eye(cfg.M)]) / 0.1
    W = B.T / data.stats.std
    b = (-(B @ ub) - data.stats.mean) / data.stats.std
    sur = SurrogateModel(network=Mlp([cfg.M, cfg.n_g], ["linear"], [W], [b]), stats=data.stats).freeze()
    net = mlp_init([cfg.n_g, 2, cfg.M], ["linear", "sigmoid"], dtype=np.float64)
    model = NlpmeModel(net, 1, sur, 2, data.stats, sur.checksum)
    via_s = nlpme_geometry(model, data.U, "surrogate")
    via_g = nlpme_geometry(model, data.U, "generator", cfg)
    np.testing.assert_allclose(via_s, via_g, atol=1e-12)
    np.testing.assert_allclose(via_g, data.D, atol=1e-14)


def test_consistency_between_paths(wing, small_cfg):
    data, _, model, _ = wing
    eps_s = nmse(data.D, nlpme_reconstruct(model, data.D, "surrogate")[0])
    eps_g = nmse(data.D, nlpme_reconstruct(model, data.D, "generator", small_cfg)[0])
    assert np.isfinite(eps_s) and np.isfinite(eps_g)


def test_bundle_round_trip(wing, tmp_path):
    data, sur, model, _ = wing
    save_nlpme(model, tmp_path / "m", {"config_hash": "x"})
    back = load_nlpme(tmp_path / "m", sur)
    np.testing.assert_array_equal(nlpme_encode(back, data.D), nlpme_encode(model, data.D))
    other = train_surrogate(data, SMALL.with_(max_epochs=2), hidden=[8], seed=5)
    with pytest.raises(IntegrityError):
        load_nlpme(tmp_path / "m", other)
