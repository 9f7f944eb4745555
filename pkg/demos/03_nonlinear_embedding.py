"""NLPME against PME on a coarse wing, with both geometry paths.

1. Train a surrogate u -> d and freeze it.
2. Train the encoder/decoder through the frozen surrogate at a small N.
3. Compare errors via the surrogate and via the true generator, and confirm
   the surrogate weights never moved.

Budgets are tiny so this runs in about a minute; the desk profile in the CLI
uses larger networks and a full N sweep.
"""

import numpy as np

from pmelab.dataset import build_dataset
from pmelab.metrics import nmse
from pmelab.neuralnet import TrainConfig
from pmelab.nlpme import nlpme_reconstruct, train_nlpme
from pmelab.pme import fit_pme, pme_encode, pme_reconstruct_geometry
from pmelab.shapegen import default_config
from pmelab.surrogate import surrogate_predict, train_surrogate

cfg = default_config(pts_per_section=16, n_span=10)
data = build_dataset(cfg, 512)

train = TrainConfig(max_epochs=60, batch_size=64, plateau_patience=10, early_stop_patience=20)
sur = train_surrogate(data, train, hidden=[64, 128])
print(f"surrogate nmse on the training set: {nmse(data.D, surrogate_predict(sur, data.U).d):.5f}")
checksum = sur.network.checksum()

pme = fit_pme(data.D, data.U)
for N in (2, 4):
    nl = train_nlpme(data, sur, N, train, encoder_hidden=[128, 64], decoder_hidden=[32])
    eps_pme = nmse(data.D, pme_reconstruct_geometry(pme, pme_encode(pme, data.D, N)))
    D_s, U_hat = nlpme_reconstruct(nl, data.D, "surrogate")
    D_g, _ = nlpme_reconstruct(nl, data.D, "generator", cfg)
    print(f"N={N}: PME {eps_pme:.4f}  NLPME via surrogate {nmse(data.D, D_s):.4f}"
          f"  via generator {nmse(data.D, D_g):.4f}  decoded u in [{U_hat.min():.3f}, {U_hat.max():.3f}]")

print("surrogate unchanged:", sur.network.checksum() == checksum)
