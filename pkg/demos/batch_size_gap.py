"""How far mini-batch steps sit from the full-batch maximizer.

A full-batch iteration lands exactly on the maximizer of the augmented HP
built from the whole dataset; its gap is zero to rounding. A mini-batch
iteration maximizes a noisy HP instead, and the gap against the
full-batch maximizer grows as the batch shrinks. With no regularizer the
gap has a closed form, ||F_full - F_batch||^2 / (2 eps), i.e. it is the
gradient-noise energy at the accepted step size.
"""

import numpy as np

from pmptrain.data import synthetic_blobs
from pmptrain.hamiltonian import hamiltonian_gap
from pmptrain.network import (backward_sweep, build_model, forward_sweep,
                              hamiltonian_gradient, terminal_loss)
from pmptrain.regularization import Regularizer
from pmptrain.trainer import TrainConfig, train

ARCH = "fc out=16 act=tanh\nfc out=4 act=identity"
data = synthetic_blobs(seed=7, n_per_class=32, m=4, dim=8, separation=2.0)
model = build_model(ARCH, (8,))
reg = Regularizer("none")
K, TAIL = 60, 50


def tail_gaps(m_batch, seed):
    config = TrainConfig(seed=seed, m_batch=m_batch, k_max=K, mu=1.1,
                         strategy="ma", zeta=1.0, reg=reg,
                         keep_iterates=True)
    _, log = train(config, model, data)
    gaps = []
    for t in range(K - TAIL, K):
        u_prev, u_next = log.iterates[t], log.iterates[t + 1]
        traj = forward_sweep(model, u_prev, data.inputs)
        _, tg = terminal_loss(traj.outputs, data.labels)
        adj = backward_sweep(model, u_prev, traj, tg, batch_m=len(data))
        f = hamiltonian_gradient(model, u_prev, traj, adj)
        gaps.append(hamiltonian_gap(f, u_next, u_prev, reg,
                                    log.records[t].epsilon))
    return gaps


print(f"dataset: {len(data)} samples; gap averaged over last {TAIL} of "
      f"{K} iterations, 3 seeds\n")
print("batch size   mean gap     max gap")
for m_batch in (8, 16, 32, 64, None):
    pooled = []
    for seed in range(3):
        pooled.extend(tail_gaps(m_batch, seed))
    label = "full" if m_batch is None else str(m_batch)
    print(f"{label:>10}   {np.mean(pooled):.3e}   {np.max(pooled):.3e}")
