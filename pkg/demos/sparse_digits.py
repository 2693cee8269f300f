"""Sparse training: an L0 penalty handled exactly, no pruning heuristics.

The layer update is a closed-form maximizer of the augmented HP function.
With the l2l0 regularizer that maximizer is a hard-thresholding step, so
parameters are set to exact binary zero during training whenever keeping
them does not pay for their penalty. Sparsity below is therefore a count
of true zeros, not of values under some cutoff, and it rises while test
accuracy stays flat.
"""

from pmptrain.digits import synthetic_digits
from pmptrain.metrics import accuracy, sparsity_pct
from pmptrain.network import build_model
from pmptrain.regularization import Regularizer
from pmptrain.trainer import TrainConfig, train

ARCH = """
conv out=6 k=5 stride=1 pad=2 act=tanh pool=avg2
conv out=16 k=5 stride=1 pad=0 act=tanh pool=avg2
fc out=120 act=tanh
fc out=84 act=tanh
fc out=10 act=identity
"""

train_set = synthetic_digits(seed=3, n_per_class=60, split="train")
test_set = synthetic_digits(seed=4, n_per_class=40, split="test")
model = build_model(ARCH, (1, 28, 28))

for rho in (0.0, 5e-5, 1e-4, 2e-4):
    reg = (Regularizer("none") if rho == 0.0
           else Regularizer("l2l0", alpha=0.8, rho=rho))
    config = TrainConfig(seed=11, k_max=150, reg=reg)
    params, log = train(config, model, train_set)
    sp = sparsity_pct(params, include_bias=True)
    acc = accuracy(model, params, test_set)
    zeros = sum(int((w == 0.0).sum() + (b == 0.0).sum())
                for w, b in params.blocks)
    print(f"rho={rho:<8g} sparsity={sp:6.2f}%  exact zeros={zeros:6d}  "
          f"test={acc:.2f}%")
