"""The training loop: successive augmented-Hamiltonian maximization.

Each iteration: draw a mini-batch, run the forward and backward sweeps,
assemble the Hamiltonian gradient F, then maximize the augmented HP layer
by layer in closed form. The augmentation weight eps acts as an inverse
step size: starting from the strategy's proposal eps_hat_k, eps is
escalated by factors of mu (eps_k = mu^j * eps_hat_k) until the sufficient
decrease condition

    J_Bk(w) - J_Bk(u) <= -eta * |||w - u|||

holds, where |||.||| is the summed squared layer norm. Accepted eps values
feed one of two proposal strategies:

    sqh: eps_hat_{k+1} = zeta * eps_k            (aggressive backtracking)
    ma:  eps_hat_{k+1} = zeta * eps_hat_k        if accepted at j = 0
         mean of the last min(k, omega)+1        otherwise
         accepted eps values

The ma strategy smooths eps under mini-batch noise and cuts line-search
cost; sqh probes for the smallest workable eps every iteration.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, class_weights
from .errors import InputError, LineSearchError
from .hamiltonian import hamiltonian_gap, update_params
from .metrics import accuracy, sparsity_pct
from .network import (Model, ParamSet, backward_sweep, batch_objective,
                      forward_sweep, hamiltonian_gradient, init_params,
                      regularization_total, terminal_loss, triple_norm_sq)
from .regularization import Regularizer

STRATEGIES = ("sqh", "ma")
EPS_MIN = 1e-8
DIAG_INCREMENTS = 6  # trailing parameter-change terms in the Delta-u sum


@dataclass
class TrainConfig:
    """Hyperparameters of one run. M = None means full batch."""

    seed: int = 0
    m_batch: int | None = None
    k_max: int = 100
    eps0: float = 1.0
    mu: float = 7.0
    eta: float = 1e-9
    strategy: str = "sqh"
    zeta: float = 0.01
    omega: int = 5
    reg: Regularizer = field(default_factory=Regularizer)
    eval_every: int = 0
    j_max: int = 60
    use_class_weights: bool = False
    keep_iterates: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise InputError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not self.mu > 1.0:
            raise InputError(f"mu must be > 1, got {self.mu}")
        if not self.eta > 0.0:
            raise InputError(f"eta must be > 0, got {self.eta}")
        if not self.eps0 > 0.0:
            raise InputError(f"eps0 must be > 0, got {self.eps0}")
        if not 0.0 < self.zeta <= 1.0:
            raise InputError(f"zeta must be in (0, 1], got {self.zeta}")
        if self.omega < 1:
            raise InputError(f"omega must be >= 1, got {self.omega}")
        if self.k_max < 1:
            raise InputError(f"k_max must be >= 1, got {self.k_max}")
        if self.j_max < 1:
            raise InputError(f"j_max must be >= 1, got {self.j_max}")
        if self.m_batch is not None and self.m_batch < 1:
            raise InputError(f"mini-batch size must be >= 1, got {self.m_batch}")
        if self.eval_every < 0:
            raise InputError(f"eval_every must be >= 0, got {self.eval_every}")


@dataclass
class EpsilonController:
    """Proposal state of the augmentation-weight strategy."""

    strategy: str
    zeta: float
    omega: int
    proposal: float  # eps_hat_k, the pending proposal
    accepted: deque = field(default_factory=deque)  # trailing accepted eps_i
    last_j: int = 0

    @classmethod
    def start(cls, config: TrainConfig) -> "EpsilonController":
        return cls(strategy=config.strategy, zeta=config.zeta,
                   omega=config.omega, proposal=config.eps0,
                   accepted=deque(maxlen=config.omega + 1))

    def record(self, eps_accepted: float, j: int):
        self.accepted.append(eps_accepted)
        self.last_j = j

    def advance(self, k: int):
        self.proposal = propose_epsilon(self, self.last_j, k)


def propose_epsilon(controller: EpsilonController, last_j: int, k: int) -> float:
    """eps_hat_{k+1} from the accepted history, floored at EPS_MIN."""
    if not controller.accepted:
        raise InputError("no accepted epsilon yet; history is empty")
    if controller.strategy == "sqh":
        proposal = controller.zeta * controller.accepted[-1]
    elif last_j == 0:
        proposal = controller.zeta * controller.proposal
    else:
        width = min(k, controller.omega) + 1
        window = list(controller.accepted)[-width:]
        proposal = float(np.mean(window))
    return max(proposal, EPS_MIN)


@dataclass
class IterationRecord:
    k: int
    epsilon: float
    j: int
    mb_loss_before: float
    mb_loss_after: float
    step_sq: float  # |||u^(k+1) - u^(k)|||
    ls_steps_cum: int
    wall_s: float
    full_loss: float | None = None
    train_acc: float | None = None
    test_acc: float | None = None
    sparsity: float | None = None


@dataclass
class RunLog:
    records: list[IterationRecord] = field(default_factory=list)
    iterates: list[ParamSet] | None = None  # u^(0)..u^(k_max) when retained


def sample_minibatch(rng: np.random.Generator, batch_indices: np.ndarray,
                     m_batch: int) -> np.ndarray:
    """M distinct indices, uniform over all size-M subsets, sorted."""
    batch_indices = np.asarray(batch_indices)
    n = batch_indices.shape[0]
    if not 1 <= m_batch <= n:
        raise InputError(f"mini-batch size {m_batch} out of range 1..{n}")
    if m_batch == n:
        return batch_indices.copy()
    pick = rng.choice(n, size=m_batch, replace=False)
    return batch_indices[np.sort(pick)]


def run_linesearch(objective, f, u: ParamSet, reg: Regularizer,
                   eps_hat: float, *, mu: float, eta: float, j_max: int,
                   iteration: int = 0, j_u: float | None = None):
    """Escalate eps until sufficient decrease holds.

    objective maps a ParamSet to the scalar J it is searched on; each
    evaluation of the acceptance condition costs exactly one call.
    Returns (w, eps, j, evals, j_u, j_w).
    """
    if j_u is None:
        j_u = objective(u)
    evals = 0
    for j in range(j_max + 1):
        eps = (mu ** j) * eps_hat
        w = update_params(f, u, reg, eps)
        j_w = objective(w)
        evals += 1
        if j_w - j_u <= -eta * triple_norm_sq(w, u):
            return w, eps, j, evals, j_u, j_w
    raise LineSearchError(iteration, eps, j_max, j_u, j_w)


def linesearch_step(model: Model, u: ParamSet, f, inputs: np.ndarray,
                    labels: np.ndarray, config: TrainConfig,
                    controller: EpsilonController,
                    weights: np.ndarray | None = None, iteration: int = 0,
                    j_u: float | None = None):
    """Line search on the mini-batch objective; sweeps for u already done."""
    def objective(candidate: ParamSet) -> float:
        return batch_objective(model, candidate, inputs, labels, config.reg,
                               weights)
    return run_linesearch(objective, f, u, config.reg, controller.proposal,
                          mu=config.mu, eta=config.eta, j_max=config.j_max,
                          iteration=iteration, j_u=j_u)


def train(config: TrainConfig, model: Model, dataset: Dataset,
          test_set: Dataset | None = None, params: ParamSet | None = None,
          on_iteration=None) -> tuple[ParamSet, RunLog]:
    """Run k_max training iterations; deterministic given (config, dataset).

    on_iteration, when given, is called with each finished
    IterationRecord (for streaming logs or progress display).
    """
    n = len(dataset)
    if n == 0:
        raise InputError("dataset is empty")
    m_batch = config.m_batch if config.m_batch is not None else n
    if not 1 <= m_batch <= n:
        raise InputError(f"mini-batch size {m_batch} out of range 1..{n}")

    init_ss, sample_ss = np.random.SeedSequence(config.seed).spawn(2)
    if params is None:
        params = init_params(model, init_ss)
    sampler = np.random.default_rng(sample_ss)
    controller = EpsilonController.start(config)
    weights = class_weights(dataset) if config.use_class_weights else None

    log = RunLog()
    if config.keep_iterates:
        log.iterates = [params.copy()]
    all_indices = np.arange(n)
    full_batch = m_batch == n
    ls_steps = 0
    t0 = time.perf_counter()
    u = params
    j_after = None  # carries J_Bk(u^{k+1}) to the next full-batch iteration

    for k in range(config.k_max):
        idx = sample_minibatch(sampler, all_indices, m_batch)
        xs, ys = dataset.inputs[idx], dataset.labels[idx]

        traj = forward_sweep(model, u, xs)
        loss_u, tg = terminal_loss(traj.outputs, ys, weights)
        j_u = loss_u + regularization_total(u, config.reg)
        adj = backward_sweep(model, u, traj, tg, batch_m=m_batch)
        f = hamiltonian_gradient(model, u, traj, adj)
        del traj, adj

        # In full-batch mode J_Bk(u^k) was already evaluated as last
        # iteration's J_Bk(u^{k+1}); reuse it so the monotonicity chain
        # compares bitwise-identical values.
        if full_batch and j_after is not None:
            j_u = j_after
        w, eps_k, j, evals, j_u, j_w = linesearch_step(
            model, u, f, xs, ys, config, controller, weights, iteration=k,
            j_u=j_u)
        ls_steps += evals
        controller.record(eps_k, j)
        controller.advance(k)
        step_sq = triple_norm_sq(w, u)
        u = w
        j_after = j_w if full_batch else None

        record = IterationRecord(
            k=k, epsilon=eps_k, j=j, mb_loss_before=j_u, mb_loss_after=j_w,
            step_sq=step_sq, ls_steps_cum=ls_steps,
            wall_s=time.perf_counter() - t0)
        if config.eval_every and (k + 1) % config.eval_every == 0:
            record.full_loss = batch_objective(
                model, u, dataset.inputs, dataset.labels, config.reg, weights)
            record.train_acc = accuracy(model, u, dataset)
            if test_set is not None:
                record.test_acc = accuracy(model, u, test_set)
            record.sparsity = sparsity_pct(u, config.reg.include_bias)
        log.records.append(record)
        if on_iteration is not None:
            on_iteration(record)
        if config.keep_iterates:
            log.iterates.append(u.copy())

    return u, log


def diagnostics(model: Model, iterates: list[ParamSet], dataset: Dataset,
                reg: Regularizer, eps_k: float,
                weights: np.ndarray | None = None) -> tuple[float, float]:
    """(Delta_h, Delta_u) for the newest iterate in `iterates`.

    Delta_h recomputes the FULL-batch Hamiltonian gradient at the previous
    iterate and measures how far the accepted step is from the exact
    closed-form maximizer; it is zero (to rounding) in full-batch mode.
    Delta_u sums the last six squared step norms, so at least seven
    retained iterates are required.
    """
    if len(iterates) < DIAG_INCREMENTS + 1:
        raise InputError(
            f"diagnostics needs at least {DIAG_INCREMENTS + 1} retained "
            f"iterates, got {len(iterates)}")
    u_prev, u_next = iterates[-2], iterates[-1]
    traj = forward_sweep(model, u_prev, dataset.inputs)
    _, tg = terminal_loss(traj.outputs, dataset.labels, weights)
    adj = backward_sweep(model, u_prev, traj, tg, batch_m=len(dataset))
    f = hamiltonian_gradient(model, u_prev, traj, adj)
    delta_h = hamiltonian_gap(f, u_next, u_prev, reg, eps_k)
    tail = iterates[-(DIAG_INCREMENTS + 1):]
    delta_u = sum(triple_norm_sq(b, a) for a, b in zip(tail, tail[1:]))
    return delta_h, delta_u
