"""Joint training: gradient ascent on the soft-label likelihood bound for the
denoiser, REINFORCE on validation rewards for the ordering network.

Per minibatch, M absorption trajectories are sampled per graph and T distinct
timesteps per trajectory; the loss is -(n/T) sum_t sum_k w_k log p(candidate k),
where the candidates are the nodes still unabsorbed at step t, the sampled
node is always retained, and the weights come from the ordering network's
step distribution (treated as constants, so only the denoiser receives
gradients). The reward for a trajectory is the same quantity evaluated
without gradients; lower is better, so the ordering network descends
(R - baseline) * grad log q.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import NonFiniteError, Tape
from .denoiser import DenoiserNet
from .graphs import (DiffusionTrajectory, LabeledGraph, absorb_node,
                     denoising_view, forward_trajectory, observed_step)
from .model import ModelBundle
from .optim import adam_step
from .ordering import OrderingNet


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 8
    val_batch_size: int = 8
    trajectories: int = 4            # M
    timesteps: int = 4               # T, clamped to n per graph
    lr_denoiser: float = 1e-4
    lr_ordering: float = 5e-4
    soft_label_top_k: int = 1
    baseline: bool = True
    baseline_decay: float = 0.9
    uniform_ordering: bool = False   # ablation: uniform orders, no REINFORCE
    eval_every: int = 0              # checkpoint every k denoiser steps (0: end only)
    select_samples: int = 0          # >0: pick the checkpoint with lowest mean MMD
    seed: int = 0

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory per graph")
        if self.timesteps < 1:
            raise ValueError("need at least one sampled timestep")
        if self.lr_denoiser <= 0 or self.lr_ordering <= 0:
            raise ValueError("learning rates must be positive")


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    epoch_rewards: list[float] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)
    selected_checkpoint: str | None = None
    wall_time: float = field(default=0.0, compare=False)


def _retained_candidates(weights: dict[int, float], sampled: int, top_k: int):
    """Sampled node first, then the highest-weight other candidates, weights
    renormalized over what is kept. Candidates tied with the cutoff weight are
    all retained, so the kept set depends on the weights alone (and therefore
    commutes with node relabeling)."""
    others = sorted((v for v in weights if v != sampled),
                    key=lambda v: (-weights[v], v))
    cutoff = max(top_k - 1, 0)
    if cutoff == 0 or not others:
        kept = [sampled]
    elif len(others) <= cutoff:
        kept = [sampled] + others
    else:
        threshold = weights[others[cutoff - 1]]
        kept = [sampled] + [v for v in others if weights[v] >= threshold]
    total = sum(weights[v] for v in kept)
    if total <= 0.0:
        return [(sampled, 1.0)]
    return [(v, weights[v] / total) for v in kept]


def denoiser_loss(graph: LabeledGraph, trajectory: DiffusionTrajectory,
                  timesteps, denoiser: DenoiserNet, top_k: int = 1, tape=None):
    """Negative soft-label log-likelihood over the sampled timesteps, scaled
    by n/T. Returns a Tensor when a tape is given, else a float."""
    timesteps = sorted(set(int(t) for t in timesteps))
    if not timesteps:
        raise ValueError("empty timestep set")
    n = trajectory.n
    if any(t < 1 or t > n for t in timesteps):
        raise ValueError("timesteps must lie in 1..n")
    total = None
    for t in timesteps:
        sampled = trajectory.ordering[t - 1]
        for cand, w in _retained_candidates(trajectory.step_weights[t - 1],
                                            sampled, top_k):
            if cand == sampled:
                state = trajectory.states[t]
            else:
                state = absorb_node(trajectory.states[t - 1], cand)
            view = denoising_view(state, cand)
            node_type, observed = observed_step(graph, state, cand)
            ll = denoiser.step_log_likelihood(view, node_type, observed, tape)
            term = ll * w
            total = term if total is None else total + term
    scaled = total * (-float(n) / len(timesteps))
    return scaled if tape is not None else scaled.item()


def compute_reward(graph: LabeledGraph, trajectory: DiffusionTrajectory,
                   timesteps, denoiser: DenoiserNet, top_k: int = 1) -> float:
    """The sampled negative log-likelihood bound, without gradients."""
    return denoiser_loss(graph, trajectory, timesteps, denoiser, top_k, tape=None)


def reinforce_gradient(ordering_net: OrderingNet, items, baseline: float,
                       trajectories_per_graph: int) -> dict[str, np.ndarray]:
    """(1/M) sum over (graph, ordering, reward) of (R - baseline) grad log q."""
    if not items:
        raise ValueError("no trajectories to learn from")
    acc: dict[str, np.ndarray] = {}
    for graph, ordering, reward in items:
        tape = Tape()
        for p in ordering_net.params.values():
            tape.register(p)
        logq = ordering_net.ordering_log_prob(graph, ordering, tape)
        grads = tape.gradients(logq)
        scale = (reward - baseline) / trajectories_per_graph
        for name, g in grads.items():
            if name in acc:
                acc[name] = acc[name] + scale * g
            else:
                acc[name] = scale * g
    return acc


def reinforce_update(ordering_net: OrderingNet, adam_state, items,
                     baseline: float, trajectories_per_graph: int) -> None:
    """Descend the expected reward: orderings with lower NLL gain probability."""
    grads = reinforce_gradient(ordering_net, items, baseline, trajectories_per_graph)
    adam_step(ordering_net.params, grads, adam_state)


def uniform_trajectory(graph: LabeledGraph, rng: np.random.Generator) -> DiffusionTrajectory:
    """Ablation ordering: uniform over the remaining nodes at every step."""
    ordering = [int(v) for v in rng.permutation(graph.n)]
    remaining = list(range(graph.n))
    log_probs, weights = [], []
    for v in ordering:
        w = 1.0 / len(remaining)
        weights.append({u: w for u in remaining})
        log_probs.append(math.log(w))
        remaining.remove(v)
    return forward_trajectory(graph, ordering, tuple(log_probs), tuple(weights))


def _sample_timesteps(n: int, t_cfg: int, rng: np.random.Generator) -> list[int]:
    k = min(t_cfg, n)
    return sorted(int(t) + 1 for t in rng.choice(n, size=k, replace=False))


def _minibatches(indices, size):
    for lo in range(0, len(indices), size):
        yield indices[lo:lo + size]


def fit(train_graphs, val_graphs, model: ModelBundle, config: TrainConfig,
        checkpoint_dir=None, log_path=None):
    """Alternating optimization per Algorithm 1; returns (model, TrainReport)."""
    if not train_graphs:
        raise ValueError("empty training set")
    if not val_graphs and not config.uniform_ordering:
        raise ValueError("empty validation set")
    started = time.time()
    rng = np.random.default_rng(config.seed)
    model.adam_denoiser.lr = config.lr_denoiser
    model.adam_ordering.lr = config.lr_ordering
    report = TrainReport()
    log_records = []
    checkpoints: list[str] = []
    baseline_value: float | None = None
    theta_steps = 0

    def sample_traj(graph):
        if config.uniform_ordering:
            return uniform_trajectory(graph, rng)
        return model.ordering.sample_ordering(graph, rng)

    def save_ckpt():
        if checkpoint_dir is None:
            return
        path = f"{checkpoint_dir}/checkpoint_{theta_steps:06d}.json"
        model.save(path)
        if path not in checkpoints:
            checkpoints.append(path)

    try:
        for epoch in range(config.epochs):
            order = rng.permutation(len(train_graphs))
            epoch_losses = []
            for batch in _minibatches(list(order), config.batch_size):
                grads_acc: dict[str, np.ndarray] = {}
                batch_loss = 0.0
                terms = 0
                for gi in batch:
                    graph = train_graphs[gi]
                    for _ in range(config.trajectories):
                        traj = sample_traj(graph)
                        ts = _sample_timesteps(graph.n, config.timesteps, rng)
                        tape = Tape()
                        for p in model.denoiser.params.values():
                            tape.register(p)
                        loss = denoiser_loss(graph, traj, ts, model.denoiser,
                                             config.soft_label_top_k, tape)
                        for name, g in tape.gradients(loss).items():
                            if name in grads_acc:
                                grads_acc[name] = grads_acc[name] + g
                            else:
                                grads_acc[name] = g
                        batch_loss += loss.item()
                        terms += 1
                scale = 1.0 / config.trajectories
                grads_acc = {k: v * scale for k, v in grads_acc.items()}
                adam_step(model.denoiser.params, grads_acc, model.adam_denoiser)
                theta_steps += 1
                mean_loss = batch_loss / terms
                epoch_losses.append(mean_loss)
                report.step_losses.append(mean_loss)
                log_records.append({"step": theta_steps, "loss": mean_loss,
                                    "reward": None, "timestamp": time.time()})
                if config.eval_every and theta_steps % config.eval_every == 0:
                    save_ckpt()

            epoch_rewards = []
            if not config.uniform_ordering:
                val_order = rng.permutation(len(val_graphs))
                for batch in _minibatches(list(val_order), config.val_batch_size):
                    items = []
                    rewards = []
                    for gi in batch:
                        graph = val_graphs[gi]
                        for _ in range(config.trajectories):
                            traj = sample_traj(graph)
                            ts = _sample_timesteps(graph.n, config.timesteps, rng)
                            r = compute_reward(graph, traj, ts, model.denoiser,
                                               config.soft_label_top_k)
                            items.append((graph, traj.ordering, r))
                            rewards.append(r)
                    mean_r = float(np.mean(rewards))
                    if config.baseline:
                        if baseline_value is None:
                            baseline_value = mean_r
                        else:
                            baseline_value = (config.baseline_decay * baseline_value
                                              + (1.0 - config.baseline_decay) * mean_r)
                        b = baseline_value
                    else:
                        b = 0.0
                    reinforce_update(model.ordering, model.adam_ordering, items,
                                     b, config.trajectories)
                    epoch_rewards.extend(rewards)
                    log_records.append({"step": theta_steps,
                                        "loss": None,
                                        "reward": mean_r,
                                        "timestamp": time.time()})
            report.epoch_losses.append(float(np.mean(epoch_losses)))
            report.epoch_rewards.append(float(np.mean(epoch_rewards))
                                        if epoch_rewards else None)
    except NonFiniteError as exc:
        raise TrainingDiverged(
            f"non-finite loss at denoiser step {theta_steps}: {exc}") from exc

    save_ckpt()
    if checkpoints:
        if config.select_samples > 0 and val_graphs:
            report.selected_checkpoint = select_model(
                checkpoints, val_graphs,
                MetricConfig(samples=config.select_samples, seed=config.seed))
        else:
            report.selected_checkpoint = checkpoints[-1]
    report.wall_time = time.time() - started
    if log_path is not None:
        with open(log_path, "w") as fh:
            for rec in log_records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return model, report


@dataclass
class MetricConfig:
    samples: int = 32
    seed: int = 0


def select_model(checkpoint_paths, val_graphs, metric_config: MetricConfig) -> str:
    """Checkpoint whose generated samples have the lowest mean MMD (degree,
    clustering, orbit) against the validation graphs."""
    from .generate import GenerationConfig, generate_batch
    from .metrics import average_mmd

    if not checkpoint_paths:
        raise ValueError("no checkpoints to select from")
    if len(checkpoint_paths) == 1:
        return checkpoint_paths[0]
    sizes = tuple(g.n for g in val_graphs)
    best_path, best_score = None, None
    for path in checkpoint_paths:
        bundle = ModelBundle.load(path)
        traces = generate_batch(bundle.denoiser,
                                GenerationConfig(count=metric_config.samples,
                                                 sizes=sizes,
                                                 seed=metric_config.seed))
        score = average_mmd([t.graph for t in traces], list(val_graphs))
        if best_score is None or score < best_score:
            best_path, best_score = path, score
    return best_path
