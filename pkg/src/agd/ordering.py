"""The diffusion ordering network: scores which unabsorbed node decays next.

A small multi-head attention GNN over the original graph topology. Node
features are a type embedding concatenated with a positional encoding of the
node's own absorption step (a learned sentinel vector while unabsorbed), so
the distribution is conditioned on the absorption prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tape, Tensor
from .graphs import DiffusionTrajectory, GraphError, LabeledGraph, forward_trajectory

UNABSORBED = None


def positional_encoding(position: int, dim: int) -> np.ndarray:
    """Sinusoidal encoding of an absorption step index (1-based)."""
    if dim % 2 != 0:
        raise ValueError("positional encoding dimension must be even")
    if position < 1:
        raise ValueError("absorption positions are 1-based")
    out = np.empty(dim)
    for i in range(dim // 2):
        freq = position / (10000.0 ** (2.0 * i / dim))
        out[2 * i] = math.sin(freq)
        out[2 * i + 1] = math.cos(freq)
    return out


@dataclass
class OrderingConfig:
    num_node_types: int
    layers: int = 3
    heads: int = 6
    hidden: int = 32          # per-head width; model width is heads * hidden
    embed_dim: int = 16
    pe_dim: int = 16
    leaky_slope: float = 0.2

    @property
    def model_dim(self) -> int:
        return self.heads * self.hidden

    def to_dict(self) -> dict:
        return asdict(self)


class OrderingNet:
    """q(ordering | graph) with a recurrent per-step categorical structure."""

    def __init__(self, config: OrderingConfig, params: dict[str, Parameter]):
        self.config = config
        self.params = params

    @classmethod
    def init(cls, config: OrderingConfig, rng: np.random.Generator) -> "OrderingNet":
        c = config
        fdim = c.embed_dim + c.pe_dim
        d = c.model_dim
        p: dict[str, Parameter] = {}

        def add(name, shape, fan_in):
            p[name] = Parameter(name, ad.uniform_init(rng, shape, fan_in))

        add("embed", (c.num_node_types, c.embed_dim), c.embed_dim)
        add("pe_unabsorbed", (c.pe_dim,), c.pe_dim)
        add("w_in", (fdim, d), fdim)
        add("b_in", (d,), fdim)
        for l in range(c.layers):
            for h in range(c.heads):
                add(f"l{l}_h{h}_w", (d, c.hidden), d)
                add(f"l{l}_h{h}_asrc", (c.hidden,), c.hidden)
                add(f"l{l}_h{h}_adst", (c.hidden,), c.hidden)
        # no output bias: a uniform score offset cancels in the softmax
        add("w_out", (d,), d)
        return cls(c, p)

    # -- forward ------------------------------------------------------------

    def _get(self, tape: Tape | None, name: str) -> Tensor:
        if tape is None:
            return Tensor(self.params[name].data)
        return tape.watch(self.params[name])

    def node_scores(self, graph: LabeledGraph, prefix, tape: Tape | None = None) -> Tensor:
        """Per-node scalar scores given the absorbed prefix (in order)."""
        c = self.config
        n = graph.n
        position = {v: i + 1 for i, v in enumerate(prefix)}
        emb = ad.rows(self._get(tape, "embed"), list(graph.node_types))
        pe_rows = []
        for i in range(n):
            if i in position:
                pe_rows.append(Tensor(positional_encoding(position[i], c.pe_dim)))
            else:
                pe_rows.append(self._get(tape, "pe_unabsorbed"))
        x = ad.concat([emb, ad.stack(pe_rows)], axis=1)
        h = ad.add(ad.matmul(x, self._get(tape, "w_in")), self._get(tape, "b_in"))

        nbrs = [sorted(set(graph.neighbors(i)) | {i}) for i in range(n)]
        for l in range(c.layers):
            head_parts = []   # head_parts[h][i]
            for hd in range(c.heads):
                wh = ad.matmul(h, self._get(tape, f"l{l}_h{hd}_w"))
                s = ad.matmul(wh, self._get(tape, f"l{l}_h{hd}_asrc"))
                r = ad.matmul(wh, self._get(tape, f"l{l}_h{hd}_adst"))
                outs = []
                for i in range(n):
                    nb = nbrs[i]
                    logits = ad.leaky_relu(ad.add(ad.pick(s, i), ad.take(r, nb)),
                                           slope=c.leaky_slope)
                    alpha = ad.softmax(logits)
                    msgs = ad.rows(wh, nb)
                    outs.append(ad.tsum(ad.mul(ad.reshape(alpha, (len(nb), 1)), msgs), axis=0))
                head_parts.append(outs)
            merged = [ad.concat([head_parts[hd][i] for hd in range(c.heads)])
                      for i in range(n)]
            h = ad.add(ad.relu(ad.stack(merged)), h)   # residual connection
        return ad.matmul(h, self._get(tape, "w_out"))

    def _step_log_probs(self, scores: Tensor, unabsorbed: list[int]) -> Tensor:
        sel = ad.take(scores, unabsorbed)
        return ad.sub(sel, ad.logsumexp(sel))

    # -- public operations ----------------------------------------------------

    def step_distribution(self, graph: LabeledGraph, prefix) -> np.ndarray:
        """Probabilities over all nodes; absorbed ones get exactly zero."""
        prefix = list(prefix)
        if len(set(prefix)) != len(prefix) or any(not 0 <= v < graph.n for v in prefix):
            raise GraphError("prefix must contain distinct in-range node ids")
        unabsorbed = [i for i in range(graph.n) if i not in set(prefix)]
        if not unabsorbed:
            raise GraphError("all nodes are already absorbed")
        scores = self.node_scores(graph, prefix)
        logp = self._step_log_probs(scores, unabsorbed).data
        out = np.zeros(graph.n)
        out[unabsorbed] = np.exp(logp)
        return out

    def sample_ordering(self, graph: LabeledGraph,
                        rng: np.random.Generator) -> DiffusionTrajectory:
        """Draw a full absorption ordering; records per-step log q and weights."""
        ordering: list[int] = []
        step_log_probs: list[float] = []
        step_weights: list[dict[int, float]] = []
        remaining = list(range(graph.n))
        for _ in range(graph.n):
            scores = self.node_scores(graph, ordering)
            logp = self._step_log_probs(scores, remaining).data
            probs = np.exp(logp)
            step_weights.append({v: float(p) for v, p in zip(remaining, probs)})
            idx = int(rng.choice(len(remaining), p=probs / probs.sum()))
            ordering.append(remaining[idx])
            step_log_probs.append(float(logp[idx]))
            remaining.pop(idx)
        return forward_trajectory(graph, ordering, tuple(step_log_probs),
                                  tuple(step_weights))

    def ordering_log_prob(self, graph: LabeledGraph, ordering,
                          tape: Tape | None = None) -> Tensor:
        """log q(ordering | graph), differentiable when a tape is given."""
        ordering = [int(v) for v in ordering]
        if sorted(ordering) != list(range(graph.n)):
            raise GraphError("ordering is not a permutation of the node ids")
        total = Tensor(0.0)
        remaining = list(range(graph.n))
        for t, v in enumerate(ordering):
            scores = self.node_scores(graph, ordering[:t], tape)
            logp = self._step_log_probs(scores, remaining)
            total = ad.add(total, ad.pick(logp, remaining.index(v)))
            remaining.remove(v)
        return total
