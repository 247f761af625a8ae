"""Adam optimizer over named parameters, plus the on-disk checkpoint format.

Checkpoint layout (JSON, sorted keys, one file):
  {
    "format_version": 1,
    "config": {...},                          # free-form model configuration
    "params": {name: {"shape": [...], "data": [row-major float64 ...]}},
    "optimizers": {label: {"lr": ..., "beta1": ..., "beta2": ..., "eps": ...,
                           "step": ..., "m": {name: [...]}, "v": {name: [...]}}}
  }
Python's JSON float encoding is shortest-round-trip, so values survive
save/load bit-exactly and reruns produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, ShapeError


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Parameter], grads: dict[str, np.ndarray],
              state: AdamState) -> dict[str, Parameter]:
    """One bias-corrected Adam update, applied in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


# ---------------------------------------------------------------------------
# checkpoint IO
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def save_checkpoint(path, params: dict[str, Parameter],
                    optimizers: dict[str, AdamState] | None = None,
                    config: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": config or {},
        "params": {
            name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in params.items()
        },
        "optimizers": {
            label: {
                "lr": st.lr, "beta1": st.beta1, "beta2": st.beta2, "eps": st.eps,
                "step": st.step,
                "m": {n: a.reshape(-1).tolist() for n, a in st.m.items()},
                "v": {n: a.reshape(-1).tolist() for n, a in st.v.items()},
            }
            for label, st in (optimizers or {}).items()
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path):
    """Returns (params, optimizers, config)."""
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version}")
    params = {}
    for name, entry in doc["params"].items():
        shape = tuple(entry["shape"])
        params[name] = Parameter(name, np.array(entry["data"], dtype=np.float64).reshape(shape))
    optimizers = {}
    for label, st in doc.get("optimizers", {}).items():
        state = AdamState(lr=st["lr"], beta1=st["beta1"], beta2=st["beta2"],
                          eps=st["eps"], step=st["step"])
        for n, flat in st["m"].items():
            state.m[n] = np.array(flat, dtype=np.float64).reshape(params[n].data.shape)
        for n, flat in st["v"].items():
            state.v[n] = np.array(flat, dtype=np.float64).reshape(params[n].data.shape)
        optimizers[label] = state
    return params, optimizers, doc.get("config", {})
