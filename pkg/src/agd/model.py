"""Bundling of the ordering network, the denoising network and optimizer
state into one checkpointable object."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Parameter
from .denoiser import DenoiserConfig, DenoiserNet
from .optim import AdamState, load_checkpoint, save_checkpoint
from .ordering import OrderingConfig, OrderingNet


@dataclass
class ModelBundle:
    ordering: OrderingNet
    denoiser: DenoiserNet
    adam_denoiser: AdamState
    adam_ordering: AdamState

    @classmethod
    def init(cls, ordering_config: OrderingConfig, denoiser_config: DenoiserConfig,
             rng: np.random.Generator, lr_denoiser: float = 1e-4,
             lr_ordering: float = 5e-4) -> "ModelBundle":
        return cls(
            ordering=OrderingNet.init(ordering_config, rng),
            denoiser=DenoiserNet.init(denoiser_config, rng),
            adam_denoiser=AdamState(lr=lr_denoiser),
            adam_ordering=AdamState(lr=lr_ordering),
        )

    def save(self, path) -> None:
        params = {}
        for k, p in self.ordering.params.items():
            params[f"ordering.{k}"] = Parameter(f"ordering.{k}", p.data)
        for k, p in self.denoiser.params.items():
            params[f"denoiser.{k}"] = Parameter(f"denoiser.{k}", p.data)

        def prefixed(state: AdamState, prefix: str) -> AdamState:
            out = AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2,
                            eps=state.eps, step=state.step)
            out.m = {f"{prefix}.{k}": v for k, v in state.m.items()}
            out.v = {f"{prefix}.{k}": v for k, v in state.v.items()}
            return out

        save_checkpoint(path, params,
                        optimizers={"denoiser": prefixed(self.adam_denoiser, "denoiser"),
                                    "ordering": prefixed(self.adam_ordering, "ordering")},
                        config={"ordering": self.ordering.config.to_dict(),
                                "denoiser": self.denoiser.config.to_dict()})

    @classmethod
    def load(cls, path) -> "ModelBundle":
        params, optimizers, config = load_checkpoint(path)
        ordering_config = OrderingConfig(**config["ordering"])
        denoiser_config = DenoiserConfig(**config["denoiser"])

        def split(prefix: str) -> dict[str, Parameter]:
            out = {}
            for name, p in params.items():
                if name.startswith(prefix + "."):
                    local = name[len(prefix) + 1:]
                    out[local] = Parameter(local, p.data)
            return out

        def localized(state: AdamState, prefix: str) -> AdamState:
            out = AdamState(lr=state.lr, beta1=state.beta1, beta2=state.beta2,
                            eps=state.eps, step=state.step)
            out.m = {k[len(prefix) + 1:]: v for k, v in state.m.items()}
            out.v = {k[len(prefix) + 1:]: v for k, v in state.v.items()}
            return out

        return cls(
            ordering=OrderingNet(ordering_config, split("ordering")),
            denoiser=DenoiserNet(denoiser_config, split("denoiser")),
            adam_denoiser=localized(optimizers["denoiser"], "denoiser"),
            adam_ordering=localized(optimizers["ordering"], "ordering"),
        )
