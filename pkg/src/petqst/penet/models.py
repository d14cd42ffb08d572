"""Model configurations and builders for the three architecture families.

* ``mlp``: flat ``4**n`` record -> Linear/ReLU stack -> output.
* ``pemlp``: record encoded as an ``(N, N, 2)`` grid -> PELinear/ReLU stack
  -> PELinear to 2 channels -> read out in the ``4**n`` output layout. The
  purity variant adds one ReLU and a final Linear to a single neuron.
* ``combined``: the PE stack as above followed by dense hidden layers
  (optionally with dropout before the last Linear).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidConfig
from ..numerics import derive_rng
from .layers import Dropout, GridEncode, GridReadout, Linear, Module, PELinear, ReLU, Sequential

TASKS = ("tomography", "purity")
FAMILIES = ("mlp", "pemlp", "combined")


@dataclass(frozen=True)
class ModelConfig:
    task: str
    n_qubits: int
    family: str
    hidden: tuple[int, ...] = ()
    """Neurons per hidden Linear layer (``mlp``) or channels per hidden PELinear layer (others)."""
    dense: tuple[int, ...] = ()
    """Hidden Linear widths after the PE stack (``combined`` only)."""
    dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "dense", tuple(int(h) for h in self.dense))

    @property
    def input_size(self) -> int:
        return 4**self.n_qubits

    @property
    def output_size(self) -> int:
        return 4**self.n_qubits if self.task == "tomography" else 1

    def validate(self) -> None:
        if self.task not in TASKS:
            raise InvalidConfig(f"unknown task {self.task!r}")
        if self.family not in FAMILIES:
            raise InvalidConfig(f"unknown family {self.family!r}")
        if self.n_qubits < 1:
            raise InvalidConfig("n_qubits must be >= 1")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise InvalidConfig("at least one positive hidden size is required")
        if self.family == "combined" and (not self.dense or any(h < 1 for h in self.dense)):
            raise InvalidConfig("combined models need dense hidden sizes")
        if self.family != "combined" and self.dense:
            raise InvalidConfig("dense sizes apply to combined models only")
        if not 0.0 <= self.dropout < 1.0:
            raise InvalidConfig("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


def default_config(task: str, family: str, n_qubits: int) -> ModelConfig:
    """Architectures used for the reported experiments.

    Two qubits: MLP 32-32, PEMLP with one 64-channel hidden layer.
    Combined: three 32-channel PE layers and one 512-neuron Linear layer,
    with dropout 0.5 before the final Linear for purity.
    """
    if family == "mlp":
        cfg = ModelConfig(task, n_qubits, "mlp", hidden=(32, 32))
    elif family == "pemlp":
        cfg = ModelConfig(task, n_qubits, "pemlp", hidden=(64,))
    elif family == "combined":
        cfg = ModelConfig(
            task, n_qubits, "combined", hidden=(32, 32, 32), dense=(512,),
            dropout=0.5 if task == "purity" else 0.0,
        )
    else:
        raise InvalidConfig(f"unknown family {family!r}")
    cfg.validate()
    return cfg


@dataclass
class Model:
    config: ModelConfig
    net: Sequential
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def params(self):
        return self.net.params()

    def n_params(self) -> int:
        return self.net.n_params()

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.net.forward(x)

    def backward(self, grad: np.ndarray) -> None:
        self.net.backward(grad)

    def train(self, mode: bool = True) -> "Model":
        self.net.train(mode)
        return self

    def eval(self) -> "Model":
        return self.train(False)

    @property
    def uses_grid(self) -> bool:
        return self.config.family != "mlp"


def _pe_stack(c_in: int, hidden: tuple[int, ...], rng) -> list[Module]:
    layers: list[Module] = [GridEncode()]
    for width in hidden:
        layers += [PELinear(c_in, width, rng), ReLU()]
        c_in = width
    layers += [PELinear(c_in, 2, rng), GridReadout()]
    return layers


def build_model(cfg: ModelConfig, seed: int = 0) -> Model:
    cfg.validate()
    rng = derive_rng(seed, 0)
    drop_rng = derive_rng(seed, 1)
    size_in, size_out = cfg.input_size, cfg.output_size
    layers: list[Module] = []
    if cfg.family == "mlp":
        width = size_in
        for h in cfg.hidden:
            layers += [Linear(width, h, rng), ReLU()]
            width = h
        if cfg.dropout:
            layers.append(Dropout(cfg.dropout, drop_rng))
        layers.append(Linear(width, size_out, rng))
    elif cfg.family == "pemlp":
        layers = _pe_stack(2, cfg.hidden, rng)
        if cfg.task == "purity":
            layers.append(ReLU())
            if cfg.dropout:
                layers.append(Dropout(cfg.dropout, drop_rng))
            layers.append(Linear(size_in, 1, rng))
    else:
        layers = _pe_stack(2, cfg.hidden, rng)
        width = size_in
        for h in cfg.dense:
            layers += [Linear(width, h, rng), ReLU()]
            width = h
        if cfg.dropout:
            layers.append(Dropout(cfg.dropout, drop_rng))
        layers.append(Linear(width, size_out, rng))
    return Model(cfg, Sequential(*layers), seed)
