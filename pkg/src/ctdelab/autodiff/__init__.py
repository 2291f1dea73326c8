from . import tensor as ops
from .checkpoint import dumps, load, loads, save
from .gradcheck import gradcheck
from .nn import GRUCell, HyperLinear, Linear, MLP, Module, RecurrentAgentNet, one_hot, param
from .optim import Optimizer, adam_step, sgd_step, soft_update
from .tensor import Tensor, no_grad

__all__ = [
    "ops", "dumps", "load", "loads", "save", "gradcheck", "GRUCell", "HyperLinear", "Linear", "MLP",
    "Module", "RecurrentAgentNet", "one_hot", "param", "Optimizer", "adam_step", "sgd_step",
    "soft_update", "Tensor", "no_grad",
]
