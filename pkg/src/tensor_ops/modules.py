"""
Stateful layers built on the pure ops.

A module caches what its last forward call needs and hand-chains its own
backward. Gradients accumulate into ``Parameter.grad`` (summed over uses)
until ``zero_grad`` is called.
"""

from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from core.config import BATCH_NORM_PARAMS
from core.errors import ConfigurationError
from tensor_ops import functional as F
from tensor_ops.conv import conv2d_backward, conv2d_forward


class Parameter:
    """
    A trainable tensor and its accumulated gradient.

    Attributes:
        data: parameter values
        grad: gradient of the same shape, summed over all uses
    """

    def __init__(self, data: np.ndarray):
        self.data = np.asarray(data)
        self.grad = np.zeros_like(self.data)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.data.shape:
            raise ConfigurationError(
                f"gradient shape {grad.shape} does not match parameter {self.data.shape}"
            )
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter(shape={self.data.shape}, dtype={self.data.dtype})"


class Module:
    """Container with named parameters, buffers and child modules."""

    def __init__(self):
        self._params: Dict[str, Parameter] = {}
        self._buffers: Dict[str, np.ndarray] = {}
        self._children: Dict[str, "Module"] = {}

    def add_parameter(self, name: str, data: np.ndarray) -> Parameter:
        param = Parameter(data)
        self._params[name] = param
        return param

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, param in self._params.items():
            yield prefix + name, param
        for name, child in self._children.items():
            yield from child.named_parameters(prefix + name + ".")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, buf in self._buffers.items():
            yield prefix + name, buf
        for name, child in self._children.items():
            yield from child.named_buffers(prefix + name + ".")

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        """Set a buffer addressed by its dotted name."""
        head, _, rest = name.partition(".")
        if rest:
            self._children[head].set_buffer(rest, value)
        elif head in self._buffers:
            self._buffers[head] = np.asarray(value)
        else:
            raise KeyError(name)

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Flat name -> array mapping of parameters and buffers."""
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copy arrays into parameters/buffers, casting to their dtype."""
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        for name, param in params.items():
            param.data = np.asarray(state[name], dtype=param.data.dtype).reshape(param.shape).copy()
            param.zero_grad()
        for name, buf in buffers.items():
            self.set_buffer(name, np.asarray(state[name], dtype=buf.dtype).reshape(buf.shape).copy())

    def zero_grad(self) -> None:
        for _, param in self.named_parameters():
            param.zero_grad()

    def num_parameters(self) -> int:
        return int(sum(p.data.size for _, p in self.named_parameters()))


def he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int,
              dtype=np.float64) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d(Module):
    """Dense convolution with (k, k, C_in, C_out) weights."""

    def __init__(self, c_in: int, c_out: int, kernel_size: int, stride: int = 1,
                 padding: Optional[int] = None, bias: bool = False,
                 rng: Optional[np.random.Generator] = None, dtype=np.float64):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.stride = stride
        self.padding = kernel_size // 2 if padding is None else padding
        fan_in = kernel_size * kernel_size * c_in
        self.weight = self.add_parameter(
            "weight", he_normal(rng, (kernel_size, kernel_size, c_in, c_out), fan_in, dtype)
        )
        self.bias = self.add_parameter("bias", np.zeros(c_out, dtype=dtype)) if bias else None
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        bias = self.bias.data if self.bias is not None else None
        out, self._cache = conv2d_forward(x, self.weight.data, bias, self.stride, self.padding)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_x, grad_w, grad_b = conv2d_backward(grad_out, self._cache)
        self.weight.accumulate(grad_w)
        if self.bias is not None:
            self.bias.accumulate(grad_b)
        return grad_x


class BatchNorm(Module):
    """Batch normalization over axis 1 of rank-2 or rank-4 input."""

    def __init__(self, features: int, dtype=np.float64,
                 eps: float = BATCH_NORM_PARAMS["eps"],
                 momentum: float = BATCH_NORM_PARAMS["momentum"]):
        super().__init__()
        self.eps = eps
        self.momentum = momentum
        self.gamma = self.add_parameter("gamma", np.ones(features, dtype=dtype))
        self.beta = self.add_parameter("beta", np.zeros(features, dtype=dtype))
        self._buffers["running_mean"] = np.zeros(features, dtype=dtype)
        self._buffers["running_var"] = np.ones(features, dtype=dtype)
        self._cache = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        out, self._cache, (mean, var) = F.batch_norm_forward(
            x, self.gamma.data, self.beta.data,
            self._buffers["running_mean"], self._buffers["running_var"],
            training, self.eps, self.momentum,
        )
        self._buffers["running_mean"] = mean
        self._buffers["running_var"] = var
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_x, grad_gamma, grad_beta = F.batch_norm_backward(grad_out, self._cache)
        self.gamma.accumulate(grad_gamma)
        self.beta.accumulate(grad_beta)
        return grad_x


class Linear(Module):
    """Fully connected layer with (F_in, F_out) weights."""

    def __init__(self, f_in: int, f_out: int, bias: bool = True,
                 rng: Optional[np.random.Generator] = None, dtype=np.float64,
                 weight_std: Optional[float] = None, bias_init: float = 0.0):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        std = np.sqrt(1.0 / f_in) if weight_std is None else weight_std
        self.weight = self.add_parameter(
            "weight", (rng.standard_normal((f_in, f_out)) * std).astype(dtype)
        )
        self.bias = (self.add_parameter("bias", np.full(f_out, bias_init, dtype=dtype))
                     if bias else None)
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        bias = self.bias.data if self.bias is not None else None
        out, self._cache = F.linear_forward(x, self.weight.data, bias)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_x, grad_w, grad_b = F.linear_backward(grad_out, self._cache)
        self.weight.accumulate(grad_w)
        if self.bias is not None:
            self.bias.accumulate(grad_b)
        return grad_x
