"""
Gradient verification: every op and the end-to-end MSGC loss against
central finite differences.

Op checks contract each op's output with a fixed random tensor R, so the
analytic gradient is the op's backward applied to R. The end-to-end check
runs a float64 two-block miniature in relaxed mode with frozen logistic
noise (the same seeded generator on every evaluation) and an active budget
hinge, then checks a random subset of every parameter's coordinates.
"""

from typing import Callable, Dict, Optional

import numpy as np

from backbones.msgc_net import build_msgc
from core.config import GRADCHECK_PARAMS
from core.data_models import MsgcBlockConfig, MsgcNetConfig, TinyNetConfig
from core.errors import GradcheckFailure
from msgc import gating
from msgc.grouped_conv import masked_grouped_conv_backward, masked_grouped_conv_forward
from msgc.macs import block_cost_backward, block_cost_forward
from optim.schedule import budget_loss
from tensor_ops import functional as F
from tensor_ops.conv import conv2d_backward, conv2d_forward
from tensor_ops.gradcheck import check_parameters, finite_diff_check, sample_coords

Arrays = Dict[str, np.ndarray]


def _check_arrays(loss: Callable[[Arrays], float], arrays: Arrays, grads: Arrays,
                  rng: np.random.Generator, coords_per_tensor: int) -> Dict[str, float]:
    errors = {}
    for name, theta in arrays.items():
        coords = sample_coords(theta.shape, coords_per_tensor, rng)
        errors[name] = finite_diff_check(lambda _t: loss(arrays), theta, grads[name], coords)
    return errors


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    """Normal draws pushed at least 0.1 away from 0 (no ReLU kinks within the step)."""
    x = rng.standard_normal(shape)
    return np.sign(x) * (0.1 + np.abs(x))


def op_checks(rng: np.random.Generator,
              coords_per_tensor: int = GRADCHECK_PARAMS["coords_per_tensor"]) -> Dict[str, float]:
    """Max relative error of every differentiable op, keyed by op.input."""
    errors: Dict[str, float] = {}

    def record(prefix: str, result: Dict[str, float]) -> None:
        for name, err in result.items():
            errors[f"{prefix}.{name}"] = err

    # conv2d
    a = {"x": rng.standard_normal((2, 3, 6, 6)), "w": rng.standard_normal((3, 3, 3, 4)),
         "b": rng.standard_normal(4)}
    out, cache = conv2d_forward(a["x"], a["w"], a["b"], stride=2, padding=1)
    r = rng.standard_normal(out.shape)
    gx, gw, gb = conv2d_backward(r, cache)
    record("conv2d", _check_arrays(
        lambda v: float(np.sum(conv2d_forward(v["x"], v["w"], v["b"], 2, 1)[0] * r)),
        a, {"x": gx, "w": gw, "b": gb}, rng, coords_per_tensor))

    # linear
    a = {"x": rng.standard_normal((4, 5)), "w": rng.standard_normal((5, 3)),
         "b": rng.standard_normal(3)}
    out, cache = F.linear_forward(a["x"], a["w"], a["b"])
    r = rng.standard_normal(out.shape)
    gx, gw, gb = F.linear_backward(r, cache)
    record("linear", _check_arrays(
        lambda v: float(np.sum(F.linear_forward(v["x"], v["w"], v["b"])[0] * r)),
        a, {"x": gx, "w": gw, "b": gb}, rng, coords_per_tensor))

    # batch norm, both ranks, train mode
    for shape in ((6, 4), (3, 4, 3, 3)):
        features = shape[1]
        a = {"x": rng.standard_normal(shape), "gamma": rng.standard_normal(features),
             "beta": rng.standard_normal(features)}
        stats = (np.zeros(features), np.ones(features))

        def bn(v, stats=stats):
            return F.batch_norm_forward(v["x"], v["gamma"], v["beta"], *stats, training=True)

        out, cache, _ = bn(a)
        r = rng.standard_normal(out.shape)
        gx, gg, gb = F.batch_norm_backward(r, cache)
        record(f"batch_norm_rank{len(shape)}", _check_arrays(
            lambda v, r=r, f=bn: float(np.sum(f(v)[0] * r)),
            a, {"x": gx, "gamma": gg, "beta": gb}, rng, coords_per_tensor))

    # relu / sigmoid / global average pooling
    for name, forward, backward, x in (
        ("relu", F.relu_forward, F.relu_backward, _away_from_zero(rng, (3, 5))),
        ("sigmoid", F.sigmoid_forward, F.sigmoid_backward, rng.standard_normal((3, 5))),
        ("gap", F.global_avg_pool_forward, F.global_avg_pool_backward,
         rng.standard_normal((2, 3, 4, 4))),
    ):
        out, cache = forward(x)
        r = rng.standard_normal(out.shape)
        record(name, _check_arrays(
            lambda v, r=r, f=forward: float(np.sum(f(v["x"])[0] * r)),
            {"x": x}, {"x": backward(r, cache)}, rng, coords_per_tensor))

    # softmax cross entropy
    labels = rng.integers(0, 4, size=5)
    a = {"logits": rng.standard_normal((5, 4))}
    _, cache = F.softmax_cross_entropy_forward(a["logits"], labels)
    record("cross_entropy", _check_arrays(
        lambda v: F.softmax_cross_entropy_forward(v["logits"], labels)[0],
        a, {"logits": F.softmax_cross_entropy_backward(cache)}, rng, coords_per_tensor))

    # masked grouped conv
    groups = 2
    a = {"x": rng.standard_normal((2, 4, 5, 5)), "scale": rng.random((2, groups, 4))}
    for g in range(groups):
        a[f"filter{g}"] = rng.standard_normal((3, 3, 4, 3))

    def grouped(v):
        filters = [v[f"filter{g}"] for g in range(groups)]
        return masked_grouped_conv_forward(v["x"], filters, v["scale"], None, 1, 1)

    out, cache = grouped(a)
    r = rng.standard_normal(out.shape)
    gx, gfilters, gscale, _ = masked_grouped_conv_backward(r, cache)
    grads = {"x": gx, "scale": gscale}
    grads.update({f"filter{g}": gfilters[g] for g in range(groups)})
    record("grouped_conv", _check_arrays(
        lambda v: float(np.sum(grouped(v)[0] * r)), a, grads, rng, coords_per_tensor))

    # relaxed binarizer with frozen noise
    noise_seed = int(rng.integers(2**31))
    a = {"saliency": rng.standard_normal((3, 2, 4))}

    def relaxed(v):
        return gating.binarize_train(v["saliency"], np.random.default_rng(noise_seed), relaxed=True)

    mask = relaxed(a)
    r = rng.standard_normal(mask.value.shape)
    record("binarize", _check_arrays(
        lambda v: float(np.sum(relaxed(v).value * r)),
        a, {"saliency": gating.binarize_backward(r, mask)}, rng, coords_per_tensor))

    # MAC cost polynomial on soft masks
    config = MsgcBlockConfig([4, 8, 8], [2, 4], input_size=(5, 5))
    a = {f"mask{i}": rng.random((3, g, c)) for i, (g, c) in
         enumerate(zip(config.groups, config.channels[:-1]))}
    costs, cache = block_cost_forward([a["mask0"], a["mask1"]], config)
    r = rng.standard_normal(costs.shape)
    g0, g1 = block_cost_backward(r, cache)
    record("mac_cost", _check_arrays(
        lambda v: float(np.sum(block_cost_forward([v["mask0"], v["mask1"]], config)[0] * r)),
        a, {"mask0": g0, "mask1": g1}, rng, coords_per_tensor))

    # budget hinge (active side)
    m_ori = 1000.0
    a = {"macs": np.array([800.0])}
    _, grad = budget_loss(800.0, m_ori, 30.0, 0.5)
    record("budget_loss", _check_arrays(
        lambda v: budget_loss(float(v["macs"][0]), m_ori, 30.0, 0.5)[0],
        a, {"macs": np.array([grad])}, rng, coords_per_tensor))
    return errors


def miniature_config(groups=(1, 4), attention_layers=(1, 2), reduction: int = 4,
                     gumbel_temperature: float = 2.0 / 3.0) -> MsgcNetConfig:
    """Two-block float64 miniature used by the end-to-end check."""
    width = GRADCHECK_PARAMS["miniature_width"]
    net = TinyNetConfig(in_channels=3, input_size=GRADCHECK_PARAMS["miniature_size"],
                        stem_width=width, widths=(width, width), strides=(1, 2),
                        num_classes=GRADCHECK_PARAMS["miniature_classes"])
    return MsgcNetConfig(net, groups=groups, attention_layers=attention_layers,
                         reduction=reduction, gumbel_temperature=gumbel_temperature,
                         saliency_bias_init=GRADCHECK_PARAMS["saliency_bias_init"])


def end_to_end_check(
    seed: int,
    config: Optional[MsgcNetConfig] = None,
    coords_per_tensor: int = GRADCHECK_PARAMS["coords_per_tensor"],
) -> Dict[str, float]:
    """
    Finite-difference check of task + budget loss w.r.t. every parameter.

    Returns:
        Dictionary of parameter name -> max relative error
    """
    config = config or miniature_config()
    rng = np.random.default_rng(seed)
    network = build_msgc(config, seed, np.float64)
    net = config.net
    x = rng.standard_normal((GRADCHECK_PARAMS["miniature_batch"], net.in_channels,
                             net.input_size, net.input_size))
    y = rng.integers(0, net.num_classes, size=len(x))
    noise_seed = int(rng.integers(2**31))
    lam, tau = GRADCHECK_PARAMS["budget_lambda"], GRADCHECK_PARAMS["budget_tau"]
    m_ori = float(network.original_macs())

    def forward():
        logits, _ = network.forward(x, "relaxed", np.random.default_rng(noise_seed))
        task, cache = F.softmax_cross_entropy_forward(logits, y)
        bgt, grad_mean = budget_loss(float(np.mean(network.last_costs)), m_ori, lam, tau)
        return task + bgt, cache, grad_mean

    network.zero_grad()
    _, cache, grad_mean = forward()
    network.backward(F.softmax_cross_entropy_backward(cache),
                     np.full(len(x), grad_mean / len(x)))
    return check_parameters(lambda: forward()[0], dict(network.named_parameters()),
                            coords_per_tensor, rng)


def run_gradcheck(
    seed: int = 0,
    trials: int = 20,
    config: Optional[MsgcNetConfig] = None,
    tolerance: float = GRADCHECK_PARAMS["tolerance"],
    verbose: bool = True,
) -> Dict[str, float]:
    """
    Run the op checks and ``trials`` end-to-end checks (seeds seed..seed+trials-1).

    Returns:
        Worst relative error per checked op input / parameter

    Raises:
        GradcheckFailure: listing every entry at or above ``tolerance``
    """
    worst = op_checks(np.random.default_rng(seed))
    if verbose:
        print(f"[gradcheck] ops: max relative error {max(worst.values()):.3e}")
    for trial in range(trials):
        errors = end_to_end_check(seed + trial, config)
        for name, err in errors.items():
            key = f"network.{name}"
            worst[key] = max(worst.get(key, 0.0), err)
        if verbose:
            print(f"[gradcheck] end-to-end seed {seed + trial}: "
                  f"max relative error {max(errors.values()):.3e}")

    offenders = {name: err for name, err in worst.items() if not err < tolerance}
    if verbose:
        print(f"[gradcheck] {len(worst)} tensors checked, worst {max(worst.values()):.3e}, "
              f"{len(offenders)} above {tolerance:g}")
    if offenders:
        raise GradcheckFailure(offenders)
    return worst
