"""
Training and evaluation loops.

One training iteration of an MSGC network:

    logits, ledger = forward(x, "train")          # logistic STE masks
    L = CE(logits, y) + max(lambda * (mean cost / M_ori - tau), 0)
    backward -> SGD step (two parameter groups)

tau and both learning rates are evaluated at the fractional epoch of every
iteration. Plain networks run the same loop without the budget term.
"""

from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from backbones.msgc_net import MsgcNet, build_msgc
from backbones.tiny_net import PlainNet, build_plain
from core.config import ANALYSIS_PARAMS
from core.errors import ConfigurationError, NonFiniteError
from data_io.checkpoint import save_checkpoint
from data_io.dataset import Dataset
from data_io.run_config import msgc_config, net_config
from optim.schedule import BudgetSchedule, budget_loss, lr_at
from optim.sgd import SGD, OptimizerConfig, build_param_groups
from tensor_ops import functional as F
from training.calibration import CalibrationResult, calibrate_gates

Network = Union[PlainNet, MsgcNet]

LOG_COLUMNS = ["epoch", "tau", "lr_mlp", "lr_backbone", "task_loss", "budget_loss",
               "train_mac_ratio", "val_accuracy", "val_mac_ratio"]


def numpy_dtype(config: Dict):
    return np.float64 if config["dtype"] == "float64" else np.float32


def build_network(config: Dict, seed: Optional[int] = None) -> Network:
    """Fresh network described by a RunConfig dictionary."""
    seed = config["seed"] if seed is None else seed
    dtype = numpy_dtype(config)
    if config["model"] == "plain":
        return build_plain(net_config(config), seed, dtype)
    return build_msgc(msgc_config(config), seed, dtype)


class EvalResult:
    """
    Deterministic evaluation of a network on a dataset.

    Attributes:
        labels, predictions: (N,) class indices
        macs: (N,) achieved MACs per sample
        m_ori: MACs of the unmasked network
    """

    def __init__(self, labels: np.ndarray, predictions: np.ndarray, macs: np.ndarray, m_ori: int):
        self.labels = labels
        self.predictions = predictions
        self.macs = macs
        self.m_ori = int(m_ori)

    @property
    def correct(self) -> np.ndarray:
        return self.labels == self.predictions

    @property
    def accuracy(self) -> float:
        return float(self.correct.mean()) if len(self.labels) else 0.0

    @property
    def mac_ratios(self) -> np.ndarray:
        return self.macs / float(self.m_ori)

    @property
    def mean_mac_ratio(self) -> float:
        return float(self.mac_ratios.mean()) if len(self.labels) else 0.0

    def __repr__(self):
        return (f"EvalResult(samples={len(self.labels)}, accuracy={self.accuracy:.4f}, "
                f"mac_ratio={self.mean_mac_ratio:.4f})")


def evaluate(network: Network, dataset: Dataset, batch_size: int = 256,
             force_ones: bool = False) -> EvalResult:
    """Inference pass with deterministic (Sign) masks and BN running statistics."""
    predictions, macs = [], []
    for x, _ in dataset.batches(batch_size):
        if isinstance(network, MsgcNet):
            logits, ledger = network.forward(x, "eval", force_ones=force_ones)
            macs.append(ledger.achieved)
        else:
            logits = network.forward(x, training=False)
            macs.append(np.full(len(x), network.original_macs(), dtype=np.int64))
        predictions.append(np.argmax(logits, axis=1))
    if predictions:
        predictions = np.concatenate(predictions)
        macs = np.concatenate(macs)
    else:
        predictions = np.zeros(0, dtype=np.int64)
        macs = np.zeros(0, dtype=np.int64)
    return EvalResult(dataset.labels, predictions, macs, network.original_macs())


class Trainer:
    """
    Runs the full schedule on one network.

    Attributes:
        network: PlainNet or MsgcNet
        config: RunConfig dictionary
        schedule: BudgetSchedule (tau and cosine learning rates)
        optimizer: SGD over the mlp / backbone parameter groups
        history: one row per epoch (LOG_COLUMNS)
        calibration: CalibrationResult of the final gate calibration, if any
    """

    def __init__(self, network: Network, config: Dict):
        self.network = network
        self.config = config
        self.schedule = BudgetSchedule(config["epochs"], lam=config["lambda"],
                                       tau_end=config["tau_end"],
                                       warm_fraction=config["warm_fraction"])
        self.optimizer = SGD(build_param_groups(network, OptimizerConfig(
            lr_mlp=config["lr_mlp"],
            lr_backbone=config["lr_backbone"],
            momentum=config["momentum"],
            weight_decay_backbone=config["weight_decay"],
        )))
        seeds = np.random.SeedSequence(config["seed"]).spawn(2)
        self.data_rng = np.random.default_rng(seeds[0])
        self.noise_rng = np.random.default_rng(seeds[1])
        self.history: List[Dict] = []
        self.calibration: Optional[CalibrationResult] = None
        self.last_good_state = self._snapshot()

    @property
    def is_msgc(self) -> bool:
        return isinstance(self.network, MsgcNet)

    def _snapshot(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.network.state_dict().items()}

    def _set_learning_rates(self, epoch: float) -> None:
        for group in self.optimizer.groups:
            group.lr = lr_at(epoch, group.base_lr, self.schedule.total_epochs)

    def train_step(self, x: np.ndarray, y: np.ndarray, tau: float) -> Dict[str, float]:
        """One forward/backward/update; returns the step's losses and MAC ratio."""
        self.optimizer.zero_grad()
        if self.is_msgc:
            logits, ledger = self.network.forward(x, "train", self.noise_rng)
            m_ori = float(self.network.original_macs())
            mean_cost = float(np.mean(self.network.last_costs))
            bgt, grad_mean = budget_loss(mean_cost, m_ori, self.schedule.lam, tau)
            mac_ratio = ledger.mean_ratio()
        else:
            logits = self.network.forward(x, training=True)
            bgt, grad_mean, mac_ratio = 0.0, 0.0, 1.0
        task, ce_cache = F.softmax_cross_entropy_forward(logits, y)
        if not np.isfinite(task + bgt):
            raise NonFiniteError(f"non-finite loss (task={task}, budget={bgt})")
        grad_logits = F.softmax_cross_entropy_backward(ce_cache)
        if self.is_msgc:
            grad_cost = np.full(len(y), grad_mean / len(y))
            self.network.backward(grad_logits, grad_cost)
        else:
            self.network.backward(grad_logits)
        self.optimizer.step()
        return {"task_loss": float(task), "budget_loss": float(bgt), "mac_ratio": mac_ratio}

    def train_epoch(self, epoch: int, dataset: Dataset) -> Dict[str, float]:
        batch_size = self.config["batch_size"]
        iterations = max(1, int(np.ceil(len(dataset) / batch_size)))
        totals = {"task_loss": 0.0, "budget_loss": 0.0, "mac_ratio": 0.0}
        seen = 0
        tau = self.schedule.tau_at(epoch)
        for it, (x, y) in enumerate(dataset.batches(batch_size, self.data_rng,
                                                    augment=self.config["augment"])):
            if len(y) < 2:
                continue
            progress = epoch + it / iterations
            tau = self.schedule.tau_at(progress)
            self._set_learning_rates(progress)
            try:
                step = self.train_step(x, y, tau)
            except NonFiniteError as exc:
                raise NonFiniteError(f"epoch {epoch} iteration {it}: {exc}") from exc
            for key in totals:
                totals[key] += step[key] * len(y)
            seen += len(y)
        seen = max(seen, 1)
        return {"tau": tau, "task_loss": totals["task_loss"] / seen,
                "budget_loss": totals["budget_loss"] / seen,
                "train_mac_ratio": totals["mac_ratio"] / seen}

    def calibrate(self, train: Dataset, train_mac_ratio: float,
                  verbose: bool = True) -> CalibrationResult:
        """
        Align the deterministic gates with the trained budget.

        The target is the final train-mode MAC ratio, floored at tau_end: an
        under-budget network is not pushed lower and a weak budget keeps its
        overshoot.
        """
        tau = self.schedule.tau_at(self.schedule.total_epochs)
        target = min(max(train_mac_ratio, tau), 1.0)
        self.calibration = calibrate_gates(self.network, train, target,
                                           batch_size=self.config["batch_size"], verbose=verbose)
        return self.calibration

    def fit(self, train: Dataset, val: Optional[Dataset] = None,
            checkpoint: Optional[Path] = None, log_path: Optional[Path] = None,
            verbose: bool = True) -> pd.DataFrame:
        """
        Run every epoch, logging after each one. MSGC gates are calibrated
        after the last epoch's updates, before its validation pass.

        On a non-finite loss the last good state is written to ``checkpoint``
        and NonFiniteError is re-raised.
        """
        if len(train) < 2:
            raise ConfigurationError("training needs at least two samples")
        epochs = self.schedule.total_epochs
        for epoch in range(epochs):
            try:
                stats = self.train_epoch(epoch, train)
            except NonFiniteError as exc:
                if checkpoint is not None:
                    self.network.load_state_dict(self.last_good_state)
                    save_checkpoint(self.last_good_state, checkpoint, self.config)
                    print(f"[train] aborting: {exc}; last good checkpoint (epoch {epoch}) "
                          f"written to {checkpoint}")
                raise
            if epoch == epochs - 1 and self.is_msgc and self.config["calibrate_gates"]:
                self.calibrate(train, stats["train_mac_ratio"], verbose)
            result = evaluate(self.network, val, self.config["batch_size"]) if val else None
            lrs = {group.name: group.lr for group in self.optimizer.groups}
            row = {
                "epoch": epoch + 1,
                "tau": stats["tau"],
                "lr_mlp": lrs.get("mlp", 0.0),
                "lr_backbone": lrs["backbone"],
                "task_loss": stats["task_loss"],
                "budget_loss": stats["budget_loss"],
                "train_mac_ratio": stats["train_mac_ratio"],
                "val_accuracy": result.accuracy if result else float("nan"),
                "val_mac_ratio": result.mean_mac_ratio if result else float("nan"),
            }
            self.history.append(row)
            self.last_good_state = self._snapshot()
            if verbose:
                print(f"[train] epoch {epoch + 1}/{epochs} tau={row['tau']:.3f} "
                      f"task={row['task_loss']:.4f} budget={row['budget_loss']:.4f} "
                      f"mac={row['train_mac_ratio']:.3f} val_acc={row['val_accuracy']:.4f} "
                      f"val_mac={row['val_mac_ratio']:.3f}")
            if log_path is not None:
                write_log(self.history, log_path)
            if checkpoint is not None:
                save_checkpoint(self.last_good_state, checkpoint, self.config)
        return pd.DataFrame(self.history, columns=LOG_COLUMNS)


def write_log(history: List[Dict], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(history, columns=LOG_COLUMNS)
    frame.to_csv(path, index=False, float_format=ANALYSIS_PARAMS["float_format"])
    return path


def train_from_config(config: Dict, train: Dataset, val: Optional[Dataset] = None,
                      verbose: bool = True) -> Trainer:
    """Build the configured network and train it, writing checkpoint and log."""
    network = build_network(config)
    dtype = numpy_dtype(config)
    train = train.astype(dtype)
    val = val.astype(dtype) if val is not None else None
    trainer = Trainer(network, config)
    if verbose:
        print("=" * 60)
        print(f"[train] model={config['model']} epochs={config['epochs']} "
              f"lambda={config['lambda']} tau_end={config['tau_end']} "
              f"params={network.num_parameters()}")
        print("=" * 60)
    trainer.fit(train, val, Path(config["output"]), Path(config["log"]), verbose)
    return trainer
