"""
Seeded end-to-end training runs: budget control across lambda, accuracy
retention against the plain baseline, and per-sample MAC dynamism.

Every run trains a two-block 16-channel network for 40 epochs on 16x16
synthetic textures, so this module is marked slow.
"""

import pytest

from analysis.dynamics import mac_dynamism
from core.config import DEFAULT_RUN_CONFIG
from data_io.synth import synth_generate
from training.trainer import evaluate, train_from_config

pytestmark = pytest.mark.slow

TAU_END = 0.5


@pytest.fixture(scope="module")
def texture_splits():
    train = synth_generate(0, 40, classes=8, size=16)
    val = synth_generate(1, 20, classes=8, size=16)
    noisy = synth_generate(2, 20, classes=8, noise=1.0, size=16)
    return train, val, noisy


@pytest.fixture(scope="module")
def trained(texture_splits, tmp_path_factory):
    """Train (and memoize) one run per distinct set of overrides."""
    runs = {}

    def run(**overrides):
        key = tuple(sorted(overrides.items()))
        if key not in runs:
            out = tmp_path_factory.mktemp("run")
            config = dict(DEFAULT_RUN_CONFIG)
            config.update({
                "widths": [16, 16],
                "strides": [1, 2],
                "stem_width": 16,
                "input_size": 16,
                "num_classes": 8,
                "epochs": 40,
                "tau_end": TAU_END,
                "data": str(out / "train.msgd"),
                "val_data": str(out / "val.msgd"),
                "output": str(out / "model.ckpt"),
                "log": str(out / "train_log.csv"),
            })
            config.update(overrides)
            trainer = train_from_config(config, texture_splits[0], texture_splits[1],
                                        verbose=False)
            runs[key] = trainer.network
        return runs[key]

    return run


def val_result(network, dataset):
    return evaluate(network, dataset.astype(network.dtype))


class TestBudgetControl:

    def test_default_lambda_lands_in_band(self, trained, texture_splits):
        ratio = val_result(trained(), texture_splits[1]).mean_mac_ratio
        assert 0.48 <= ratio <= 0.52

    @pytest.mark.parametrize("lam", [10.0, 60.0])
    def test_other_lambdas_land_near_tau(self, trained, texture_splits, lam):
        ratio = val_result(trained(**{"lambda": lam}), texture_splits[1]).mean_mac_ratio
        assert abs(ratio - TAU_END) <= 0.02

    def test_weak_lambda_overshoots(self, trained, texture_splits):
        ratio = val_result(trained(**{"lambda": 1.0}), texture_splits[1]).mean_mac_ratio
        assert ratio > TAU_END + 0.05


class TestAccuracyRetention:

    @pytest.fixture(scope="class")
    def baseline(self, trained, texture_splits):
        return val_result(trained(model="plain"), texture_splits[1]).accuracy

    def test_light_budget_stays_within_a_point(self, trained, texture_splits, baseline):
        accuracy = val_result(trained(tau_end=0.7), texture_splits[1]).accuracy
        assert accuracy >= baseline - 0.01

    def test_loose_budget_matches_baseline(self, trained, texture_splits, baseline):
        accuracy = val_result(trained(tau_end=0.9), texture_splits[1]).accuracy
        assert accuracy >= baseline


class TestSampleDynamism:

    def test_costs_vary_and_errors_cost_more(self, trained, texture_splits):
        result = val_result(trained(), texture_splits[2])
        stats = mac_dynamism(result)
        assert stats["mac_std"] > 0
        assert stats["mean_macs_wrong"] is not None
        assert stats["mean_macs_wrong"] >= stats["mean_macs_correct"]
