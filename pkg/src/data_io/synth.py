"""
Procedural grating textures.

Class k of K is an oriented sinusoid with orientation theta_k = pi*k/K and
frequency f_k = 2 + (k mod 4) cycles per image. Channel c is phase-shifted
by 2*pi*c/3. Each sample draws a phase psi ~ U(0, 2*pi) and a contrast
a ~ U(0.5, 1) and adds Gaussian noise:

    pixel = a * sin(2*pi*f_k*(x*cos(theta_k) + y*sin(theta_k))/size + 2*pi*c/3 + psi) + noise
"""

from pathlib import Path
from typing import Optional

import numpy as np

from core.config import SYNTH_PARAMS
from core.errors import ConfigurationError
from data_io.dataset import Dataset, save_dataset


def grating(k: int, classes: int, size: int, channels: int = SYNTH_PARAMS["channels"],
            phase: np.ndarray = 0.0, contrast: np.ndarray = 1.0) -> np.ndarray:
    """
    Grating of class k, vectorized over samples.

    Args:
        phase, contrast: scalars or (N,) arrays

    Returns:
        (C, size, size) for scalar phase/contrast, else (N, C, size, size)
    """
    theta = np.pi * k / classes
    freq = 2 + (k % 4)
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    wave = 2 * np.pi * freq * (x * np.cos(theta) + y * np.sin(theta)) / size
    shift = 2 * np.pi * np.arange(channels) / 3.0
    phase = np.asarray(phase, dtype=np.float64)
    contrast = np.asarray(contrast, dtype=np.float64)
    arg = wave[None, :, :] + shift[:, None, None]
    if phase.ndim == 0:
        return contrast * np.sin(arg + phase)
    return contrast[:, None, None, None] * np.sin(arg[None] + phase[:, None, None, None])


def class_template(k: int, classes: int = SYNTH_PARAMS["classes"],
                   size: int = SYNTH_PARAMS["size"]) -> np.ndarray:
    """Noiseless grating of class k at zero phase and unit contrast."""
    return grating(k, classes, size)


def synth_generate(
    seed: int,
    n_per_class: int,
    classes: int = SYNTH_PARAMS["classes"],
    noise: float = SYNTH_PARAMS["noise"],
    size: int = SYNTH_PARAMS["size"],
    out: Optional[Path] = None,
    verbose: bool = False,
) -> Dataset:
    """
    Generate the synthetic texture dataset (deterministic per seed).

    Args:
        seed: generator seed
        n_per_class: samples per class (0 gives an empty dataset)
        classes: number of classes K >= 2
        noise: standard deviation of the additive Gaussian noise
        size: image side
        out: optional dataset file to write

    Returns:
        Dataset with float32 images, shuffled
    """
    if classes < 2:
        raise ConfigurationError(f"need at least 2 classes, got {classes}")
    if n_per_class < 0 or noise < 0 or size < 1:
        raise ConfigurationError("n_per_class and noise must be non-negative, size positive")

    rng = np.random.default_rng(seed)
    channels = SYNTH_PARAMS["channels"]
    low, high = SYNTH_PARAMS["contrast_range"]
    total = classes * n_per_class
    images = np.empty((total, channels, size, size), dtype=np.float32)
    labels = np.repeat(np.arange(classes, dtype=np.int64), n_per_class)

    for k in range(classes):
        phase = rng.uniform(0.0, 2 * np.pi, n_per_class)
        contrast = rng.uniform(low, high, n_per_class)
        clean = grating(k, classes, size, channels, phase, contrast)
        jitter = rng.normal(0.0, noise, clean.shape) if noise > 0 else 0.0
        images[k * n_per_class:(k + 1) * n_per_class] = clean + jitter

    order = rng.permutation(total)
    dataset = Dataset(images[order], labels[order], classes)
    if out is not None:
        save_dataset(dataset, out)
        if verbose:
            print(f"[synth] wrote {total} samples ({classes} classes, noise {noise}) to {out}")
    return dataset
