"""Synthetic analysis-sparse ground truths, calibrated measurements, metrics.

Supports follow a Bernoulli model on the coefficient vector, nonzero
amplitudes are standard normal, and measurement noise is rescaled so the
realized SNR matches the request exactly. Constraint radii for both the l2
and the B-norm fidelity are recorded per instance for oracle-constrained
solvers.
"""

import zlib
from dataclasses import dataclass, field

import numpy as np

from . import fileio, frames
from .errors import UndefinedSnrError


def derive_seed(master_seed, *keys):
    """Deterministic child seed from a master seed and a key path.

    String keys are hashed with crc32 so the derivation is stable across
    runs and platforms.
    """
    path = tuple(
        zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys
    )
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=path)
    lo, hi = ss.generate_state(2)
    return int(hi) << 32 | int(lo)


@dataclass
class ProblemInstance:
    """One synthetic recovery problem: ground truth, measurement, noise record."""

    alpha_star: np.ndarray
    x_star: np.ndarray
    support: np.ndarray
    y: np.ndarray
    noise: np.ndarray
    snr_db: float
    epsilon_l2: float
    epsilon_b: float
    seed: int
    sparsity_pct: float = field(default=float("nan"))


def gen_sparse_coeffs(d, sparsity_pct, seed):
    """Bernoulli-support coefficients with standard-normal amplitudes.

    Each index enters the support independently with probability
    ``sparsity_pct / 100``.
    """
    if not 0.0 < sparsity_pct <= 100.0:
        raise ValueError(f"sparsity_pct must be in (0, 100], got {sparsity_pct}")
    rng = np.random.default_rng(seed)
    mask = rng.random(d) < sparsity_pct / 100.0
    support = np.flatnonzero(mask)
    alpha = np.zeros(d)
    alpha[support] = rng.standard_normal(support.size)
    return alpha, support


def measure(op, x_star, snr_db, seed):
    """Noisy measurement of ``x_star`` calibrated to the requested SNR.

    The Gaussian noise draw is rescaled so that
    ``20 log10(||A x*|| / ||w||)`` equals ``snr_db`` exactly; pass
    ``snr_db = inf`` for noiseless measurements. Returns
    ``(y, noise, epsilon_l2, epsilon_b)``.
    """
    x_star = np.asarray(x_star, dtype=np.float64)
    ax = op.A @ x_star
    signal = np.linalg.norm(ax)
    if signal == 0.0:
        raise UndefinedSnrError("SNR is undefined for a zero signal")
    if np.isinf(snr_db):
        noise = np.zeros(op.m)
        return ax.copy(), noise, 0.0, 0.0
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(op.m)
    w *= signal * 10.0 ** (-snr_db / 20.0) / np.linalg.norm(w)
    y = ax + w
    eps_l2 = float(np.linalg.norm(w))
    eps_b = float(frames.bnorm_of(op, w))
    return y, w, eps_l2, eps_b


def rsnr(x_hat, x_star):
    """Reconstruction SNR ``20 log10(||x*|| / ||x_hat - x*||)`` in dB.

    Returns ``+inf`` for an exact reconstruction.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    denom = np.linalg.norm(x_star)
    if denom == 0.0:
        raise UndefinedSnrError("RSNR is undefined for a zero ground truth")
    err = np.linalg.norm(x_hat - x_star)
    if err == 0.0:
        return float("inf")
    return float(20.0 * np.log10(denom / err))


def make_instance(op, dictionary, sparsity_pct, snr_db, seed):
    """Build one problem instance from an instance seed.

    The coefficient and noise draws use independent seeds derived from
    ``seed`` so either half can be reproduced on its own. Instances with an
    empty support are redrawn from follow-up seeds (SNR calibration needs a
    nonzero signal).
    """
    attempt = 0
    while True:
        alpha_seed = derive_seed(seed, "alpha", attempt)
        alpha, support = gen_sparse_coeffs(dictionary.d, sparsity_pct, alpha_seed)
        if support.size > 0:
            break
        attempt += 1
    x_star = dictionary.synthesis(alpha)
    y, noise, eps_l2, eps_b = measure(op, x_star, snr_db,
                                      derive_seed(seed, "noise"))
    return ProblemInstance(alpha_star=alpha, x_star=x_star, support=support,
                           y=y, noise=noise, snr_db=snr_db,
                           epsilon_l2=eps_l2, epsilon_b=eps_b, seed=seed,
                           sparsity_pct=sparsity_pct)


def batch_instances(op, dictionary, sparsity_pct, snr_db, n_trials, master_seed):
    """Independent instances with per-trial seeds derived from a master seed."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    return [
        make_instance(op, dictionary, sparsity_pct, snr_db,
                      derive_seed(master_seed, "trial", t))
        for t in range(n_trials)
    ]


def save_instance(inst, prefix):
    """Persist an instance as one matrix blob per vector plus a manifest."""
    prefix = str(prefix)
    for name in ("alpha_star", "x_star", "y", "noise"):
        fileio.write_vector(f"{prefix}.{name}.mat", getattr(inst, name))
    fileio.write_json(prefix + ".json", {
        "seed": inst.seed,
        "sparsity_pct": inst.sparsity_pct,
        "snr_db": inst.snr_db,
        "epsilon_l2": inst.epsilon_l2,
        "epsilon_b": inst.epsilon_b,
        "support": inst.support.tolist(),
    })


def load_instance(prefix):
    prefix = str(prefix)
    meta = fileio.read_json(prefix + ".json")
    vecs = {name: fileio.read_vector(f"{prefix}.{name}.mat")
            for name in ("alpha_star", "x_star", "y", "noise")}
    return ProblemInstance(
        alpha_star=vecs["alpha_star"], x_star=vecs["x_star"],
        support=np.asarray(meta["support"], dtype=np.int64),
        y=vecs["y"], noise=vecs["noise"], snr_db=meta["snr_db"],
        epsilon_l2=meta["epsilon_l2"], epsilon_b=meta["epsilon_b"],
        seed=meta["seed"], sparsity_pct=meta["sparsity_pct"])
