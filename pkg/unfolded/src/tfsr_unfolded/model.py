"""Deep-unfolded recovery network.

Each of the K phases applies a data-fidelity gradient step (ls / tf / rtf
mode, matching the companion library's gradient semantics) followed by a
learnable proximal step: a forward sparsifying transform (two convolutional
blocks separated by a rectifier), soft thresholding, and an inverse
transform trained to undo the forward one. Step sizes and thresholds are
learnable per phase and kept positive through a softplus parameterization.
"""

import math

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

FIDELITIES = ("ls", "tf", "rtf")


def _inverse_softplus(value):
    return math.log(math.expm1(value))


def soft_threshold(v, t):
    return torch.sign(v) * torch.relu(torch.abs(v) - t)


class ForwardTransform(nn.Module):
    """Two convolutional blocks separated by a rectifier (1 -> width)."""

    def __init__(self, width=32, kernel=3):
        super().__init__()
        pad = kernel // 2
        self.conv1 = nn.Conv2d(1, width, kernel, padding=pad, bias=False)
        self.conv2 = nn.Conv2d(width, width, kernel, padding=pad, bias=False)

    def forward(self, img):
        return self.conv2(torch.relu(self.conv1(img)))


class InverseTransform(nn.Module):
    """Mirror of :class:`ForwardTransform` (width -> 1)."""

    def __init__(self, width=32, kernel=3):
        super().__init__()
        pad = kernel // 2
        self.conv1 = nn.Conv2d(width, width, kernel, padding=pad, bias=False)
        self.conv2 = nn.Conv2d(width, 1, kernel, padding=pad, bias=False)

    def forward(self, feat):
        return self.conv2(torch.relu(self.conv1(feat)))


class UnfoldedNet(nn.Module):
    """K learnable phases of gradient step + transform-domain shrinkage.

    ``operator`` provides ``A``, ``pinv`` and ``c_diag`` (already derived on
    the other side of the file boundary); ``side`` is the patch edge length
    with ``side * side == n``.
    """

    def __init__(self, operator, mode="tf", phases=8, width=32, kernel=3,
                 eta_init=0.5, lam_init=0.01, seed=0, dtype=torch.float32):
        super().__init__()
        if mode not in FIDELITIES:
            raise ValueError(f"unknown fidelity mode {mode!r}")
        side = int(round(math.sqrt(operator.n)))
        if side * side != operator.n:
            raise ValueError(f"signal length {operator.n} is not a square")
        self.mode = mode
        self.phases = phases
        self.side = side
        torch.manual_seed(seed)
        self.register_buffer("A", torch.as_tensor(operator.A, dtype=dtype))
        self.register_buffer("Ap", torch.as_tensor(operator.pinv, dtype=dtype))
        self.register_buffer(
            "c_diag", torch.as_tensor(operator.c_diag, dtype=dtype))
        self.eta_raw = nn.Parameter(
            torch.full((phases,), _inverse_softplus(eta_init), dtype=dtype))
        self.lam_raw = nn.Parameter(
            torch.full((phases,), _inverse_softplus(lam_init), dtype=dtype))
        self.forward_transforms = nn.ModuleList(
            [ForwardTransform(width, kernel) for _ in range(phases)])
        self.inverse_transforms = nn.ModuleList(
            [InverseTransform(width, kernel) for _ in range(phases)])
        for module in self.modules():
            if isinstance(module, nn.Conv2d):
                nn.init.xavier_normal_(module.weight)
        self.to(dtype)

    @property
    def etas(self):
        return F.softplus(self.eta_raw)

    @property
    def lams(self):
        return F.softplus(self.lam_raw)

    def gradient(self, x, y):
        """Fidelity gradient of the selected mode for batched row vectors."""
        r = x @ self.A.T - y
        if self.mode == "ls":
            return r @ self.A
        g = r @ self.Ap.T
        if self.mode == "rtf":
            g = g / self.c_diag
        return g

    def _prox(self, k, z):
        img = z.view(-1, 1, self.side, self.side)
        feat = self.forward_transforms[k](img)
        feat = soft_threshold(feat, self.lams[k])
        out = self.inverse_transforms[k](feat)
        return out.reshape(z.shape)

    def forward(self, y, return_iterates=False):
        """Reconstruct from measurements ``y`` of shape (batch, m).

        With ``return_iterates`` the pre-proximal gradient iterates
        ``z^(k)`` and post-proximal ``x^(k)`` are returned as well.
        """
        x = y @ self.A
        iterates = []
        for k in range(self.phases):
            z = x - self.etas[k] * self.gradient(x, y)
            x = self._prox(k, z)
            if return_iterates:
                iterates.append((z, x))
        if return_iterates:
            return x, iterates
        return x

    def inversion_residuals(self, x_true):
        """Per-phase ``x - inv_k(fwd_k(x))`` used by the training loss."""
        img = x_true.view(-1, 1, self.side, self.side)
        out = []
        for fwd, inv in zip(self.forward_transforms, self.inverse_transforms):
            rec = inv(fwd(img))
            out.append((img - rec).reshape(x_true.shape))
        return out


def loss_terms(net, y, x_true):
    """Reconstruction term and transform-inversion term of the loss."""
    x_hat = net(y)
    recon = ((x_hat - x_true) ** 2).sum(dim=1).mean()
    inversion = sum(((r ** 2).sum(dim=1).mean()
                     for r in net.inversion_residuals(x_true)))
    return recon, inversion


def training_loss(net, y, x_true):
    """End-to-end loss: final reconstruction error plus the sum of
    per-phase transform-inversion penalties."""
    recon, inversion = loss_terms(net, y, x_true)
    return recon + inversion


def psnr(x_hat, x_true, peak=1.0):
    """Peak signal-to-noise ratio on a fixed dynamic range, in dB."""
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    mse = float(np.mean((x_hat - x_true) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(peak ** 2 / mse)


def ssim(x_hat, x_true, side=None):
    """Structural similarity with the standard 11x11 Gaussian window."""
    from skimage.metrics import structural_similarity

    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_true = np.asarray(x_true, dtype=np.float64)
    if side is not None:
        x_hat = x_hat.reshape(side, side)
        x_true = x_true.reshape(side, side)
    return float(structural_similarity(
        x_hat, x_true, data_range=1.0, gaussian_weights=True, sigma=1.5,
        win_size=11))
