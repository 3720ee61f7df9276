"""End-to-end training of the unfolded network on image patches."""

import numpy as np
import torch

from .model import UnfoldedNet, psnr, training_loss


def measure_batch(net, patches_vec):
    """Noiseless compressed measurements of vectorized patches."""
    x = torch.as_tensor(patches_vec, dtype=net.A.dtype)
    return x @ net.A.T, x


def evaluate_psnr(net, patches_vec):
    """Mean reconstruction PSNR over a set of vectorized patches."""
    net.eval()
    with torch.no_grad():
        y, x = measure_batch(net, patches_vec)
        x_hat = net(y)
    return float(np.mean([psnr(a, b) for a, b in
                          zip(x_hat.numpy(), x.numpy())]))


def train(net, train_vec, val_vec, epochs=20, lr=1e-3, batch_size=25,
          seed=0):
    """Adam training at a constant learning rate; deterministic per seed.

    Returns the trained net and a history dict with per-epoch training loss
    and validation PSNR (entry 0 is the untrained network). Aborts with the
    partial history if the loss turns non-finite.
    """
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    optimizer = torch.optim.Adam(net.parameters(), lr=lr)
    history = {
        "epochs": 0,
        "train_loss": [],
        "val_psnr": [evaluate_psnr(net, val_vec)],
        "aborted": False,
    }
    n = len(train_vec)
    for _ in range(epochs):
        net.train()
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            y, x = measure_batch(net, train_vec[idx])
            optimizer.zero_grad()
            loss = training_loss(net, y, x)
            if not torch.isfinite(loss):
                history["aborted"] = True
                return net, history
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss) * len(idx)
        history["train_loss"].append(epoch_loss / n)
        history["val_psnr"].append(evaluate_psnr(net, val_vec))
        history["epochs"] += 1
    return net, history
