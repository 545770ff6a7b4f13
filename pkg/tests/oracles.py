import numpy as np


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return grad


def max_rel_err(a, b, floor: float = 1e-6) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def fake_transactions(n: int = 600, n_fraud: int = 60, seed: int = 0):
    """A raw 31-column table shaped like the public credit-card file.

    Frauds sit in three offset groups so a classifier and the clustering
    stage have something to find.
    """
    import pandas as pd

    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n, 28))
    y = np.zeros(n, dtype=np.int64)
    fraud = rng.choice(n, n_fraud, replace=False)
    y[fraud] = 1
    shifts = np.zeros((3, 28))
    shifts[0, :4], shifts[1, 4:8], shifts[2, 8:12] = 3.0, -3.0, 3.0
    V[fraud] = V[fraud] * 0.6 + shifts[np.arange(n_fraud) % 3]
    df = pd.DataFrame(V, columns=[f"V{i}" for i in range(1, 29)])
    df.insert(0, "Time", np.sort(rng.uniform(0, 172_800, n)).round())
    df["Amount"] = np.round(rng.gamma(1.5, 60.0, n) + 200.0 * y, 2)
    df["Class"] = y
    return df
