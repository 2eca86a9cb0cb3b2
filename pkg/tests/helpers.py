"""Shared test oracles: finite differences and naive reference kernels.

These stay deliberately independent of the production code paths -- plain
loops and textbook formulas -- so they can arbitrate correctness.
"""

import numpy as np


def fd_gradient(f, x, eps=1e-5):
    """Central finite differences of a scalar function, element by element."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return grad


def assert_close(actual, expected, rtol, atol=1e-7, label=""):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    denom = np.maximum(np.abs(actual), np.abs(expected))
    err = np.abs(actual - expected)
    bad = err > rtol * denom + atol
    assert not bad.any(), (
        f"{label}: {bad.sum()} of {bad.size} entries disagree; "
        f"worst abs err {err.max():.3e}, rel {np.nanmax(err / np.maximum(denom, 1e-12)):.3e}"
    )


def same_pad_amounts(size, kernel, stride):
    """Duplicate of the padding rule, kept local to the tests: output is
    ceil(size/stride) and an odd total pad puts the extra pixel first."""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    before = (total + 1) // 2
    return out, before, total - before


def conv2d_naive(x, w, stride=1):
    """Direct six-loop same-padded cross-correlation. x: (H, W, Cin),
    w: (k, k, Cin, Cout)."""
    h, wd, cin = x.shape
    k, _, _, cout = w.shape
    oh, pt, _ = same_pad_amounts(h, k, stride)
    ow, pl, _ = same_pad_amounts(wd, k, stride)
    out = np.zeros((oh, ow, cout), dtype=np.float64)
    for oy in range(oh):
        for ox in range(ow):
            for ky in range(k):
                for kx in range(k):
                    iy = oy * stride + ky - pt
                    ix = ox * stride + kx - pl
                    if 0 <= iy < h and 0 <= ix < wd:
                        for ci in range(cin):
                            out[oy, ox] += x[iy, ix, ci] * w[ky, kx, ci]
    return out


def matmul_naive(a, b):
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m), dtype=np.float64)
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def krippendorff_alpha_pairwise(true_labels, pred_labels):
    """Alpha via the pairwise-disagreement formulation (no coincidence
    matrix): D_o averages within-unit pair disagreement, D_e all-pairs."""
    values = []
    units = []
    for a, b in zip(true_labels, pred_labels):
        units.append((a, b))
        values.extend((a, b))
    n = len(values)
    d_o = 0.0
    for a, b in units:
        # each unit holds 2 values -> 2 ordered pairs, averaged over (m_u - 1)
        d_o += ((a != b) + (b != a)) / 1.0
    d_o /= n
    d_e = 0.0
    for v in values:
        for u in values:
            d_e += v != u
    d_e /= n * (n - 1)
    if d_e == 0:
        raise ZeroDivisionError("no expected disagreement")
    return 1.0 - d_o / d_e


def make_face_like_image(rng, size=128):
    """Smooth synthetic image in [0, 1]: gradients plus soft blobs."""
    ys, xs = np.mgrid[0:size, 0:size] / (size - 1)
    base = np.stack(
        [
            0.4 + 0.3 * ys,
            0.5 + 0.2 * np.sin(2 * np.pi * xs),
            0.3 + 0.3 * xs * ys,
        ],
        axis=-1,
    )
    noise = rng.normal(0.0, 0.02, base.shape)
    return np.clip(base + noise, 0.0, 1.0).astype(np.float32)
