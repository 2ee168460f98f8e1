"""Independent brute-force oracles the implementation is checked against.

Everything here is deliberately written as plain loops over definitions,
sharing no code with the library paths it verifies.
"""

from __future__ import annotations

import numpy as np


def conv2d_loops(x, kernel, bias=None, stride=1, padding=1):
    """Direct summation cross-correlation."""
    cin, h, w = x.shape
    cout, _, kh, kw = kernel.shape
    h_out = (h + 2 * padding - kh) // stride + 1
    w_out = (w + 2 * padding - kw) // stride + 1
    xp = np.zeros((cin, h + 2 * padding, w + 2 * padding))
    xp[:, padding:padding + h, padding:padding + w] = x
    out = np.zeros((cout, h_out, w_out))
    for o in range(cout):
        for i in range(h_out):
            for j in range(w_out):
                acc = 0.0
                for c in range(cin):
                    for a in range(kh):
                        for b in range(kw):
                            acc += kernel[o, c, a, b] * xp[c, i * stride + a, j * stride + b]
                out[o, i, j] = acc
        if bias is not None:
            out[o] += bias[o]
    return out


def cdc_difference_loops(x, kernel):
    """Neighbor-minus-center gradient term, per pixel, in-grid neighbors only."""
    cin, h, w = x.shape
    cout, _, kh, kw = kernel.shape
    out = np.zeros((cout, h, w))
    for o in range(cout):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for c in range(cin):
                    for a in range(kh):
                        for b in range(kw):
                            pi, pj = i + a - kh // 2, j + b - kw // 2
                            if 0 <= pi < h and 0 <= pj < w:
                                acc += kernel[o, c, a, b] * (x[c, pi, pj] - x[c, i, j])
                out[o, i, j] = acc
    return out


def soft_histogram_loops(z, mu, gamma):
    """Literal windowed soft-bin evaluation with zero-padded taps, divisor 9."""
    c, h, w = z.shape
    zp = np.zeros((c, h + 2, w + 2))
    zp[:, 1:h + 1, 1:w + 1] = z
    out = np.zeros((c, h, w))
    for ch in range(c):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for a in range(3):
                    for b in range(3):
                        u = gamma[ch] * (zp[ch, i + a, j + b] - mu[ch])
                        acc += np.exp(-u * u)
                out[ch, i, j] = acc / 9.0
    return out


def gram_loops(z):
    c, h, w = z.shape
    g = np.zeros((c, c))
    for k in range(c):
        for kp in range(c):
            acc = 0.0
            for i in range(h):
                for j in range(w):
                    acc += z[k, i, j] * z[kp, i, j]
            g[k, kp] = acc / (c * h * w)
    return g


def tsr_loops(z1, z2):
    d = gram_loops(z1) - gram_loops(z2)
    return float((d * d).sum())


def auc_pairwise(scores, labels):
    """Attack-beats-bona-fide pair counting, ties worth one half."""
    attacks = [s for s, l in zip(scores, labels) if l == 1]
    bona = [s for s, l in zip(scores, labels) if l == 0]
    twice_wins = 0
    for a in attacks:
        for b in bona:
            if a > b:
                twice_wins += 2
            elif a == b:
                twice_wins += 1
    return twice_wins / (2 * len(attacks) * len(bona))


def _rates_at(scores, labels, threshold):
    attacks = [s for s, l in zip(scores, labels) if l == 1]
    bona = [s for s, l in zip(scores, labels) if l == 0]
    far = sum(1 for s in attacks if s < threshold) / len(attacks)
    frr = sum(1 for s in bona if s >= threshold) / len(bona)
    return far, frr


def eer_sweep(scores, labels):
    """Brute-force threshold sweep; crossing located like the spec defines,
    linearly between the bracketing candidate thresholds."""
    candidates = sorted(set(scores), reverse=True)
    candidates = [candidates[0] + 1.0] + candidates
    rates = [_rates_at(scores, labels, t) for t in candidates]
    for t, (far, frr) in zip(candidates, rates):
        if far == frr:
            return far, t
    for i in range(len(candidates) - 1):
        far1, frr1 = rates[i]
        far2, frr2 = rates[i + 1]
        d1, d2 = far1 - frr1, far2 - frr2
        if (d1 > 0) != (d2 > 0):
            frac = (far1 - frr1) / ((far1 - frr1) - (far2 - frr2))
            value = far1 + frac * (far2 - far1)
            threshold = candidates[i] + frac * (candidates[i + 1] - candidates[i])
            return value, threshold
    raise AssertionError("no crossing found")


def hter_counting(scores, labels, threshold):
    far, frr = _rates_at(scores, labels, threshold)
    return (far + frr) / 2.0


def acer_counting(scores, labels, threshold=0.5):
    attacks = [s for s, l in zip(scores, labels) if l == 1]
    bona = [s for s, l in zip(scores, labels) if l == 0]
    apcer = sum(1 for s in attacks if s < threshold) / len(attacks)
    bpcer = sum(1 for s in bona if s >= threshold) / len(bona)
    return apcer, bpcer, (apcer + bpcer) / 2.0
