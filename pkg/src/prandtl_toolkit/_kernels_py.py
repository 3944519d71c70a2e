"""Pure-Python RK4 for f''' = -f f'' (fallback for the compiled kernel)."""
import numpy as np


def _step(f, f1, f2, h):
    a1, b1, c1 = f1, f2, -f * f2
    g, g1, g2 = f + 0.5 * h * a1, f1 + 0.5 * h * b1, f2 + 0.5 * h * c1
    a2, b2, c2 = g1, g2, -g * g2
    g, g1, g2 = f + 0.5 * h * a2, f1 + 0.5 * h * b2, f2 + 0.5 * h * c2
    a3, b3, c3 = g1, g2, -g * g2
    g, g1, g2 = f + h * a3, f1 + h * b3, f2 + h * c3
    a4, b4, c4 = g1, g2, -g * g2
    return (f + h * (a1 + 2.0 * a2 + 2.0 * a3 + a4) / 6.0,
            f1 + h * (b1 + 2.0 * b2 + 2.0 * b3 + b4) / 6.0,
            f2 + h * (c1 + 2.0 * c2 + 2.0 * c3 + c4) / 6.0)


def rk4_blasius_end(s, eta_max, n):
    h = eta_max / n
    f, f1, f2 = 0.0, 0.0, float(s)
    for _ in range(n):
        f, f1, f2 = _step(f, f1, f2, h)
    return f1


def rk4_blasius(s, eta_max, n):
    h = eta_max / n
    out = np.empty((n + 1, 3))
    f, f1, f2 = 0.0, 0.0, float(s)
    out[0] = f, f1, f2
    for k in range(n):
        f, f1, f2 = _step(f, f1, f2, h)
        out[k + 1] = f, f1, f2
    return out
