"""Pure numpy version of the binomial series kernel."""
import numpy as np


def binomial_series(x, t, eps, tail_factor, min_terms, kmax):
    """Sum ``binom(t, k) (-x)^k`` over k until the tail estimate drops below eps.

    Mirrors the compiled kernel exactly; see ``_cseries.pyx``.
    """
    x = np.ascontiguousarray(x, dtype=np.complex128)
    n = x.shape[0]
    neg = -x
    total = np.eye(n, dtype=np.complex128)
    power = np.eye(n, dtype=np.complex128)
    coeff = 1.0
    last = 0.0
    k = 0
    while k < kmax:
        k += 1
        power = power @ neg
        frob = float(np.linalg.norm(power))
        coeff = coeff * (t - k + 1) / k
        total += coeff * power
        last = abs(coeff) * frob
        if frob == 0.0:
            break
        if k >= min_terms and last * tail_factor < eps:
            break
    return total, k, last
