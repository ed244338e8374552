"""Fixed-order Gauss-Legendre rules with power-law endpoint substitutions."""

import functools

import numpy as np

GL_ORDER = 32


@functools.lru_cache(maxsize=8)
def gl_nodes(order: int = GL_ORDER):
    """Gauss-Legendre nodes and weights mapped to (0, 1), read-only arrays."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def cell_quad(f, a, b, left_pow=0.0, right_pow=0.0, order=GL_ORDER):
    """Integrate f over [a, b] with known endpoint power behavior.

    f may blow up (or have a non-smooth power factor) like (x-a)^left_pow
    near a and (b-x)^right_pow near b, with powers > -1; 0 means regular.
    The substitution x = a + (b-a) z^{1/(1+p)} turns the offending factor
    into a constant so a fixed-order Gauss rule converges. Both endpoints
    singular -> split at the midpoint.
    """
    if left_pow <= -1.0 or right_pow <= -1.0:
        raise ValueError("endpoint powers must be > -1 for an integrable cell")
    if left_pow != 0.0 and right_pow != 0.0:
        m = 0.5 * (a + b)
        return cell_quad(f, a, m, left_pow=left_pow, order=order) + cell_quad(
            f, m, b, right_pow=right_pow, order=order
        )
    z, w = gl_nodes(order)
    h = b - a
    if left_pow != 0.0:
        g = 1.0 / (1.0 + left_pow)
        x = a + h * z**g
        jac = h * g * z ** (g - 1.0)
    elif right_pow != 0.0:
        g = 1.0 / (1.0 + right_pow)
        x = b - h * z**g
        jac = h * g * z ** (g - 1.0)
    else:
        x = a + h * z
        jac = h
    return float(np.sum(w * f(x) * jac))
