"""Independent reference values used by the tests.

Everything here is written from closed forms, without importing the
package, so a bug in the library cannot hide behind the same bug in its
own test.
"""
import math

import numpy as np


def maxwellian(n, u, theta, m, v):
    """n (m / 2 pi theta)^{3/2} exp(-m |v - u|^2 / 2 theta)."""
    d = np.asarray(v, float) - np.asarray(u, float)
    return n * (m / (2.0 * math.pi * theta)) ** 1.5 * np.exp(-m * np.sum(d * d, axis=-1) / (2.0 * theta))


def maxwellian_moments(n, u, theta, m):
    """(mass, momentum/m, second moment of m|v - u|^2) of one Maxwellian."""
    return n, n * np.asarray(u, float), 3.0 * n * theta


def elastic_collision(v, vs, omega, ma, mb):
    """Post-collision velocities from momentum and energy conservation along omega."""
    v, vs, omega = (np.asarray(x, float) for x in (v, vs, omega))
    g = np.dot(v - vs, omega)
    M = ma + mb
    return v - 2.0 * mb / M * g * omega, vs + 2.0 * ma / M * g * omega


def cross_jacobian(ma, mb):
    """det d v_*'/d v_* at fixed v: reflection of omega-component scaled by (mb - ma)/M."""
    return (mb - ma) / (ma + mb)


def sound_speed_sq(ma, mb):
    """omega^2/|k|^2 of the unit-background acoustic system: 10/(3 (m_A + m_B))."""
    return 10.0 / (3.0 * (ma + mb))


def smoothstep5(t):
    t = min(max(t, 0.0), 1.0)
    return 1.0 - (10.0 * t ** 3 - 15.0 * t ** 4 + 6.0 * t ** 5)


def sphere_monomial(a, b, c):
    """Integral of x^a y^b z^c over the unit sphere (all even exponents)."""
    if a % 2 or b % 2 or c % 2:
        return 0.0
    B = lambda *k: math.prod(math.gamma(0.5 * (x + 1)) for x in k) / math.gamma(0.5 * (sum(k) + 3))
    return 2.0 * B(a, b, c)


def mixture_euler_fluxes(w, ma, mb):
    """Flux in x_1 of (n_A, n_B, rho u, E) at primitive state w; E = rho|u|^2/2 + 3 n theta/2."""
    nA, nB, u1, u2, u3, th = w
    rho = ma * nA + mb * nB
    n = nA + nB
    p = n * th
    u = np.array([u1, u2, u3])
    E = 0.5 * rho * u @ u + 1.5 * p
    mom = rho * u1 * u + np.array([p, 0.0, 0.0])
    return np.concatenate([[nA * u1, nB * u1], mom, [(E + p) * u1]])
