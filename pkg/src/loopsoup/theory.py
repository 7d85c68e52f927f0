"""Closed-form exponent arithmetic for the loop-soup intensity / SLE parameter map."""
import math
from collections import namedtuple

KAPPA_MIN = 8.0 / 3.0
KAPPA_MAX = 4.0

ExponentSet = namedtuple("ExponentSet", "alpha kappa xi2 xi xi2_plus xi_plus")


def alpha_of_kappa(kappa):
    if not KAPPA_MIN < kappa <= KAPPA_MAX:
        raise ValueError(f"kappa={kappa} outside (8/3, 4]")
    return (3 * kappa - 8) * (6 - kappa) / (4 * kappa)


def _check_alpha(alpha):
    if not 0 < alpha <= 0.5:
        raise ValueError(f"alpha={alpha} outside (0, 1/2]")


def kappa_of_alpha(alpha):
    """Root of 3k^2 - (26 - 4a)k + 48 = 0 lying in (8/3, 4].

    The discriminant (26-4a)^2 - 576 factors as (2-4a)(50-4a), and the
    small root is computed as 96 / (b + sqrt(disc)) to avoid cancellation.
    """
    _check_alpha(alpha)
    b = 26.0 - 4.0 * alpha
    disc = max((2.0 - 4.0 * alpha) * (50.0 - 4.0 * alpha), 0.0)
    return 96.0 / (b + math.sqrt(disc))


def arm_exponents_kappa(kappa):
    """(two-arm, four-arm, boundary two-arm, boundary four-arm) at kappa."""
    return (
        1 - kappa / 8,
        (12 - kappa) * (kappa + 4) / (8 * kappa),
        8 / kappa - 1,
        2 * (12 - kappa) / kappa,
    )


def exponents(alpha):
    k = kappa_of_alpha(alpha)
    return ExponentSet(alpha, k, *arm_exponents_kappa(k))


def reference_exponent(kind, alpha):
    e = exponents(alpha)
    return {"two": e.xi2, "four": e.xi, "boundary_two": e.xi2_plus, "boundary_four": e.xi_plus}[kind]


def as_dict(e):
    return dict(e._asdict())
