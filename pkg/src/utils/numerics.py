"""Small numerical building blocks shared by the solvers and the oracle."""
from functools import lru_cache

import numpy as np
from scipy import optimize

from src.utils.errors import NoConvergence

INV_PHI = (np.sqrt(5) - 1) / 2  # 1/phi
INV_PHI_SQ = (3 - np.sqrt(5)) / 2  # 1/phi^2


@lru_cache(maxsize=16)
def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1]; read-only so the cached arrays stay intact."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def mapped_nodes(lo: float, hi: float, order: int):
    """Gauss-Legendre nodes and weights mapped onto [lo, hi]."""
    x, w = gauss_legendre(order)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def golden_section_max(obj, a: float, b: float, tol: float = 1e-10):
    """Golden-section search for the maximum of a unimodal function on [a, b].

    Returns (x, lo, hi): the estimate and the final bracket around it.
    Equal values keep the left half, so flat right tails never pull the
    search away from an interior peak.
    """
    dist = b - a
    if dist <= tol:
        return (a + b) / 2, a, b

    n = int(np.ceil(np.log(tol / dist) / np.log(INV_PHI)))

    c = a + INV_PHI_SQ * dist
    d = a + INV_PHI * dist
    yc = obj(c)
    yd = obj(d)

    for _ in range(n - 1):
        if yc >= yd:
            b = d
            d = c
            yd = yc
            dist = INV_PHI * dist
            c = a + INV_PHI_SQ * dist
            yc = obj(c)
        else:
            a = c
            c = d
            yc = yd
            dist = INV_PHI * dist
            d = a + INV_PHI * dist
            yd = obj(d)

    if yc >= yd:
        return (a + d) / 2, a, d
    return (c + b) / 2, c, b


def bisect_root(fn, lo: float, hi: float, xtol: float = 1e-12, maxiter: int = 200) -> float:
    """scipy bisection with NoConvergence instead of RuntimeError."""
    try:
        return float(optimize.bisect(fn, lo, hi, xtol=xtol, maxiter=maxiter))
    except RuntimeError as exc:
        raise NoConvergence(f"bisection on [{lo:.6g}, {hi:.6g}] did not converge: {exc}") from exc


def first_sign_change(values):
    """Index i of the first pair (values[i], values[i+1]) going from < 0 to >= 0, else None."""
    values = np.asarray(values, dtype=float)
    hits = np.flatnonzero((values[:-1] < 0) & (values[1:] >= 0))
    return int(hits[0]) if hits.size else None
