"""Least-squares slope fits shared by the rate, spectral and simulation code."""
import numpy as np


def loglog_slope(x, y):
    """Slope and intercept of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, icpt = np.polyfit(lx, ly, 1)
    return float(slope), float(icpt)


def linear_fit(x, y, w=None):
    """Weighted straight-line fit; returns ``(slope, intercept, slope_se, rss)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    W = w.sum()
    xm = np.dot(w, x) / W
    ym = np.dot(w, y) / W
    sxx = np.dot(w, (x - xm) ** 2)
    slope = np.dot(w, (x - xm) * (y - ym)) / sxx
    icpt = ym - slope * xm
    res = y - (icpt + slope * x)
    rss = float(np.dot(w, res * res))
    dof = max(len(x) - 2, 1)
    se = float(np.sqrt(rss / dof / sxx)) if sxx > 0 else float("inf")
    return float(slope), float(icpt), se, rss
