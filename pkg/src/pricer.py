"""Black-Scholes and Heston pricing, Greeks and implied volatility.

Every function accepts scalars or broadcastable numpy arrays. `kind` is
'call', 'put', or an array of cp flags (1 put, 0 call) matching the inputs.
Vega is per unit of volatility; Heston nu is per unit of variance.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from src.errors import ParameterError, InversionError, NumericalError
from src.simkit import HestonParams

Numeric = Union[float, np.ndarray]

IV_TOLERANCE = 1e-8
IV_MAX_ITER = 200
IV_BISECTION_WIDTH = 1e-3
IV_SIGMA_MAX = 10.0

GL_PANEL_WIDTH = 50.0
GL_NODES_PER_PANEL = 32
GL_U_MIN = 200.0
GL_U_CAP = 6000.0

SIGMA_Y_DEGENERATE = 1e-8


@dataclass
class BsQuote:
    """Black-Scholes price and sensitivities."""
    price: Numeric
    delta: Numeric
    vega: Numeric
    gamma: Numeric
    vanna: Numeric
    d1: Numeric
    d2: Numeric


@dataclass
class ImpliedVol:
    """Result of a scalar implied-volatility inversion."""
    sigma_impl: float
    iterations: int
    residual: float


def _put_mask(kind, shape) -> np.ndarray:
    if isinstance(kind, str):
        if kind not in ("call", "put"):
            raise ParameterError(f"Unknown option kind {kind!r}")
        return np.full(shape, kind == "put")
    flags = np.broadcast_to(np.asarray(kind), shape)
    return flags.astype(bool)


def _scalar_or_array(x: np.ndarray, scalar: bool) -> Numeric:
    return float(x) if scalar else x


def _prepare(S, K, tau, sigma, r):
    scalar = all(np.ndim(v) == 0 for v in (S, K, tau, sigma, r))
    S, K, tau, sigma, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (S, K, tau, sigma, r)))
    for name, value in (("S", S), ("K", K), ("tau", tau), ("sigma", sigma), ("r", r)):
        if not np.all(np.isfinite(value)):
            raise ParameterError(f"{name} must be finite")
    if np.any(S <= 0) or np.any(K <= 0):
        raise ParameterError("S and K must be positive")
    if np.any(tau <= 0):
        raise ParameterError("tau must be positive")
    if np.any(sigma <= 0):
        raise ParameterError("sigma must be positive")
    return scalar, S, K, tau, sigma, r


def _d1_d2(S, K, tau, sigma, r):
    sqrt_tau = np.sqrt(tau)
    d1 = (np.log(S / K) + (r + 0.5 * sigma ** 2) * tau) / (sigma * sqrt_tau)
    return d1, d1 - sigma * sqrt_tau


def bs_price(S: Numeric, K: Numeric, tau: Numeric, sigma: Numeric, r: Numeric = 0.0, kind="call") -> Numeric:
    """Black-Scholes value; puts share d1/d2 with calls.

    Raises:
        ParameterError: Non-finite or out-of-domain inputs
    """
    scalar, S, K, tau, sigma, r = _prepare(S, K, tau, sigma, r)
    d1, d2 = _d1_d2(S, K, tau, sigma, r)
    discount = K * np.exp(-r * tau)
    call = S * ndtr(d1) - discount * ndtr(d2)
    put = discount * ndtr(-d2) - S * ndtr(-d1)
    price = np.where(_put_mask(kind, S.shape), put, call)
    return _scalar_or_array(price, scalar)


def bs_greeks(S: Numeric, K: Numeric, tau: Numeric, sigma: Numeric, r: Numeric = 0.0, kind="call") -> BsQuote:
    """Black-Scholes price, Delta, Vega, Gamma and Vanna.

    Put Delta is N(d1) - 1. Vega, Gamma and Vanna are shared by calls and puts.
    """
    scalar, S, K, tau, sigma, r = _prepare(S, K, tau, sigma, r)
    d1, d2 = _d1_d2(S, K, tau, sigma, r)
    sqrt_tau = np.sqrt(tau)
    pdf = norm.pdf(d1)
    is_put = _put_mask(kind, S.shape)
    discount = K * np.exp(-r * tau)
    call = S * ndtr(d1) - discount * ndtr(d2)
    put = discount * ndtr(-d2) - S * ndtr(-d1)
    return BsQuote(
        price=_scalar_or_array(np.where(is_put, put, call), scalar),
        delta=_scalar_or_array(ndtr(d1) - is_put, scalar),
        vega=_scalar_or_array(S * pdf * sqrt_tau, scalar),
        gamma=_scalar_or_array(pdf / (S * sigma * sqrt_tau), scalar),
        vanna=_scalar_or_array(-pdf * d2 / sigma, scalar),
        d1=_scalar_or_array(d1, scalar),
        d2=_scalar_or_array(d2, scalar),
    )


def price_bounds(S: Numeric, K: Numeric, tau: Numeric, r: Numeric, kind) -> tuple[np.ndarray, np.ndarray]:
    """No-arbitrage (lower, upper) bounds of a European option price."""
    S, K, tau, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (S, K, tau, r)))
    discount = K * np.exp(-r * tau)
    is_put = _put_mask(kind, S.shape)
    lower = np.where(is_put, np.maximum(discount - S, 0.0), np.maximum(S - discount, 0.0))
    upper = np.where(is_put, discount, S)
    return lower, upper


def implied_vol(price: float, S: float, K: float, tau: float, r: float = 0.0, kind: str = "call") -> ImpliedVol:
    """Invert Black-Scholes for one price.

    Bisection shrinks the bracket to 1e-3, then safeguarded Newton polishes
    until the price residual is below 1e-8.

    Raises:
        InversionError: Price outside the no-arbitrage bounds
        NumericalError: No convergence within 200 iterations
    """
    if not all(math.isfinite(v) for v in (price, S, K, tau, r)):
        raise ParameterError("implied_vol inputs must be finite")
    if tau <= 0:
        raise ParameterError("tau must be positive")
    lower, upper = (float(b) for b in price_bounds(S, K, tau, r, kind))
    if not lower < price < upper:
        raise InversionError(f"price {price} outside no-arbitrage bounds ({lower}, {upper})")

    def f(sigma: float) -> float:
        return bs_price(S, K, tau, sigma, r, kind) - price

    lo, hi = 1e-9, 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > IV_SIGMA_MAX * 100:
            raise InversionError(f"price {price} requires volatility above {hi}")

    iterations = 0
    sigma = 0.5 * (lo + hi)
    while hi - lo > IV_BISECTION_WIDTH and iterations < IV_MAX_ITER:
        iterations += 1
        sigma = 0.5 * (lo + hi)
        if f(sigma) > 0:
            hi = sigma
        else:
            lo = sigma

    sigma = 0.5 * (lo + hi)
    while iterations < IV_MAX_ITER:
        iterations += 1
        residual = f(sigma)
        if abs(residual) < IV_TOLERANCE:
            return ImpliedVol(sigma_impl=sigma, iterations=iterations, residual=abs(residual))
        if residual > 0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_greeks(S, K, tau, sigma, r, kind).vega
        step = sigma - residual / vega if vega > 0 else np.nan
        sigma = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-16:
            break
    residual = f(sigma)
    if abs(residual) < IV_TOLERANCE:
        return ImpliedVol(sigma_impl=sigma, iterations=iterations, residual=abs(residual))
    raise NumericalError("implied volatility did not converge", model="implied_vol",
                         iterations=iterations, residual=residual, sigma=sigma)


def implied_vol_array(price: np.ndarray, S: np.ndarray, K: np.ndarray, tau: np.ndarray,
                      r: np.ndarray, kind) -> np.ndarray:
    """Vectorized inversion; NaN where the price is outside its bounds.

    Same algorithm as implied_vol, run on all rows at once. Rows that fail to
    converge within the iteration limit are returned as NaN.
    """
    price, S, K, tau, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (price, S, K, tau, r)))
    price, S, K, tau, r = (np.array(v, dtype=float).ravel() for v in (price, S, K, tau, r))
    is_put = np.array(_put_mask(kind, price.shape), dtype=bool).ravel()
    lower, upper = price_bounds(S, K, tau, r, is_put)
    valid = (price > lower) & (price < upper) & (tau > 0)
    out = np.full(price.shape, np.nan)
    if not np.any(valid):
        return out
    p, s, k, t, rr, put = (v[valid] for v in (price, S, K, tau, r, is_put))

    def f(sigma):
        return bs_price(s, k, t, sigma, rr, put) - p

    lo = np.full(p.shape, 1e-9)
    hi = np.ones(p.shape)
    for _ in range(10):
        low = f(hi) < 0
        if not np.any(low):
            break
        hi = np.where(low, hi * 2.0, hi)
    hi_ok = f(hi) >= 0

    iterations = 0
    while np.any(hi - lo > IV_BISECTION_WIDTH) and iterations < IV_MAX_ITER:
        iterations += 1
        mid = 0.5 * (lo + hi)
        above = f(mid) > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)

    sigma = 0.5 * (lo + hi)
    done = np.zeros(p.shape, dtype=bool)
    while iterations < IV_MAX_ITER:
        iterations += 1
        residual = f(sigma)
        done = np.abs(residual) < IV_TOLERANCE
        if np.all(done):
            break
        hi = np.where(residual > 0, sigma, hi)
        lo = np.where(residual > 0, lo, sigma)
        vega = bs_greeks(s, k, t, sigma, rr, put).vega
        with np.errstate(divide='ignore', invalid='ignore'):
            step = sigma - residual / vega
        inside = (step > lo) & (step < hi)
        sigma = np.where(done, sigma, np.where(inside, step, 0.5 * (lo + hi)))

    result = np.where(done & hi_ok, sigma, np.nan)
    out[valid] = result
    return out


def _heston_cf_terms(params: HestonParams, phi: np.ndarray):
    """Tau-independent pieces of the little-trap characteristic functions."""
    a = params.kappa * params.theta
    sig2 = params.sigma_y ** 2
    terms = []
    for u, b in ((0.5, params.kappa - params.rho * params.sigma_y), (-0.5, params.kappa)):
        beta = b - params.rho * params.sigma_y * 1j * phi
        d = np.sqrt(beta ** 2 - sig2 * (2 * u * 1j * phi - phi ** 2))
        g = (beta - d) / (beta + d)
        terms.append((beta, d, g))
    return a, sig2, terms


def _gl_nodes(u_max: float, nodes_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    n_panels = max(1, int(math.ceil(u_max / GL_PANEL_WIDTH)))
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.linspace(0.0, n_panels * GL_PANEL_WIDTH, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _u_max(Y: np.ndarray, tau: np.ndarray, theta: float) -> np.ndarray:
    w = np.maximum(np.minimum(Y, theta), 1e-4)
    return np.clip(10.0 / np.sqrt(w * tau), GL_U_MIN, GL_U_CAP)


def _heston_probabilities(params: HestonParams, S, Y, K, tau, r,
                          nodes_per_panel: int = GL_NODES_PER_PANEL,
                          chunk: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """P1 and P2 by composite Gauss-Legendre on [0, u_max].

    [0, 200] with 32 nodes per 50-wide panel is 128 nodes; short maturities
    extend u_max so the integrand has decayed before truncation.
    """
    S, Y, K, tau, r = (np.ravel(v) for v in np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (S, Y, K, tau, r))))
    P1 = np.empty(S.shape)
    P2 = np.empty(S.shape)
    panels = np.ceil(_u_max(Y, tau, params.theta) / GL_PANEL_WIDTH).astype(int)
    for n_panels in np.unique(panels):
        rows = np.flatnonzero(panels == n_panels)
        phi, weights = _gl_nodes(n_panels * GL_PANEL_WIDTH, nodes_per_panel)
        a, sig2, terms = _heston_cf_terms(params, phi)
        for start in range(0, len(rows), chunk):
            idx = rows[start:start + chunk]
            t = tau[idx][:, None]
            log_moneyness = np.log(S[idx] / K[idx])[:, None]
            for j, (beta, d, g) in enumerate(terms):
                e = np.exp(-d[None, :] * t)
                C = r[idx][:, None] * 1j * phi * t + a / sig2 * (
                    (beta - d)[None, :] * t - 2.0 * np.log((1.0 - g[None, :] * e) / (1.0 - g[None, :]))
                )
                D = ((beta - d) / sig2)[None, :] * (1.0 - e) / (1.0 - g[None, :] * e)
                f = np.exp(C + D * Y[idx][:, None] + 1j * phi[None, :] * log_moneyness)
                integrand = np.real(f / (1j * phi[None, :]))
                prob = 0.5 + (integrand @ weights) / np.pi
                (P1 if j == 0 else P2)[idx] = prob
    bad = ~np.isfinite(P1) | ~np.isfinite(P2) | (P1 < -1e-6) | (P1 > 1 + 1e-6) | (P2 < -1e-6) | (P2 > 1 + 1e-6)
    if np.any(bad):
        first = int(np.flatnonzero(bad)[0])
        raise NumericalError("Heston quadrature failed", model="heston_price",
                             rows=int(bad.sum()), S=S[first], Y=Y[first], K=K[first], tau=tau[first],
                             P1=P1[first], P2=P2[first])
    return np.clip(P1, 0.0, 1.0), np.clip(P2, 0.0, 1.0)


def _integrated_vol(params: HestonParams, Y: np.ndarray, tau: np.ndarray) -> np.ndarray:
    k = params.kappa * tau
    mean_var = params.theta + (Y - params.theta) * (1.0 - np.exp(-k)) / k
    return np.sqrt(mean_var)


def _validate_heston(S, Y, K, tau, r):
    scalar = all(np.ndim(v) == 0 for v in (S, Y, K, tau, r))
    S, Y, K, tau, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (S, Y, K, tau, r)))
    for name, value in (("S", S), ("Y", Y), ("K", K), ("tau", tau), ("r", r)):
        if not np.all(np.isfinite(value)):
            raise ParameterError(f"{name} must be finite")
    if np.any(Y <= 0):
        raise ParameterError("Heston variance Y must be positive")
    if np.any(tau <= 0):
        raise ParameterError("tau must be positive")
    if np.any(S <= 0) or np.any(K <= 0):
        raise ParameterError("S and K must be positive")
    return scalar, S, Y, K, tau, r


def heston_price(params: HestonParams, S: Numeric, Y: Numeric, K: Numeric, tau: Numeric,
                 r: Numeric = 0.0, kind="call", nodes_per_panel: int = GL_NODES_PER_PANEL) -> Numeric:
    """Heston price C = S P1 - K exp(-r tau) P2, puts by parity.

    A vanishing vol-of-variance prices with Black-Scholes at the integrated
    variance.

    The probability integrals use composite Gauss-Legendre with
    nodes_per_panel nodes on each 50-wide panel of [0, u_max]. u_max is
    10 / sqrt(min(Y, theta) tau) clipped to [GL_U_MIN, 6000], so long
    maturities get the plain 128-node rule on [0, 200] and short ones a
    longer range where the integrand decays slowly.

    Raises:
        NumericalError: Quadrature produced non-finite or out-of-range probabilities
    """
    scalar, S, Y, K, tau, r = _validate_heston(S, Y, K, tau, r)
    is_put = _put_mask(kind, S.shape)
    discount = K * np.exp(-r * tau)
    if params.sigma_y < SIGMA_Y_DEGENERATE:
        call = bs_price(S, K, tau, _integrated_vol(params, Y, tau), r, "call")
    else:
        P1, P2 = _heston_probabilities(params, S, Y, K, tau, r, nodes_per_panel)
        call = (S.ravel() * P1 - discount.ravel() * P2).reshape(S.shape)
    call = np.maximum(call, np.maximum(S - discount, 0.0))
    price = np.where(is_put, call - S + discount, call)
    return _scalar_or_array(price, scalar)


def heston_delta_vega(params: HestonParams, S: Numeric, Y: Numeric, K: Numeric, tau: Numeric,
                      r: Numeric = 0.0, kind="call",
                      relative_step: float = 1e-4) -> tuple[Numeric, Numeric]:
    """Heston Delta (P1, or P1 - 1 for puts) and variance sensitivity nu.

    nu is the central difference (C(Y + h) - C(Y - h)) / 2h with h = 1e-4 Y;
    calls and puts share it.
    """
    scalar, S, Y, K, tau, r = _validate_heston(S, Y, K, tau, r)
    is_put = _put_mask(kind, S.shape)
    if params.sigma_y < SIGMA_Y_DEGENERATE:
        delta_call = bs_greeks(S, K, tau, _integrated_vol(params, Y, tau), r, "call").delta
    else:
        P1, _ = _heston_probabilities(params, S, Y, K, tau, r)
        delta_call = P1.reshape(S.shape)
    h = relative_step * Y
    up = heston_price(params, S, Y + h, K, tau, r, "call")
    down = heston_price(params, S, Y - h, K, tau, r, "call")
    nu = (np.asarray(up) - np.asarray(down)) / (2.0 * h)
    delta = np.asarray(delta_call) - is_put
    return _scalar_or_array(delta, scalar), _scalar_or_array(nu, scalar)
