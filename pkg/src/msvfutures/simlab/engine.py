"""Monte Carlo engine for the full model.

Time stepping: the fast factor Y uses its exact OU transition on a grid of
eps/substeps, with the Brownian increment sampled jointly so that the
correlated part of W0 stays consistent; Z uses Euler. eta is frozen at the
left point of each step.

Path blocks draw from Philox streams keyed by (seed, stream, block), so a
result depends only on (spec, seed, path count), never on worker count.
Within a block the second half of the paths is the antithetic mirror of the
first half.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from .model import ModelSpec
from .quadrature import eta_bar_of_z

MIN_STEPS_PER_EPS = 50
BLOCK = 20_000

STREAM_PATHS = 1
STREAM_FUTURE = 2
STREAM_OUTER = 3
STREAM_INNER = 4


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    paths: int
    seed: int
    extras: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class TerminalSample:
    U: np.ndarray
    Y: np.ndarray
    Z: np.ndarray


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), stream, block])))


def required_steps(spec: ModelSpec, horizon: float) -> int:
    return max(1, math.ceil(MIN_STEPS_PER_EPS * horizon / spec.eps - 1e-9))


def _n_steps(spec: ModelSpec, horizon: float) -> int:
    if spec.substeps < MIN_STEPS_PER_EPS:
        raise DomainError(f"substeps={spec.substeps} does not resolve the fast scale; "
                          f"need >= {MIN_STEPS_PER_EPS}")
    return max(1, math.ceil(spec.substeps * horizon / spec.eps - 1e-9))


def _antithetic_normals(rng, n, shape_tail=()):
    half = rng.standard_normal((n // 2,) + shape_tail)
    return np.concatenate([half, -half])


class _Stepper:
    """One-step maps for (Y, Z) plus the pieces of the W0 increment driven by B1, B2."""

    def __init__(self, spec: ModelSpec, dt: float):
        eps = spec.eps
        self.spec = spec
        self.dt = dt
        self.a = math.exp(-dt / eps)
        one_m_a = -math.expm1(-dt / eps)
        one_m_a2 = -math.expm1(-2 * dt / eps)
        var_i = eps * one_m_a2 / 2
        cov = eps * one_m_a
        self.c = cov / math.sqrt(dt)
        self.d = math.sqrt(max(var_i - self.c ** 2, 0.0))
        self.y_scale = spec.beta / math.sqrt(eps)
        self.sq_dt = math.sqrt(dt)
        self.a1, self.a2, self.a3 = spec.w0_loadings()
        self.r12c = math.sqrt(1 - spec.rho12 ** 2)
        self.z_drift = spec.delta * spec.kappa_z * dt
        self.z_vol = math.sqrt(spec.delta) * spec.nu_z

    def step(self, y, z, xi1, xi2, xi3):
        """Advance (y, z); return new state and (dB1, dB2) increments."""
        s = self.spec
        db1 = self.sq_dt * xi1
        db2 = self.sq_dt * xi3
        y_new = s.m_y + (y - s.m_y) * self.a + self.y_scale * (self.c * xi1 + self.d * xi2)
        dw2 = s.rho12 * db1 + self.r12c * db2
        z_new = z + self.z_drift * (s.m_z - z) + self.z_vol * dw2
        return y_new, z_new, db1, db2


def _weights(kappa, t0, t1, n, T_w):
    """Midpoint weights exp(-kappa (T_w - s)) and exact step integrals of exp(-2 kappa (T_w - s))."""
    dt = (t1 - t0) / n
    left = t0 + dt * np.arange(n)
    w1 = np.exp(-kappa * (T_w - (left + 0.5 * dt)))
    w2 = np.exp(-2 * kappa * (T_w - left - dt)) * (-np.expm1(-2 * kappa * dt)) / (2 * kappa)
    return dt, w1, w2


def _integrate(spec, y, z, t0, t1, n_steps, T_w, rng, cap, n, bcast=None, want_bar=False):
    """Accumulate M = int w1 eta (a1 dB1 + a2 dB2) and S = int w2 eta^2 ds over [t0, t1].

    With ``want_bar`` the exponential-martingale control exp(M - Q/2) is also returned.

    ``bcast`` is a trailing shape over which the same noise is shared (common
    random numbers across a node grid); ``y``/``z`` broadcast against it.
    """
    dt, w1, w2 = _weights(spec.kappa, t0, t1, n_steps, T_w)
    st = _Stepper(spec, dt)
    tail = (1,) * len(bcast) if bcast else ()
    M = 0.0
    S = 0.0
    Q = 0.0
    qscale = (st.a1 ** 2 + st.a2 ** 2) * dt
    for k in range(n_steps):
        xi1 = _antithetic_normals(rng, n).reshape((n,) + tail)
        xi2 = _antithetic_normals(rng, n).reshape((n,) + tail)
        xi3 = _antithetic_normals(rng, n).reshape((n,) + tail)
        eta = np.minimum(spec.eta(y, z), cap)
        y, z, db1, db2 = st.step(y, z, xi1, xi2, xi3)
        dwc = st.a1 * db1 + st.a2 * db2
        M = M + w1[k] * eta * dwc
        S = S + w2[k] * eta * eta
        if want_bar:
            Q = Q + (qscale * w1[k] ** 2) * eta * eta
    out = {"y": y, "z": z, "M": M, "S": S}
    if want_bar:
        # exp(M - Q/2) is an exact discrete martingale: mean 1 for any predictable eta
        out["control"] = np.exp(M - 0.5 * Q)
    return out


def _block_sizes(n_paths):
    if n_paths <= 0 or n_paths % 2:
        raise DomainError("path count must be a positive even number (antithetic pairs)")
    sizes = [BLOCK] * (n_paths // BLOCK)
    if n_paths % BLOCK:
        sizes.append(n_paths % BLOCK)
    return sizes


def _map_blocks(fn, args_list, workers):
    if workers and workers > 1 and len(args_list) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, *zip(*args_list)))
    return [fn(*a) for a in args_list]


def _cap(spec: ModelSpec) -> float:
    return spec.eta_cap * eta_bar_of_z(spec, spec.z0)


# ---------------------------------------------------------------- raw paths

def _paths_block(spec, horizon, n, n_steps, seed, b):
    rng = block_rng(seed, STREAM_PATHS, b)
    dt, w1, _ = _weights(spec.kappa, 0.0, horizon, n_steps, horizon)
    st = _Stepper(spec, dt)
    decay = math.exp(-spec.kappa * dt)
    half_decay = math.exp(-0.5 * spec.kappa * dt)
    cap = _cap(spec)
    u = np.full(n, spec.u0, dtype=float)
    y = np.full(n, spec.y_start, dtype=float)
    z = np.full(n, spec.z0, dtype=float)
    for _ in range(n_steps):
        xi1, xi2, xi3, xi4 = (_antithetic_normals(rng, n) for _ in range(4))
        eta = np.minimum(spec.eta(y, z), cap)
        y, z, db1, db2 = st.step(y, z, xi1, xi2, xi3)
        dw0 = st.a1 * db1 + st.a2 * db2 + st.a3 * st.sq_dt * xi4
        u = spec.m + (u - spec.m) * decay + half_decay * eta * dw0
    return u, y, z


def simulate_paths(spec: ModelSpec, horizon: float, n_paths: int, n_steps: int, seed: int,
                   workers: int = 1) -> TerminalSample:
    """Terminal (U, Y, Z) after ``horizon`` years on a uniform grid of ``n_steps`` steps.

    U uses the exact OU decay over each step with eta frozen at the left point.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    need = required_steps(spec, horizon)
    if n_steps < need:
        raise DomainError(f"n_steps={n_steps} does not resolve the fast scale eps={spec.eps}; "
                          f"use n_steps >= {need}")
    sizes = _block_sizes(n_paths)
    parts = _map_blocks(_paths_block, [(spec, horizon, n, n_steps, seed, b) for b, n in enumerate(sizes)], workers)
    return TerminalSample(*(np.concatenate([p[i] for p in parts]) for i in range(3)))


# ---------------------------------------------------------------- future price

def _pair_means(x):
    """Average antithetic partners block by block (block layout: first half, mirrored half)."""
    out, start = [], 0
    for n in _block_sizes(len(x)):
        blk = x[start:start + n]
        h = n // 2
        out.append(0.5 * (blk[:h] + blk[h:]))
        start += n
    return np.concatenate(out)


def _future_block(spec, t, T, n, n_steps, seed, b, cap):
    rng = block_rng(seed, STREAM_FUTURE, b)
    y = np.full(n, spec.y_start)
    z = np.full(n, spec.z0)
    r = _integrate(spec, y, z, t, T, n_steps, T, rng, cap, n, want_bar=True)
    a3 = spec.w0_loadings()[2]
    tau = T - t
    base = spec.seasonality(T) + spec.m + (spec.u0 - spec.m) * math.exp(-spec.kappa * tau)
    return np.exp(base + r["M"] + 0.5 * a3 * a3 * r["S"]), r["control"] * math.exp(base)


def mc_future_price(spec: ModelSpec, T: float, n_paths: int, seed: int, t: float = 0.0,
                    workers: int = 1) -> McEstimate:
    """E[V_T | U_t=u0, Y_t=y0, Z_t=z0].

    The part of W0 orthogonal to (W1, W2) is integrated out exactly per
    path (conditional lognormal mean); antithetic pairs and the constant-vol
    control variate cover the rest. The control is exp(base + M - Q/2) with
    Q the discrete quadratic variation of M; it has a known mean and matches
    the target exactly when eta is constant.
    """
    tau = T - t
    if tau < 0:
        raise DomainError("T must not precede t")
    if tau == 0:
        v = float(np.exp(spec.seasonality(T) + spec.u0))
        return McEstimate(v, 0.0, n_paths, seed)
    n_steps = _n_steps(spec, tau)
    cap = _cap(spec)
    sizes = _block_sizes(n_paths)
    parts = _map_blocks(_future_block, [(spec, t, T, n, n_steps, seed, b, cap) for b, n in enumerate(sizes)],
                        workers)
    x = _pair_means(np.concatenate([p[0] for p in parts]))
    c = _pair_means(np.concatenate([p[1] for p in parts]))
    base = spec.seasonality(T) + spec.m + (spec.u0 - spec.m) * math.exp(-spec.kappa * tau)
    value, se, b = cv_estimate(x, c, math.exp(base))
    return McEstimate(value, se, n_paths, seed, {"n_steps": n_steps, "eta_cap": cap, "cv_coef": b})


def cv_estimate(x, c, c_mean):
    """Regression control-variate mean of x and its standard error."""
    dc = c - np.mean(c)
    sxx = float(np.dot(dc, dc))
    b = float(np.dot(x - np.mean(x), dc) / sxx) if sxx > 0 else 0.0
    adj = x - b * (c - c_mean)
    return float(np.mean(adj)), float(np.std(adj, ddof=1) / math.sqrt(len(adj))), b
