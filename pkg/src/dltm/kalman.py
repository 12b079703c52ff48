"""Exact forward-filter / backward-smoother for random-walk Gaussian chains.

The state model is x_0 ~ N(init_mean, init_var), x_t = x_{t-1} + N(0, q)
for t = 1..T, with observations y_t = x_t + N(0, r_t) at observed slots.
A slot is missing (filter skips the update) when its observation is NaN or
its variance is infinite. Chains are scalar; arrays with trailing
dimensions run that many independent chains in one vectorized call.
"""

from __future__ import annotations

import numpy as np


def kalman_smooth_chain(obs, obs_var, drift_var, init_mean=0.0, init_var=1.0):
    """Smoothed posterior means and variances of x_1..x_T given observations.

    obs: array of shape [T] or [T, ...]; NaN entries mark missing slots.
    obs_var: positive observation variances, broadcastable to obs
        (infinite entries also mark missing slots).
    drift_var: positive process variance, scalar or broadcastable to a slot.
    init_mean, init_var: prior on the unobserved anchor state x_0.

    Returns (mean, var) arrays with the same shape as obs.
    """
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim == 0:
        raise ValueError("obs must have a leading time dimension")
    T = obs.shape[0]
    tail = obs.shape[1:]
    obs_var = np.broadcast_to(np.asarray(obs_var, dtype=np.float64), obs.shape)
    q = np.broadcast_to(np.asarray(drift_var, dtype=np.float64), tail)
    m0 = np.broadcast_to(np.asarray(init_mean, dtype=np.float64), tail)
    p0 = np.broadcast_to(np.asarray(init_var, dtype=np.float64), tail)

    if np.any(q <= 0):
        raise ValueError("drift_var must be strictly positive")
    if np.any(p0 < 0):
        raise ValueError("init_var must be non-negative")
    observed = np.isfinite(obs) & np.isfinite(obs_var)
    if np.any(obs_var[observed] <= 0):
        raise ValueError("obs_var must be strictly positive where observed")

    filt_mean = np.empty_like(obs)
    filt_var = np.empty_like(obs)
    pred_var = np.empty_like(obs)

    m = np.array(m0, dtype=np.float64)
    p = np.array(p0, dtype=np.float64)
    for t in range(T):
        p_pred = p + q
        mask = observed[t]
        r = np.where(mask, obs_var[t], 1.0)
        gain = np.where(mask, p_pred / (p_pred + r), 0.0)
        innovation = np.where(mask, np.nan_to_num(obs[t] - m, nan=0.0), 0.0)
        m = m + gain * innovation
        p = (1.0 - gain) * p_pred
        filt_mean[t] = m
        filt_var[t] = p
        pred_var[t] = p_pred

    sm_mean = filt_mean.copy()
    sm_var = filt_var.copy()
    for t in range(T - 2, -1, -1):
        c = filt_var[t] / pred_var[t + 1]
        sm_mean[t] = filt_mean[t] + c * (sm_mean[t + 1] - filt_mean[t])
        sm_var[t] = filt_var[t] + c * c * (sm_var[t + 1] - pred_var[t + 1])
    return sm_mean, sm_var
