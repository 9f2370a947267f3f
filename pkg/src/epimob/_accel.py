"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The active path is chosen at import time. Set ``EPIMOB_DISABLE_NUMBA=1``
to force the numpy implementations; the fallback is also selected
automatically when numba cannot be imported. Both paths are exported
with ``_numpy`` / ``_numba`` suffixes so tests and benchmarks can
compare them directly.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "onward_expectation",
    "onward_expectation_numpy",
    "city_step",
    "city_step_numpy",
]

# Fraction of the mobile (non-hospitalized) pool allowed to leave a
# division in one day; rows demanding more are scaled down.
MAX_OUTFLOW_SHARE = 0.95


def _numba_requested() -> bool:
    flag = os.environ.get("EPIMOB_DISABLE_NUMBA", "").strip().lower()
    if flag in ("1", "true", "yes", "on"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def onward_expectation_numpy(counts: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Expected onward infections per day of infection.

    ``counts[t]`` are new infections on day t, ``weights[d]`` the serial
    interval weight at lag d (index 0 = same-day). Returns E with
    E[t] = sum_{d=1..W} counts[t+d] * weights[d] / den[t+d] where
    den[v] = sum_{e=0..W} counts[v-e] * weights[e]; E[t] = 0 where
    counts[t] == 0 or the denominator vanishes.
    """
    counts = np.asarray(counts, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    n = counts.shape[0]
    w = weights.shape[0] - 1
    den = np.convolve(counts, weights)[:n]
    ratio = np.divide(counts, den, out=np.zeros_like(counts), where=den > 0)
    padded = np.concatenate([ratio, np.zeros(w)])
    # out[t] = sum_k padded[t+k] * weights[1+k]  ->  E[t] = out[t+1]
    corr = np.correlate(padded, weights[1:], mode="valid")
    e = corr[1 : n + 1].copy()
    e[counts <= 0] = 0.0
    return e


def _city_step_core(states, flows, betas, betas_in, gamma, theta, delta):
    """Shared-per-backend reference implementation (vectorized numpy)."""
    k = states.shape[0]
    s, i, h, r = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    mobile = s + i + r

    off = flows.copy()
    np.fill_diagonal(off, 0.0)
    row_tot = off.sum(axis=1)
    cap = MAX_OUTFLOW_SHARE * mobile
    row_scale = np.ones(k)
    need = row_tot > cap
    with np.errstate(divide="ignore", invalid="ignore"):
        row_scale[need] = np.where(row_tot[need] > 0, cap[need] / row_tot[need], 0.0)
    row_scale[(mobile <= 0) & (row_tot > 0)] = 0.0
    off *= row_scale[:, None]
    out_tot = off.sum(axis=1)

    # composition of movers: proportional to [S, I, 0, R] over the mobile pool
    share = np.zeros((k, 4))
    pos = mobile > 0
    share[pos, 0] = s[pos] / mobile[pos]
    share[pos, 1] = i[pos] / mobile[pos]
    share[pos, 3] = r[pos] / mobile[pos]
    outflow = out_tot[:, None] * share

    inflow = off.T @ share  # (K,4), H column stays zero

    n_res = s + i + h + r
    inf_res = np.zeros(k)
    posn = n_res > 0
    inf_res[posn] = betas[posn] * s[posn] * i[posn] / n_res[posn]

    s_p, i_p, r_p = inflow[:, 0], inflow[:, 1], inflow[:, 3]
    n_plus = s_p + i_p + r_p
    inf_in = np.zeros(k)
    posp = n_plus > 0
    inf_in[posp] = betas_in[posp] * s_p[posp] * i_p[posp] / n_plus[posp]

    i_all = i + i_p
    delta_mat = np.empty((k, 4))
    delta_mat[:, 0] = -inf_in - inf_res
    delta_mat[:, 1] = inf_in + inf_res - (gamma + delta) * i_all
    delta_mat[:, 2] = gamma * i_all - theta * h
    delta_mat[:, 3] = delta * i_all + theta * h

    avail = states - outflow + inflow
    delta_scale = np.ones(k)
    for d in range(k):
        neg = delta_mat[d] < 0
        if not neg.any():
            continue
        with np.errstate(divide="ignore"):
            limits = avail[d, neg] / -delta_mat[d, neg]
        smax = limits.min()
        if smax < 1.0:
            delta_scale[d] = max(smax, 0.0)
    new_states = avail + delta_scale[:, None] * delta_mat
    np.maximum(new_states, 0.0, out=new_states)
    new_inf = delta_scale * (inf_in + inf_res)
    return new_states, new_inf, row_scale, delta_scale


def city_step_numpy(states, flows, betas, betas_in, gamma, theta, delta):
    """One day of metapopulation dynamics: move, then apply transitions.

    Returns (new_states (K,4), new_infections (K,), row_scale (K,),
    delta_scale (K,)). ``betas_in`` are the per-division inflow rates.
    """
    return _city_step_core(
        np.asarray(states, dtype=np.float64),
        np.asarray(flows, dtype=np.float64),
        np.asarray(betas, dtype=np.float64),
        np.asarray(betas_in, dtype=np.float64),
        float(gamma),
        float(theta),
        float(delta),
    )


if _numba_requested():
    from numba import njit

    @njit(cache=True)
    def _onward_expectation_jit(counts, weights):  # pragma: no cover - jitted
        n = counts.shape[0]
        w = weights.shape[0] - 1
        den = np.zeros(n)
        for v in range(n):
            emax = min(w, v)
            acc = 0.0
            for e in range(emax + 1):
                acc += counts[v - e] * weights[e]
            den[v] = acc
        e_out = np.zeros(n)
        for t in range(n):
            if counts[t] <= 0:
                continue
            acc = 0.0
            dmax = min(w, n - 1 - t)
            for d in range(1, dmax + 1):
                dv = den[t + d]
                if dv > 0:
                    acc += counts[t + d] * weights[d] / dv
            e_out[t] = acc
        return e_out

    @njit(cache=True)
    def _city_step_jit(states, flows, betas, betas_in, gamma, theta, delta):  # pragma: no cover - jitted
        k = states.shape[0]
        new_states = np.zeros((k, 4))
        outflow = np.zeros((k, 4))
        inflow = np.zeros((k, 4))
        row_scale = np.ones(k)
        delta_scale = np.ones(k)
        new_inf = np.zeros(k)

        out_tot = np.zeros(k)
        for i in range(k):
            tot = 0.0
            for j in range(k):
                if j != i:
                    tot += flows[i, j]
            mobile = states[i, 0] + states[i, 1] + states[i, 3]
            cap = MAX_OUTFLOW_SHARE * mobile
            if tot > cap:
                row_scale[i] = cap / tot if tot > 0 else 0.0
            if mobile <= 0 and tot > 0:
                row_scale[i] = 0.0
            out_tot[i] = tot * row_scale[i]

        for i in range(k):
            mobile = states[i, 0] + states[i, 1] + states[i, 3]
            if mobile <= 0 or out_tot[i] <= 0:
                continue
            outflow[i, 0] = out_tot[i] * states[i, 0] / mobile
            outflow[i, 1] = out_tot[i] * states[i, 1] / mobile
            outflow[i, 3] = out_tot[i] * states[i, 3] / mobile

        for j in range(k):
            mobile = states[j, 0] + states[j, 1] + states[j, 3]
            if mobile <= 0:
                continue
            for i in range(k):
                if i == j:
                    continue
                f = flows[j, i] * row_scale[j]
                if f <= 0:
                    continue
                inflow[i, 0] += f * states[j, 0] / mobile
                inflow[i, 1] += f * states[j, 1] / mobile
                inflow[i, 3] += f * states[j, 3] / mobile

        for i in range(k):
            s = states[i, 0]
            ii = states[i, 1]
            h = states[i, 2]
            r = states[i, 3]
            n_res = s + ii + h + r
            inf_res = betas[i] * s * ii / n_res if n_res > 0 else 0.0
            s_p = inflow[i, 0]
            i_p = inflow[i, 1]
            r_p = inflow[i, 3]
            n_plus = s_p + i_p + r_p
            inf_in = betas_in[i] * s_p * i_p / n_plus if n_plus > 0 else 0.0
            i_all = ii + i_p

            d0 = -inf_in - inf_res
            d1 = inf_in + inf_res - (gamma + delta) * i_all
            d2 = gamma * i_all - theta * h
            d3 = delta * i_all + theta * h

            a0 = s - outflow[i, 0] + s_p
            a1 = ii - outflow[i, 1] + i_p
            a2 = h
            a3 = r - outflow[i, 3] + r_p

            smax = 1.0
            if d0 < 0 and a0 + d0 < 0:
                smax = min(smax, a0 / -d0)
            if d1 < 0 and a1 + d1 < 0:
                smax = min(smax, a1 / -d1)
            if d2 < 0 and a2 + d2 < 0:
                smax = min(smax, a2 / -d2)
            if d3 < 0 and a3 + d3 < 0:
                smax = min(smax, a3 / -d3)
            if smax < 0.0:
                smax = 0.0
            delta_scale[i] = smax

            new_states[i, 0] = max(a0 + smax * d0, 0.0)
            new_states[i, 1] = max(a1 + smax * d1, 0.0)
            new_states[i, 2] = max(a2 + smax * d2, 0.0)
            new_states[i, 3] = max(a3 + smax * d3, 0.0)
            new_inf[i] = smax * (inf_in + inf_res)

        return new_states, new_inf, row_scale, delta_scale

    def onward_expectation(counts, weights):
        return _onward_expectation_jit(
            np.ascontiguousarray(counts, dtype=np.float64),
            np.ascontiguousarray(weights, dtype=np.float64),
        )

    def city_step(states, flows, betas, betas_in, gamma, theta, delta):
        return _city_step_jit(
            np.ascontiguousarray(states, dtype=np.float64),
            np.ascontiguousarray(flows, dtype=np.float64),
            np.ascontiguousarray(betas, dtype=np.float64),
            np.ascontiguousarray(betas_in, dtype=np.float64),
            float(gamma),
            float(theta),
            float(delta),
        )

    BACKEND = "numba"
else:
    onward_expectation = onward_expectation_numpy
    city_step = city_step_numpy
    BACKEND = "numpy"
