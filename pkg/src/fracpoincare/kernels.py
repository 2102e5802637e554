"""Jitted inner loops for pairwise energy/gradient sums and the 1D
cell-pair weight table.

The discrete energy couples every node pair, so these loops are O(N^2)
and dominate runtime; they are compiled with numba and parallelized
over rows.  Results are deterministic for a fixed thread count (static
scheduling, fixed reduction order).  The pure-numpy reference
implementations used to validate them live in the test suite.

Exponent dispatch: the hot loops branch on a small integer code so the
common exponents avoid `pow`:

    code 2: p = 2        (plain products)
    code 3: p = 3        (abs * square)
    code 1: p = 3/2      (sqrt)
    code 0: anything else (pow)
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

__all__ = [
    "exponent_code",
    "wtab_1d",
    "pair_energy_1d",
    "pair_energy_grad_1d",
    "pair_energy_2d",
    "pair_energy_grad_2d",
    "chord_energies",
]


def exponent_code(p: float) -> int:
    if p == 2.0:
        return 2
    if p == 3.0:
        return 3
    if p == 1.5:
        return 1
    return 0


@njit(cache=True, inline="always")
def _e_term(d, p, code):
    if code == 2:
        return d * d
    a = abs(d)
    if code == 3:
        return a * a * a
    if code == 1:
        return a * np.sqrt(a)
    return a ** p


@njit(cache=True, inline="always")
def _phi_term(d, p, code):
    # |d|^(p-2) d, with phi(0) = 0 for every p > 1.
    if code == 2:
        return d
    a = abs(d)
    if code == 3:
        return a * d
    if a == 0.0:
        return 0.0
    if code == 1:
        return d / np.sqrt(a)
    return a ** (p - 2.0) * d


# ---------------------------------------------------------------------------
# 1D cell-pair weights.
#
# For cells of width h at center offset k*h the pair integral
#   int int_{cell_i x cell_j} |x-y|^(-1-sp) dx dy
# reduces to the hat-weighted line integral
#   int_{(k-1)h}^{(k+1)h} (h - |t - k h|) t^(-1-sp) dt,
# which has elementary antiderivatives.  The adjacent-cell integral
# (k=1) diverges once sp >= 1; that single offset falls back to a
# subdivided midpoint rule with `subdiv` subcells per cell.
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _int_pow_m_beta(a, b, beta):
    # int_a^b t^-beta dt for beta > 1.
    return (b ** (1.0 - beta) - a ** (1.0 - beta)) / (1.0 - beta)


@njit(cache=True, inline="always")
def _int_pow_1m_beta(a, b, beta):
    # int_a^b t^(1-beta) dt; beta = 2 is the log case.
    if beta == 2.0:
        return np.log(b) - np.log(a)
    return (b ** (2.0 - beta) - a ** (2.0 - beta)) / (2.0 - beta)


@njit(cache=True)
def _hat_integral_exact(k, h, sp):
    """Exact hat-weighted integral for center offset k >= 1.

    Finite only when k >= 2 or sp < 1; the caller routes the divergent
    adjacent case elsewhere.
    """
    beta = 1.0 + sp
    lo = (k - 1.0) * h
    mid = k * h
    hi = (k + 1.0) * h
    if k == 1:
        # lo = 0: the linear hat kills the lo-anchored term and the
        # remaining power integral converges for beta < 2.
        p1 = mid ** (2.0 - beta) / (2.0 - beta)
    else:
        p1 = _int_pow_1m_beta(lo, mid, beta) - lo * _int_pow_m_beta(lo, mid, beta)
    p2 = hi * _int_pow_m_beta(mid, hi, beta) - _int_pow_1m_beta(mid, hi, beta)
    return p1 + p2


@njit(cache=True)
def _adjacent_subdivided(h, sp, subdiv):
    """Midpoint rule on subdiv x subdiv subcell pairs for the adjacent
    offset; finite for every sp in (0, p)."""
    hs = h / subdiv
    beta = 1.0 + sp
    total = 0.0
    for d in range(-(subdiv - 1), subdiv):
        cnt = subdiv - abs(d)
        dist = h + d * hs
        total += cnt * hs * hs * dist ** (-beta)
    return total


@njit(cache=True)
def wtab_1d(n, h, sp, radius, subdiv):
    """Unnormalized pair-weight table w[k], k = 0..n-1, for a uniform
    1D grid of n cells of width h.

    w[0] = 0 (no self-interaction).  Offsets with k < radius use the
    exact hat integral (subdivided midpoint for k = 1 when sp >= 1);
    offsets with k >= radius use the midpoint rule h^2 (k h)^(-1-sp).
    The caller multiplies by the kernel normalization C/2.
    """
    w = np.zeros(n)
    beta = 1.0 + sp
    for k in range(1, n):
        if k < radius:
            if k == 1 and sp >= 1.0:
                w[k] = _adjacent_subdivided(h, sp, subdiv)
            else:
                w[k] = _hat_integral_exact(k, h, sp)
        else:
            w[k] = h * h * (k * h) ** (-beta)
    return w


# ---------------------------------------------------------------------------
# Pairwise sums, 1D.
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True, fastmath=True)
def pair_energy_1d(u, w, p, code):
    """Sum over ordered pairs i != j of w[|i-j|] |u_i - u_j|^p
    (equals twice the sum over unordered pairs)."""
    n = u.shape[0]
    total = 0.0
    for i in prange(n):
        acc = 0.0
        for j in range(i + 1, n):
            acc += w[j - i] * _e_term(u[i] - u[j], p, code)
        total += acc
    return 2.0 * total


@njit(cache=True, parallel=True, fastmath=True)
def pair_energy_grad_1d(u, w, p, code, g):
    """Fused ordered-pair energy plus gradient accumulation.

    Fills g_i = 2 p sum_{j != i} w[|i-j|] |u_i-u_j|^(p-2) (u_i-u_j)
    and returns the ordered-pair energy.
    """
    n = u.shape[0]
    total = 0.0
    for i in prange(n):
        acc_e = 0.0
        acc_g = 0.0
        ui = u[i]
        for j in range(n):
            if j == i:
                continue
            d = ui - u[j]
            wv = w[abs(j - i)]
            acc_e += wv * _e_term(d, p, code)
            acc_g += wv * _phi_term(d, p, code)
        g[i] = 2.0 * p * acc_g
        total += acc_e
    return total


# ---------------------------------------------------------------------------
# Pairwise sums, 2D.
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True, fastmath=True)
def pair_energy_2d(u, w, p, code):
    """Ordered-pair energy on a 2D lattice; w indexed by (|d1|, |d2|)."""
    n1, n2 = u.shape
    total = 0.0
    for i1 in prange(n1):
        acc = 0.0
        for j1 in range(i1, n1):
            wrow = w[j1 - i1]
            urow = u[j1]
            j2lo = 0
            for i2 in range(n2):
                ui = u[i1, i2]
                if j1 == i1:
                    j2lo = i2 + 1
                for j2 in range(j2lo, n2):
                    acc += wrow[abs(j2 - i2)] * _e_term(ui - urow[j2], p, code)
        total += acc
    return 2.0 * total


@njit(cache=True, parallel=True, fastmath=True)
def pair_energy_grad_2d(u, w, p, code, g):
    """Fused 2D ordered-pair energy plus gradient accumulation."""
    n1, n2 = u.shape
    total = 0.0
    for i1 in prange(n1):
        acc_e = 0.0
        for i2 in range(n2):
            ui = u[i1, i2]
            acc_g = 0.0
            for j1 in range(n1):
                wrow = w[abs(j1 - i1)]
                urow = u[j1]
                for j2 in range(n2):
                    if j1 == i1 and j2 == i2:
                        continue
                    d = ui - urow[j2]
                    wv = wrow[abs(j2 - i2)]
                    acc_e += wv * _e_term(d, p, code)
                    acc_g += wv * _phi_term(d, p, code)
            g[i1, i2] = 2.0 * p * acc_g
        total += acc_e
    return total


# ---------------------------------------------------------------------------
# Folded 2D sums for per-axis mirror-symmetric functions.
#
# On a box the assembled operator commutes with the reflection about
# each axis midpoint, so the first eigenfunction is symmetric in every
# axis.  For symmetric u (and even cell counts) the pair sums over the
# full lattice collapse onto the lower quarter with a four-term weight
# lookup, which quarters the dominant O(N^2) cost.  uq is the quarter
# block u[:n1/2, :n2/2]; weights of the mirrored partners sit at offset
# (n-1) - i - j along the folded axis.
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True, fastmath=True)
def pair_energy_2d_folded(uq, w, n1, n2, p, code):
    """Full-lattice ordered-pair energy of the symmetric extension of
    uq; w is the full offset table."""
    h1, h2 = uq.shape
    total = 0.0
    for i1 in prange(h1):
        acc = 0.0
        for i2 in range(h2):
            ui = uq[i1, i2]
            for j1 in range(h1):
                a1 = abs(i1 - j1)
                m1 = n1 - 1 - i1 - j1
                for j2 in range(h2):
                    d = ui - uq[j1, j2]
                    if d == 0.0:
                        continue
                    a2 = abs(i2 - j2)
                    m2 = n2 - 1 - i2 - j2
                    wv = w[a1, a2] + w[m1, a2] + w[a1, m2] + w[m1, m2]
                    acc += wv * _e_term(d, p, code)
        total += acc
    return 4.0 * total


@njit(cache=True, parallel=True, fastmath=True)
def pair_energy_grad_2d_folded(uq, w, n1, n2, p, code, gq):
    """Fused folded energy plus quarter-block gradient for symmetric
    functions; the caller mirrors gq back onto the full lattice."""
    h1, h2 = uq.shape
    total = 0.0
    for i1 in prange(h1):
        acc_e = 0.0
        for i2 in range(h2):
            ui = uq[i1, i2]
            acc_g = 0.0
            for j1 in range(h1):
                a1 = abs(i1 - j1)
                m1 = n1 - 1 - i1 - j1
                for j2 in range(h2):
                    d = ui - uq[j1, j2]
                    if d == 0.0:
                        continue
                    a2 = abs(i2 - j2)
                    m2 = n2 - 1 - i2 - j2
                    wv = w[a1, a2] + w[m1, a2] + w[a1, m2] + w[m1, m2]
                    acc_e += wv * _e_term(d, p, code)
                    acc_g += wv * _phi_term(d, p, code)
            gq[i1, i2] = 2.0 * p * acc_g
        total += acc_e
    return 4.0 * total


# ---------------------------------------------------------------------------
# Chord energies for the directional decomposition.
# ---------------------------------------------------------------------------


@njit(cache=True, parallel=True, fastmath=True)
def chord_energies(V, hcs, sp, p, code, radius, subdiv, out):
    """Per-chord double line integrals.

    V[b, k] holds the function values at the midpoints of the k-th cell
    of chord b, hcs[b] the chord cell width (0 marks an empty chord).
    out[b] receives sum over ordered cell pairs of
    w(|i-j|; hcs[b]) |V_bi - V_bj|^p with the same quadrature rule as
    the 1D assembly (no kernel normalization).
    """
    nb, L = V.shape
    for b in prange(nb):
        h = hcs[b]
        if h <= 0.0:
            out[b] = 0.0
            continue
        w = wtab_1d(L, h, sp, radius, subdiv)
        acc = 0.0
        for i in range(L):
            vi = V[b, i]
            for j in range(i + 1, L):
                acc += w[j - i] * _e_term(vi - V[b, j], p, code)
        out[b] = 2.0 * acc
