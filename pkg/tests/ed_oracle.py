"""Exact diagonalization of the XXZ chain in fixed magnetization sectors (test oracle)."""

from __future__ import annotations

import itertools
import math

import numpy as np


def sector_basis(L: int, n_down: int):
    states = []
    for downs in itertools.combinations(range(L), n_down):
        s = 0
        for d in downs:
            s |= 1 << d
        states.append(s)
    states.sort()
    return states, {s: i for i, s in enumerate(states)}


def hamiltonian(L: int, n_down: int, zeta: float, J: float, h: float):
    """J sum (sx sx + sy sy + Delta sz sz) - (h/2) sum sz in the sector; bit 1 = down spin."""
    delta = math.cos(zeta)
    states, index = sector_basis(L, n_down)
    H = np.zeros((len(states), len(states)))
    for i, s in enumerate(states):
        diag = 0.0
        for j in range(L):
            k = (j + 1) % L
            bj = (s >> j) & 1
            bk = (s >> k) & 1
            diag += J * delta * (1 if bj == bk else -1)
            if bj != bk:
                t = s ^ ((1 << j) | (1 << k))
                H[index[t], i] += 2 * J
        sz = L - 2 * n_down
        diag -= 0.5 * h * sz
        H[i, i] = diag
    return H, states, index


def translation(L: int, states, index):
    T = np.zeros((len(states), len(states)))
    for i, s in enumerate(states):
        t = ((s << 1) | (s >> (L - 1))) & ((1 << L) - 1)
        T[index[t], i] = 1.0
    return T


def eigenstate(L, n_down, zeta, J, h, energy, momentum=None, tol=1e-8):
    """Eigenvector with given energy (and lattice momentum, resolving degeneracy)."""
    H, states, index = hamiltonian(L, n_down, zeta, J, h)
    w, v = np.linalg.eigh(H)
    sel = np.where(np.abs(w - energy) < tol)[0]
    if sel.size == 0:
        raise LookupError(f"no eigenvalue near {energy}; closest {w[np.argmin(abs(w - energy))]}")
    sub = v[:, sel]
    if sel.size > 1:
        T = translation(L, states, index)
        tw, tv = np.linalg.eig(sub.conj().T @ T @ sub)
        target = np.exp(1j * momentum)
        j = int(np.argmin(np.abs(tw - target)))
        vec = sub @ tv[:, j]
    else:
        vec = sub[:, 0].astype(complex)
    return vec / np.linalg.norm(vec), states, index


def sigma_plus_site0(vec_lam, st_lam, idx_ups, n_ups):
    """sigma^+_1 |Lambda> expressed in the Upsilon sector basis (flips site 0 from down to up)."""
    out = np.zeros(n_ups, dtype=complex)
    for i, s in enumerate(st_lam):
        if s & 1:
            out[idx_ups[s ^ 1]] += vec_lam[i]
    return out


def sigma_z_site0(vec, states):
    sz = np.array([(-1 if s & 1 else 1) for s in states], dtype=float)
    return sz * vec
