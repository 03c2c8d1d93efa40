"""Empirical fibre size of the generalized Gauss map ``(p, v) -> v``."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .integrals import normal_sphere_nodes
from .sampling import ManifoldPatch, _components

__all__ = ["gauss_degree_empirical"]


def gauss_degree_empirical(patch: ManifoldPatch, directions: int = 64, seed: int = 0,
                           normal_nodes: int = 64) -> int:
    """Largest number of separate normal-bundle regions hit by one direction.

    For each test direction ``w`` the pairs ``(p, v)`` with ``v`` within an
    angular tolerance of ``w`` are grouped by position; every group stands
    for one preimage of ``w``.  The directions are ``directions`` random
    unit vectors plus as many node normals, which are regular values with
    probability one.  Coarse sampling can only merge preimages, so the
    result is a lower estimate.
    """
    if patch.size == 0:
        return 0
    U, _ = normal_sphere_nodes(patch.s, normal_nodes)
    gamma = np.einsum("qj,pjx->pqx", U, patch.normals)
    P, Q, n = gamma.shape
    pos = patch.points
    if P > 1:
        dist, nb = cKDTree(pos).query(pos, k=2)
        link = 2.5 * float(np.max(dist[:, 1]))
        cos_nb = np.sum(gamma * gamma[nb[:, 1]], axis=2)
        tol = float(np.max(np.arccos(np.clip(cos_nb, -1.0, 1.0))))
    else:
        link, tol = 0.0, 0.0
    if patch.s == 2:
        tol = max(tol, 2.0 * np.pi / normal_nodes)
    tol = 1.5 * tol + 1e-9
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((directions, n))
    W /= np.linalg.norm(W, axis=1, keepdims=True)
    picks = np.linspace(0, P - 1, num=min(directions, P)).astype(int)
    W = np.vstack([W, gamma[picks, 0]])
    flat = gamma.reshape(-1, n)
    flat_pos = np.repeat(pos, Q, axis=0)
    cos_tol = np.cos(min(tol, np.pi))
    best = 0
    for w in W:
        hit = np.flatnonzero(flat @ w >= cos_tol)
        if hit.size == 0:
            continue
        pairs = cKDTree(flat_pos[hit]).query_pairs(link, output_type="ndarray")
        count = len(np.unique(_components(hit.size, pairs)))
        best = max(best, count)
    return int(best)
