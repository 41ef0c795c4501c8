"""Levi-Civita connection of alpha and the r/s decomposition of nabla beta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularMetricError
from .fields import MetricSpec


@dataclass(frozen=True)
class Christoffel:
    gamma: np.ndarray  # gamma[i, j, k] = Gamma^i_{jk}


@dataclass(frozen=True)
class RSData:
    b2: float
    b_low: np.ndarray
    b_up: np.ndarray
    nabla_b: np.ndarray  # nabla_b[i, j] = b_{i|j}
    r: np.ndarray
    s: np.ndarray
    r_vec: np.ndarray
    s_vec: np.ndarray
    s_up: np.ndarray
    a: np.ndarray
    a_inv: np.ndarray

    def contractions(self, y) -> tuple[float, float, float]:
        """(r_0, s_0, r_00) for a tangent vector y."""
        y = np.asarray(y, dtype=float)
        return float(self.r_vec @ y), float(self.s_vec @ y), float(y @ self.r @ y)


def inverse(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    if n == 2:
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        if not det > 0:
            raise SingularMetricError(f"det a = {det} <= 0")
        return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det
    if not np.linalg.det(a) > 0:
        raise SingularMetricError("det a <= 0")
    return np.linalg.inv(a)


def christoffel_from_jet(a: np.ndarray, da: np.ndarray) -> Christoffel:
    """Gamma^i_jk = 1/2 a^il (d_j a_lk + d_k a_lj - d_l a_jk); da[l, k, j] = d_j a_lk."""
    ainv = inverse(a)
    lower = 0.5 * (
        np.einsum("lkj->ljk", da) + np.einsum("ljk->ljk", da) - np.einsum("jkl->ljk", da)
    )
    return Christoffel(np.einsum("il,ljk->ijk", ainv, lower))


def christoffel(spec: MetricSpec, x) -> Christoffel:
    aj = spec.a_jet(x)
    return christoffel_from_jet(aj.value, aj.gradient)


def rs_decompose(spec: MetricSpec, x) -> RSData:
    aj = spec.a_jet(x)
    bj = spec.b_jet(x)
    a = aj.value
    ainv = inverse(a)
    gam = christoffel_from_jet(a, aj.gradient).gamma
    b = bj.value
    # b_{i|j} = d_j b_i - Gamma^k_ij b_k
    nabla = bj.gradient - np.einsum("kij,k->ij", gam, b)
    r = 0.5 * (nabla + nabla.T)
    s = 0.5 * (nabla - nabla.T)
    b_up = ainv @ b
    r_vec = b_up @ r
    s_vec = b_up @ s
    return RSData(
        b2=float(b @ b_up), b_low=b, b_up=b_up, nabla_b=nabla, r=r, s=s,
        r_vec=r_vec, s_vec=s_vec, s_up=ainv @ s_vec, a=a, a_inv=ainv,
    )
