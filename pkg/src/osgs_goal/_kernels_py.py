"""Pure-numpy element kernels; reference implementation of the compiled ones.

Both backends share one signature. Operator convention: with ``sign=+1``
the element operator is ``a.grad + s`` and its adjoint ``-a.grad + s``;
``sign=-1`` swaps them (dual problem).
"""
import numpy as np


def _geometry(coords, dN):
    J = np.einsum("eai,qaj->eqij", coords, dN)
    dim = coords.shape[2]
    if dim == 1:
        detJ = J[..., 0, 0]
        grad = dN[None, :, :, :] / detJ[:, :, None, None]
    else:
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        Jinv = np.empty_like(J)
        Jinv[..., 0, 0] = J[..., 1, 1] / detJ
        Jinv[..., 1, 1] = J[..., 0, 0] / detJ
        Jinv[..., 0, 1] = -J[..., 0, 1] / detJ
        Jinv[..., 1, 0] = -J[..., 1, 0] / detJ
        grad = np.einsum("qaj,eqji->eqai", dN, Jinv)
    return detJ, grad


def element_matrices(coords, N, dN, w, adv, src, tau, k, s, sign, threads=1):
    """Element blocks of the coupled OSGS system.

    Returns ``K, P, D, M`` of shape (nel, nen, nen), indexed [test, trial],
    and ``F_tau, F`` of shape (nel, nen).
    """
    detJ, grad = _geometry(coords, dN)
    if np.any(detJ <= 0.0):
        raise ValueError("non-positive Jacobian determinant")
    wd = detJ * w[None, :]
    a_grad = np.einsum("eqi,eqai->eqa", adv, grad)
    Lop = sign * a_grad + s * N[None]
    Ladj = -sign * a_grad + s * N[None]
    twd = wd * tau[:, None]
    K = (k * np.einsum("eq,eqai,eqbi->eab", wd, grad, grad)
         + np.einsum("eq,qa,eqb->eab", wd, N, Lop)
         - np.einsum("eq,eqa,eqb->eab", twd, Ladj, Lop))
    P = np.einsum("eq,eqa,qb->eab", twd, Ladj, N)
    D = np.einsum("eq,qa,eqb->eab", wd, N, Lop)
    M = np.einsum("eq,qa,qb->eab", wd, N, N)
    F = np.einsum("eq,eq,qa->ea", wd, src, N)
    F_tau = F - np.einsum("eq,eq,eqa->ea", twd, src, Ladj)
    return K, P, D, M, F_tau, F


def element_estimators(coords, N, dN, w, adv, f, q, tau, s, u, xi, z, xi_d, threads=1):
    """Per-element explicit and implicit goal-oriented estimates.

    ``u, xi, z, xi_d`` are element-gathered nodal values (nel, nen).
    Returns ``(eta1, eta2)``, each of shape (nel,).
    """
    detJ, grad = _geometry(coords, dN)
    wd = detJ * w[None, :]
    uh = u @ N.T
    zh = z @ N.T
    a_gu = np.einsum("eqi,eqai,ea->eq", adv, grad, u)
    a_gz = np.einsum("eqi,eqai,ea->eq", adv, grad, z)
    R = f - (a_gu + s * uh)
    PR = R - xi @ N.T
    Lstar_z = -a_gz + s * zh
    PRs = (q - Lstar_z) - xi_d @ N.T
    eta1 = tau * np.sum(wd * q * PR, axis=1)
    eta2 = tau * np.sum(wd * (PRs * R + Lstar_z * PR), axis=1)
    return eta1, eta2
