"""Per-subgroup rotation of the fitted empirical process.

For a subgroup of ``m`` trials with covariates ``x`` and fitted parameter
``theta`` the outcome ``z`` takes ``D = 2**m`` values with probabilities
``p``.  The rotation ``U`` is a ``D x D`` matrix, unitary in the inner
product weighted by ``diag(p)``, which carries the likelihood-ratio
weighted reference basis ``ell * (1 | b1 | Z_B)`` onto the normalised score
basis ``(1 | M Gamma^{-1/2} | Z_A)``::

    M      = dp / p                         score matrix, D x K
    Gamma  = M' diag(p) M                   information matrix, K x K
    A      = (1 | M Gamma^{-1/2})
    O_A    = diag(p)^{1/2} A                orthonormal columns
    O_P    = O_A completed to an orthogonal matrix
    O_Q    = 2^{-m/2} (B | Z_B)             fixed reference basis
    U      = diag(p)^{-1/2} O_P O_Q' diag(p)^{1/2}
    ell    = sqrt(2^{-m} / p)

Completions use Gram-Schmidt against the canonical basis vectors in index
order, so every result is deterministic.  All heavy routines accept a
leading batch axis of subgroups.
"""
from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegeneracyWarning, IdentifiabilityError, SingularInformationError
from .models import evaluate_model, get_model
from .sampler import outcome_table

EIG_FLOOR = 1e-12
GS_TOL = 1e-8
DEGENERATE_MASS = 1.0 - 1e-9

B1_VECTORS = {
    1: np.array([-1.0, 1.0]),
    2: np.sqrt(2.0) * np.array([-1.0, 0.0, 0.0, 1.0]),
    3: np.array([-3.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 3.0]) / np.sqrt(3.0),
}


# -- subgroup probabilities --------------------------------------------------

def group_probabilities_batch(model, x, theta):
    """Outcome probabilities and their theta-derivatives for many subgroups.

    ``x`` has shape ``(B, m)`` and ``theta`` is a scalar or shape ``(B,)``.
    Returns ``p, dp`` of shape ``(B, 2**m)`` in lexicographic outcome order.
    """
    model = get_model(model)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m = x.shape[1]
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1:
        theta = theta[:, None]
    q0, dq0 = evaluate_model(model, x, theta)
    q0 = np.broadcast_to(q0, x.shape)
    dq0 = np.broadcast_to(dq0, x.shape)
    ys = outcome_table(m)  # (D, m)
    # per-trial factor for each outcome: failure -> q0, success -> 1 - q0
    fac = np.where(ys[None] == 0, q0[:, None, :], 1.0 - q0[:, None, :])
    dfac = np.where(ys[None] == 0, dq0[:, None, :], -dq0[:, None, :])
    p = fac.prod(axis=-1)
    dp = np.zeros_like(p)
    for i in range(m):
        others = np.delete(fac, i, axis=-1).prod(axis=-1)
        dp += dfac[..., i] * others
    return p, dp


def group_probabilities(model, x_vec, theta):
    """Outcome probabilities ``p`` and ``dp/dtheta`` for one subgroup.

    Warns with :class:`DegeneracyWarning` if one outcome carries
    essentially all the mass.
    """
    p, dp = group_probabilities_batch(model, np.asarray(x_vec, dtype=float)[None, :], theta)
    p, dp = p[0], dp[0]
    if p.max() > DEGENERATE_MASS:
        warnings.warn(
            f"subgroup probabilities are degenerate (max p_z = {p.max():.12g})",
            DegeneracyWarning,
            stacklevel=2,
        )
    return p, dp


# -- linear algebra helpers ------------------------------------------------

def complete_orthonormal(Q0, tol=GS_TOL):
    """Extend orthonormal columns ``Q0`` (shape ``(..., D, k)``) to a ``D x D``
    orthogonal matrix.

    Canonical basis vectors are tried in index order; a candidate whose
    residual after projection has norm below ``tol`` is skipped.  Each
    projection is applied twice to keep orthogonality at rounding level.
    """
    Q0 = np.asarray(Q0, dtype=float)
    squeeze = Q0.ndim == 2
    if squeeze:
        Q0 = Q0[None]
    nb, D, k = Q0.shape
    Q = np.zeros((nb, D, D))
    Q[:, :, :k] = Q0
    count = np.full(nb, k)
    rows = np.arange(nb)
    for i in range(D):
        if np.all(count == D):
            break
        r = -np.einsum("bdk,bk->bd", Q, Q[:, i, :])
        r[:, i] += 1.0
        r -= np.einsum("bdk,bk->bd", Q, np.einsum("bdk,bd->bk", Q, r))
        nrm = np.linalg.norm(r, axis=1)
        ok = (nrm > tol) & (count < D)
        sel = rows[ok]
        Q[sel, :, count[sel]] = r[sel] / nrm[sel, None]
        count[sel] += 1
    if np.any(count < D):
        raise np.linalg.LinAlgError("orthogonal completion failed")
    return Q[0] if squeeze else Q


def _inv_sqrt_spd(G):
    """Inverse principal square root of a batch of SPD matrices.

    Returns ``(G^{-1/2}, min_eigenvalue)``.  Eigenvalues at or below the
    floor are replaced by 1 so the output stays finite; callers check
    ``min_eigenvalue`` themselves.
    """
    w, V = np.linalg.eigh(G)
    wmin = w[..., 0]
    w = np.where(w > EIG_FLOOR, w, 1.0)
    return np.einsum("...ik,...k,...jk->...ij", V, 1.0 / np.sqrt(w), V), wmin


def information_matrix(M, p):
    """``Gamma = M' diag(p) M`` for one subgroup.

    Raises
    ------
    SingularInformationError
        If the smallest eigenvalue is at or below 1e-12.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    p = np.asarray(p, dtype=float)
    if M.shape[0] != p.shape[0]:
        raise ValueError("score matrix and probability vector disagree in length")
    G = M.T @ (p[:, None] * M)
    G = 0.5 * (G + G.T)
    wmin = np.linalg.eigvalsh(G)[0]
    if not wmin > EIG_FLOOR:
        raise SingularInformationError(
            f"information matrix is singular (min eigenvalue {wmin:.3g})"
        )
    return G


# -- reference basis ----------------------------------------------------------

@dataclass(frozen=True)
class ReferenceBasis:
    """``B = (1 | b1 | ...)`` and ``O_Q = 2^{-m/2} (B | Z_B)``."""

    m: int
    B: np.ndarray
    O_Q: np.ndarray

    @property
    def K(self) -> int:
        return self.B.shape[1] - 1

    @property
    def Z_B(self) -> np.ndarray:
        return self.O_Q[:, self.K + 1:] * 2.0 ** (self.m / 2)


@lru_cache(maxsize=None)
def build_reference_basis(m: int, K: int = 1) -> ReferenceBasis:
    """Reference basis for subgroups of size ``m``.

    ``b1`` is fixed for m = 1, 2, 3; further columns (K > 1) are taken from
    the deterministic completion.
    """
    if m not in B1_VECTORS:
        raise ValueError(f"m must be 1, 2 or 3, got {m}")
    D = 2**m
    if K + 1 > D:
        raise IdentifiabilityError(f"K={K} parameters cannot be identified with m={m}")
    sq = 2.0 ** (-m / 2)
    start = sq * np.column_stack([np.ones(D), B1_VECTORS[m]])
    O_Q = complete_orthonormal(start)
    B = np.column_stack([np.ones(D), B1_VECTORS[m], O_Q[:, 2 : K + 1] / sq])
    B.setflags(write=False)
    O_Q.setflags(write=False)
    return ReferenceBasis(m, B, O_Q)


# -- the rotation --------------------------------------------------------------

@dataclass
class RotationBatch:
    """Rotation quantities for a batch of subgroups (leading axis)."""

    p: np.ndarray       # (n, D)
    M: np.ndarray       # (n, D, K)
    Gamma: np.ndarray   # (n, K, K)
    ell: np.ndarray     # (n, D)
    A: np.ndarray       # (n, D, K+1)
    O_P: np.ndarray     # (n, D, D)
    U: np.ndarray       # (n, D, D)
    min_eig: np.ndarray  # (n,)

    @property
    def singular(self) -> np.ndarray:
        return ~(self.min_eig > EIG_FLOOR)


def rotate_batch(p, dp, basis: ReferenceBasis, normalize: bool = True) -> RotationBatch:
    """Build ``U`` for every subgroup in the batch.

    ``dp`` is ``(n, D)`` for scalar models or ``(n, D, K)`` in general.
    Subgroups with singular information are flagged in ``min_eig`` instead
    of raising; ``normalize=False`` skips the ``Gamma^{-1/2}`` scaling and
    exists only to exercise the invariant checks.
    """
    p = np.asarray(p, dtype=float)
    dp = np.asarray(dp, dtype=float)
    if dp.ndim == 2:
        dp = dp[..., None]
    return _rotate(p, dp / p[..., None], basis, normalize)


def _rotate(p, M, basis, normalize):
    n, D = p.shape
    K = M.shape[-1]
    if K + 1 > D:
        raise IdentifiabilityError(
            f"K + 1 = {K + 1} exceeds 2**m = {D}: parameters not identifiable"
        )
    if basis.O_Q.shape[0] != D or basis.K != K:
        raise ValueError("reference basis does not match the subgroup size / parameter count")

    G = np.einsum("ndk,nd,ndl->nkl", M, p, M)
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    G_inv_half, wmin = _inv_sqrt_spd(G)
    scores = M @ G_inv_half if normalize else M
    A = np.concatenate([np.ones((n, D, 1)), scores], axis=-1)
    sp = np.sqrt(p)
    O_A = sp[..., None] * A
    O_P = complete_orthonormal(O_A)
    U = (O_P @ basis.O_Q.T) * (sp[:, None, :] / sp[:, :, None])
    ell = np.sqrt(1.0 / (D * p))
    return RotationBatch(p, M, G, ell, A, O_P, U, wmin)


def build_U(p, M, Gamma, basis: ReferenceBasis, normalize: bool = True):
    """Rotation matrix for a single subgroup.

    ``Gamma`` must equal ``M' diag(p) M``; it is checked for singularity here
    and recomputed internally.

    Raises
    ------
    IdentifiabilityError
        If ``K + 1 > 2**m``.
    SingularInformationError
        If ``Gamma`` has an eigenvalue at or below 1e-12.
    """
    p = np.asarray(p, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.shape[1] + 1 > p.shape[0]:
        raise IdentifiabilityError(
            f"K + 1 = {M.shape[1] + 1} exceeds 2**m = {p.shape[0]}: parameters not identifiable"
        )
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    if not np.linalg.eigvalsh(Gamma)[0] > EIG_FLOOR:
        raise SingularInformationError("information matrix is singular")
    rb = _rotate(p[None], M[None], basis, normalize)
    return rb.U[0]


def build_U_m1_closed_form(p0: float, dp0: float) -> np.ndarray:
    """Explicit 2 x 2 rotation for a single trial.

    The branch follows the sign of ``dp0`` (zero counts as positive).
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie strictly between 0 and 1")
    s = 1.0 if dp0 >= 0 else -1.0
    p1 = 1.0 - p0
    r10 = np.sqrt(p1 / p0)
    r01 = np.sqrt(p0 / p1)
    return np.array(
        [
            [np.sqrt(p0) * (1 - s * r10), np.sqrt(p1) * (1 + s * r10)],
            [np.sqrt(p0) * (1 + s * r01), np.sqrt(p1) * (1 - s * r01)],
        ]
    ) / np.sqrt(2.0)


@dataclass(frozen=True)
class RotationBundle:
    m: int
    K: int
    p: np.ndarray
    M: np.ndarray
    Gamma: np.ndarray
    ell: np.ndarray
    U: np.ndarray
    A: np.ndarray
    O_P: np.ndarray

    def to_json(self, **kwargs) -> str:
        """Debug dump of ``p, M, Gamma, ell, U`` for one subgroup."""
        payload = {
            "m": self.m,
            "K": self.K,
            "p": self.p.tolist(),
            "M": self.M.tolist(),
            "Gamma": self.Gamma.tolist(),
            "ell": self.ell.tolist(),
            "U": self.U.tolist(),
        }
        return json.dumps(payload, **kwargs)


def build_bundle(model, x_vec, theta, basis: ReferenceBasis | None = None,
                 normalize: bool = True) -> RotationBundle:
    """All rotation quantities for one subgroup.

    Raises
    ------
    SingularInformationError
        If the subgroup's information matrix is singular.
    """
    x_vec = np.atleast_1d(np.asarray(x_vec, dtype=float))
    m = x_vec.shape[0]
    p, dp = group_probabilities(model, x_vec, theta)
    if basis is None:
        basis = build_reference_basis(m)
    rb = rotate_batch(p[None], dp[None], basis, normalize=normalize)
    if rb.singular[0]:
        raise SingularInformationError(
            f"information matrix is singular at x={x_vec.tolist()}, theta={theta}"
        )
    return RotationBundle(m, rb.M.shape[-1], rb.p[0], rb.M[0], rb.Gamma[0],
                          rb.ell[0], rb.U[0], rb.A[0], rb.O_P[0])


def bundle_residuals(bundle: RotationBundle, basis: ReferenceBasis | None = None) -> dict:
    """Max-norm residuals of the exact identities a bundle must satisfy."""
    if basis is None:
        basis = build_reference_basis(bundle.m, bundle.K)
    p, U, ell, A = bundle.p, bundle.U, bundle.ell, bundle.A
    K1 = bundle.K + 1
    O_A = np.sqrt(p)[:, None] * A
    full_B = np.column_stack([basis.B, basis.Z_B])
    full_A = bundle.O_P / np.sqrt(p)[:, None]
    DP = np.diag(p)
    return {
        "sum_p": abs(p.sum() - 1.0),
        "orthonormal_scores": np.abs(O_A.T @ O_A - np.eye(K1)).max(),
        "maps_basis": np.abs(U @ (ell[:, None] * basis.B) - A).max(),
        "maps_full_basis": np.abs(U @ (ell[:, None] * full_B) - full_A).max(),
        "unitarity": np.abs(U.T @ DP @ U - DP).max(),
        "score_centering": np.abs(p @ bundle.M).max(),
        "maps_ones": np.abs(U @ ell - 1.0).max(),
    }


# -- sign diagnostic ------------------------------------------------------------

class SignRelation(enum.Enum):
    ALL_SAME = "ALL_SAME"
    ALL_OPPOSITE = "ALL_OPPOSITE"
    MIXED = "MIXED"


def default_sign_grid(points: int = 100) -> np.ndarray:
    return 2.0 * np.arange(1, points + 1) / points


def sign_consistency(model1, theta1, model2, theta2, x_grid=None) -> SignRelation:
    """Compare the signs of ``dp0/dtheta`` for two single-trial models.

    Grid points where either derivative is exactly zero carry no sign and are
    ignored.  ``ALL_SAME`` / ``ALL_OPPOSITE`` mean the normalised single-trial
    scores agree up to a global sign, so both models rotate to the same
    limit; ``MIXED`` means that argument does not apply.
    """
    if x_grid is None:
        x_grid = default_sign_grid()
    x_grid = np.asarray(x_grid, dtype=float)
    s1 = np.sign(evaluate_model(get_model(model1), x_grid, theta1)[1])
    s2 = np.sign(evaluate_model(get_model(model2), x_grid, theta2)[1])
    prod = (s1 * s2)[(s1 != 0) & (s2 != 0)]
    if prod.size and np.all(prod > 0):
        return SignRelation.ALL_SAME
    if prod.size and np.all(prod < 0):
        return SignRelation.ALL_OPPOSITE
    return SignRelation.MIXED
