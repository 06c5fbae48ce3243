"""Discrete-time LQR synthesis by fixed-point iteration of the Riccati map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidParameters, NotConverged, UnstableClosedLoop

DEFAULT_Q_DIAG = (1.0, 0.0, 1.0, 0.0)
DEFAULT_R = 10.0


@dataclass(frozen=True, eq=False)
class LqrWeights:
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if Q.shape[0] != Q.shape[1] or not np.allclose(Q, Q.T, rtol=0, atol=1e-12):
            raise InvalidParameters("Q must be square and symmetric")
        if np.min(np.linalg.eigvalsh(Q)) < -1e-12:
            raise InvalidParameters("Q must be positive semidefinite")
        if R.shape[0] != R.shape[1] or np.min(np.linalg.eigvalsh(0.5 * (R + R.T))) <= 0.0:
            raise InvalidParameters("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def diagonal(cls, q_diag=DEFAULT_Q_DIAG, r=DEFAULT_R):
        return cls(np.diag(np.asarray(q_diag, dtype=float)), np.array([[float(r)]]))


@dataclass(frozen=True, eq=False)
class LqrDesign:
    K: np.ndarray
    P_lqr: np.ndarray
    spectral_radius_cl: float
    iterations: int = 0
    residual: float = 0.0

    def command(self, x):
        return lqr_command(self, x)


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(np.atleast_2d(M)))))


def riccati_map(P, Phi, Gamma, Q, R):
    PG = P @ Gamma
    S = R + Gamma.T @ PG
    gain = np.linalg.solve(S, PG.T @ Phi)
    return Q + Phi.T @ P @ Phi - Phi.T @ PG @ gain


def solve_dare(model, weights: LqrWeights, tol=1e-10, max_iter=1_000_000):
    """Iterate ``P <- Q + Phi'P Phi - Phi'P G (R + G'P G)^-1 G'P Phi`` from ``P = Q``.

    ``model`` needs ``Phi`` and ``Gamma`` attributes.  The residual is the
    Frobenius norm of ``P - riccati_map(P)``.
    """
    Phi = np.atleast_2d(np.asarray(model.Phi, dtype=float))
    Gamma = np.asarray(model.Gamma, dtype=float).reshape(Phi.shape[0], -1)
    Q, R = weights.Q, weights.R
    if Q.shape != Phi.shape or R.shape[0] != Gamma.shape[1]:
        raise InvalidParameters("weight dimensions do not match the model")

    P = Q.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        P_next = riccati_map(P, Phi, Gamma, Q, R)
        P_next = 0.5 * (P_next + P_next.T)
        residual = float(np.linalg.norm(P_next - P, "fro"))
        P = P_next
        if not np.all(np.isfinite(P)):
            raise NotConverged("Riccati iteration diverged")
        if residual <= tol:
            break
    else:
        raise NotConverged(f"DARE residual {residual:.3e} > {tol:.1e} after {max_iter} iterations")

    residual = float(np.linalg.norm(P - riccati_map(P, Phi, Gamma, Q, R), "fro"))
    K = np.linalg.solve(R + Gamma.T @ P @ Gamma, Gamma.T @ P @ Phi)
    rho = spectral_radius(Phi - Gamma @ K)
    if rho >= 1.0:
        raise UnstableClosedLoop(f"closed-loop spectral radius {rho:.6f} >= 1")
    return LqrDesign(K, P, rho, it, residual)


def lqr_command(design: LqrDesign, x):
    xv = x.as_array() if hasattr(x, "as_array") else np.asarray(x, dtype=float)
    return float(-(design.K @ xv.reshape(-1))[0])


def format_gain_csv(design: LqrDesign):
    header = ",".join(f"k{i + 1}" for i in range(design.K.shape[1]))
    row = ",".join(f"{v:.17g}" for v in design.K[0])
    return f"{header}\n{row}\n"
