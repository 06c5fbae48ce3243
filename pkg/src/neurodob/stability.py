"""Practical-stability certificate for LQR plus a bounded additive compensation.

With ``Phi_cl = Phi - Gamma K`` Schur and ``P`` solving
``Phi_cl' P Phi_cl - P = -Q0``, the state of

    x[k+1] = Phi_cl x[k] + Gamma w[k] + Gamma2 psi_dot_des[k]

obeys, for ``V(x) = x' P x``, ``|w| <= eps1`` and ``|psi_dot_des| <= eps2``,

    V(x[k+1]) - V(x[k]) <= -lam0/2 |x[k]|^2 + c1 eps1^2 + c2 eps2^2

where ``lam0 = lambda_min(Q0)``.  The constants come from bounding the cross
term with ``2ab <= mu a^2 + b^2/mu`` at ``mu = lam0/2`` and ``(a + b)^2 <= 2a^2 + 2b^2``:

    c1 = 2 alpha^2 / mu + 2 gamma^2,   c2 = 2 beta^2 / mu + 2 delta^2

with ``alpha = |Phi_cl' P Gamma|``, ``beta = |Phi_cl' P Gamma2|``,
``gamma = |P^(1/2) Gamma|`` and ``delta = |P^(1/2) Gamma2|``.

Ultimate bound.  Write ``c = c1 eps1^2 + c2 eps2^2`` and ``r^2 = 2c / lam0``.
Outside the ball ``|x| <= r`` the increment is negative, so V falls.  Inside
it ``V(x[k]) <= lam_max(P) r^2`` and one step adds at most ``c``.  Hence the
level ``V <= lam_max(P) r^2 + c`` is invariant and absorbing, and with
``lam_min(P) |x|^2 <= V``

    eta = sqrt( c / lam_min(P) * (2 lam_max(P) / lam0 + 1) ).

``eta`` is zero when both bounds are zero and grows strictly with ``eps1``.
A run that starts inside the level set (for example at the origin) never
leaves it, so the bound holds at every step, not only in the limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov as _scipy_dlyap

from .exceptions import InvalidParameters, NotConverged, NotSchur
from .lqr import spectral_radius

LYAPUNOV_TOL = 1e-9


def solve_discrete_lyapunov(Phi_cl, Q0, tol=LYAPUNOV_TOL):
    """Return symmetric ``P`` with ``Phi_cl' P Phi_cl - P + Q0 = 0``."""
    Phi_cl = np.atleast_2d(np.asarray(Phi_cl, dtype=float))
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    if Phi_cl.shape != Q0.shape or Phi_cl.shape[0] != Phi_cl.shape[1]:
        raise InvalidParameters("Phi_cl and Q0 must be square and of equal size")
    rho = spectral_radius(Phi_cl)
    if rho >= 1.0:
        raise NotSchur(f"spectral radius {rho:.6f} >= 1")
    P = _scipy_dlyap(Phi_cl.T, Q0)
    P = 0.5 * (P + P.T)
    res = lyapunov_residual(Phi_cl, P, Q0)
    if not res <= tol * max(1.0, float(np.linalg.norm(P, "fro"))):
        raise NotConverged(f"Lyapunov residual {res:.3e} exceeds {tol:.1e}")
    return P


def lyapunov_residual(Phi_cl, P, Q0):
    return float(np.linalg.norm(Phi_cl.T @ P @ Phi_cl - P + Q0, "fro"))


def _sqrtm_spd(P):
    w, V = np.linalg.eigh(P)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


@dataclass(frozen=True, eq=False)
class StabilityCert:
    Phi_cl: np.ndarray
    P: np.ndarray
    Q0: np.ndarray
    alpha: float
    beta: float
    gamma_c: float
    delta_c2: float
    c1: float
    c2: float
    eps1: float
    eps2: float
    eta: float

    @property
    def lam_q0(self):
        return float(np.min(np.linalg.eigvalsh(self.Q0)))

    @property
    def c(self):
        return self.c1 * self.eps1**2 + self.c2 * self.eps2**2

    def V(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.P, x)

    def to_text(self):
        return format_certificate(self)


def ultimate_bound(c1, c2, eps1, eps2, P, Q0):
    lam = np.linalg.eigvalsh(P)
    lam0 = float(np.min(np.linalg.eigvalsh(Q0)))
    c = c1 * eps1**2 + c2 * eps2**2
    return float(np.sqrt(c / lam[0] * (2.0 * lam[-1] / lam0 + 1.0)))


def certify(model, design, eps1, eps2, Q0=None):
    """Build the certificate for ``design.K`` on the discrete ``model``."""
    if eps1 < 0 or eps2 < 0:
        raise InvalidParameters("eps1 and eps2 must be >= 0")
    Phi = np.asarray(model.Phi, dtype=float)
    n = Phi.shape[0]
    G = np.asarray(model.Gamma, dtype=float).reshape(n, 1)
    G2 = np.asarray(model.Gamma2, dtype=float).reshape(n, 1)
    K = np.asarray(design.K, dtype=float).reshape(1, n)
    Q0 = np.eye(n) if Q0 is None else np.asarray(Q0, dtype=float)
    if np.min(np.linalg.eigvalsh(0.5 * (Q0 + Q0.T))) <= 0.0:
        raise InvalidParameters("Q0 must be positive definite")

    Phi_cl = Phi - G @ K
    P = solve_discrete_lyapunov(Phi_cl, Q0)
    P_half = _sqrtm_spd(P)
    alpha = float(np.linalg.norm(Phi_cl.T @ P @ G, 2))
    beta = float(np.linalg.norm(Phi_cl.T @ P @ G2, 2))
    gamma = float(np.linalg.norm(P_half @ G, 2))
    delta = float(np.linalg.norm(P_half @ G2, 2))
    mu = float(np.min(np.linalg.eigvalsh(Q0))) / 2.0
    c1 = 2.0 * alpha**2 / mu + 2.0 * gamma**2
    c2 = 2.0 * beta**2 / mu + 2.0 * delta**2
    eta = ultimate_bound(c1, c2, eps1, eps2, P, Q0)
    return StabilityCert(Phi_cl, P, Q0, alpha, beta, gamma, delta, c1, c2, float(eps1), float(eps2), eta)


def default_eps2(vehicle, road):
    """Supremum of ``|psi_dot_des|`` over the map."""
    return vehicle.Vx * road.max_abs_curvature


@dataclass(frozen=True)
class BoundReport:
    max_norm: float
    eta: float
    holds: bool
    burn_in_steps: int


def empirical_bound_check(cert: StabilityCert, log, burn_in=0.0) -> BoundReport:
    """Largest ``|x[k]|`` after ``burn_in`` seconds, compared with ``eta``."""
    t = np.asarray(log.column("t_s"))
    X = log.states()
    first = int(np.searchsorted(t, t[0] + burn_in - 1e-12)) if len(t) else 0
    tail = X[first:]
    max_norm = float(np.max(np.linalg.norm(tail, axis=1))) if len(tail) else 0.0
    return BoundReport(max_norm, cert.eta, bool(max_norm <= cert.eta), first)


@dataclass(frozen=True)
class DecrementReport:
    steps: int
    worst_slack: float
    violations: int

    @property
    def holds(self):
        return self.violations == 0


def decrement_check(cert: StabilityCert, states, rtol=1e-9) -> DecrementReport:
    """Check the one-step inequality on consecutive rows of ``states``.

    Slack is ``rhs - (V[k+1] - V[k])``; a step counts as a violation when the
    slack is below ``-rtol`` times the size of the terms involved.
    """
    X = np.asarray(states, dtype=float)
    if X.shape[0] < 2:
        return DecrementReport(0, float("inf"), 0)
    V = cert.V(X)
    dV = V[1:] - V[:-1]
    rhs = -0.5 * cert.lam_q0 * np.sum(X[:-1] ** 2, axis=1) + cert.c
    slack = rhs - dV
    scale = np.abs(V[1:]) + np.abs(V[:-1]) + abs(cert.c) + 1e-300
    bad = slack < -rtol * scale
    return DecrementReport(int(dV.size), float(np.min(slack)), int(np.sum(bad)))


def _fmt(v):
    return f"{float(v):.17g}"


def format_certificate(cert: StabilityCert):
    lines = ["# practical-stability certificate"]
    for name in ("eps1", "eps2", "alpha", "beta", "gamma_c", "delta_c2", "c1", "c2", "eta"):
        lines.append(f"{name} = {_fmt(getattr(cert, name))}")
    lines.append(f"lambda_min_Q0 = {_fmt(cert.lam_q0)}")
    lam = np.linalg.eigvalsh(cert.P)
    lines.append(f"lambda_min_P = {_fmt(lam[0])}")
    lines.append(f"lambda_max_P = {_fmt(lam[-1])}")
    lines.append(f"lyapunov_residual = {_fmt(lyapunov_residual(cert.Phi_cl, cert.P, cert.Q0))}")
    for name in ("Phi_cl", "P", "Q0"):
        M = getattr(cert, name)
        for i, row in enumerate(M):
            lines.append(f"{name}[{i}] = " + " ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"
