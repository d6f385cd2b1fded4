"""Material parameters, governing residuals, and the closed-form standing wave.

The coupled system on (x, t) in [0,1]^2, in nondimensional stress-charge form:

    r1 = rho*u_tt - (c_E*u_xx - e33*phi_xx)     mechanical momentum balance
    r2 = eps0*phi_tt + e33*u_xx + eps0*phi_xx   hyperbolic charge equation

with u(0,t) = u(1,t) = 0, u(x,0) = sin(pi x), u_t(x,0) = 0, and
phi(x,0) = 0.5*sin(pi x). The target fields

    u   = sin(pi x) cos(pi t)
    phi = 0.5*sin(pi x) cos(pi t)

solve the system only when the material constants satisfy two linear
constraints (e33 = -eps0 and rho = c_E - 0.5*e33); `derive_consistent_parameters`
performs that derivation so every downstream accuracy claim is testable.

Everything here is pure arithmetic over whatever numeric type is passed in:
numpy arrays for evaluation/oracles, DiffValue expressions inside the loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .model import FieldPair

__all__ = [
    "MaterialParameters",
    "ResidualPair",
    "ExactDerivatives",
    "derive_consistent_parameters",
    "exact_solution",
    "exact_solution_derivatives",
    "residuals",
    "constitutive",
    "coupling_matrix",
    "eigenstructure",
]

_CONSISTENCY_TOL = 1e-12


@dataclass(frozen=True)
class MaterialParameters:
    """Nondimensional material constants.

    `eps0` multiplies both time and space terms of the charge equation as the
    governing form is written; `eps_S` appears only in the constitutive
    post-processing. They default to the same value, which makes the two
    possible readings of the charge equation coincide.

    `consistent=True` asserts the standing-wave compatibility constraints and
    is verified at construction, so a flagged instance cannot lie.
    """

    rho: float
    c_E: float
    e33: float
    eps_S: float
    eps0: float
    consistent: bool = False

    def __post_init__(self):
        for name in ("rho", "c_E", "eps0", "eps_S"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be positive and finite, got {v}")
        if not math.isfinite(self.e33):
            raise ConfigurationError(f"e33 must be finite, got {self.e33}")
        if self.consistent:
            if abs(self.e33 + self.eps0) > _CONSISTENCY_TOL:
                raise ConfigurationError(
                    f"flagged consistent but e33={self.e33} != -eps0={-self.eps0}"
                )
            if abs(self.rho - (self.c_E - 0.5 * self.e33)) > _CONSISTENCY_TOL:
                raise ConfigurationError(
                    f"flagged consistent but rho={self.rho} != c_E - e33/2="
                    f"{self.c_E - 0.5 * self.e33}"
                )

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "c_E": self.c_E,
            "e33": self.e33,
            "eps_S": self.eps_S,
            "eps0": self.eps0,
            "consistent": self.consistent,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MaterialParameters":
        try:
            return cls(
                rho=float(d["rho"]),
                c_E=float(d["c_E"]),
                e33=float(d["e33"]),
                eps_S=float(d["eps_S"]),
                eps0=float(d["eps0"]),
                consistent=bool(d.get("consistent", False)),
            )
        except KeyError as missing:
            raise ConfigurationError(f"material parameters missing field {missing}") from None


@dataclass(frozen=True)
class ResidualPair:
    """Pointwise residuals of the two governing equations."""

    r1: object
    r2: object


def derive_consistent_parameters(
    c_E: float = 1.0, eps0: float = 1.0, eps_S: float | None = None
) -> MaterialParameters:
    """Complete (c_E, eps0) into a parameter set the standing wave solves.

    Substituting the wave into the charge equation gives
    0.5*eps0 + e33 + 0.5*eps0 = 0, hence e33 = -eps0; the momentum equation
    then forces rho = c_E - 0.5*e33. `eps_S` defaults to eps0 so the
    constitutive relation agrees with the governing form.
    """
    if not (c_E > 0 and math.isfinite(c_E)):
        raise ConfigurationError(f"c_E must be positive and finite, got {c_E}")
    if not (eps0 > 0 and math.isfinite(eps0)):
        raise ConfigurationError(f"eps0 must be positive and finite, got {eps0}")
    if eps_S is None:
        eps_S = eps0
    e33 = -eps0
    rho = c_E - 0.5 * e33
    if rho <= 0:
        raise ConfigurationError(f"derived rho={rho} is not positive")
    return MaterialParameters(
        rho=rho, c_E=c_E, e33=e33, eps_S=eps_S, eps0=eps0, consistent=True
    )


def exact_solution(x, t) -> FieldPair:
    """Closed-form standing wave; accepts scalars or numpy arrays."""
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    u = np.sin(np.pi * x) * np.cos(np.pi * t)
    return FieldPair(u=u, phi=0.5 * u)


@dataclass(frozen=True)
class ExactDerivatives:
    """Analytic partial derivatives of the standing wave (test oracle and
    residual-zeroing witness; phi derivatives are half the u ones)."""

    u_x: np.ndarray
    u_t: np.ndarray
    u_xx: np.ndarray
    u_tt: np.ndarray
    phi_x: np.ndarray
    phi_t: np.ndarray
    phi_xx: np.ndarray
    phi_tt: np.ndarray


def exact_solution_derivatives(x, t) -> ExactDerivatives:
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    pi = np.pi
    sx, cx = np.sin(pi * x), np.cos(pi * x)
    st, ct = np.sin(pi * t), np.cos(pi * t)
    u = sx * ct
    u_x = pi * cx * ct
    u_t = -pi * sx * st
    u_xx = -pi * pi * u
    u_tt = -pi * pi * u
    return ExactDerivatives(
        u_x=u_x,
        u_t=u_t,
        u_xx=u_xx,
        u_tt=u_tt,
        phi_x=0.5 * u_x,
        phi_t=0.5 * u_t,
        phi_xx=0.5 * u_xx,
        phi_tt=0.5 * u_tt,
    )


def residuals(u_xx, u_tt, phi_xx, phi_tt, mat: MaterialParameters) -> ResidualPair:
    """The two governing residuals, exactly as the system is written.

    Operands may be numpy arrays or DiffValue expressions; the result type
    follows the operands, so the same function serves oracle checks and the
    differentiable training loss.
    """
    r1 = mat.rho * u_tt - (mat.c_E * u_xx - mat.e33 * phi_xx)
    r2 = mat.eps0 * phi_tt + mat.e33 * u_xx + mat.eps0 * phi_xx
    return ResidualPair(r1=r1, r2=r2)


def constitutive(u_x, phi_x, mat: MaterialParameters):
    """Stress and electric displacement (post-processing, not trained on)."""
    stress = mat.c_E * u_x - mat.e33 * phi_x
    electric_displacement = mat.e33 * u_x + mat.eps_S * phi_x
    return stress, electric_displacement


def coupling_matrix(mat: MaterialParameters) -> np.ndarray:
    """Matrix A with y_tt = A @ y_xx for y = (u, phi): the residuals solved
    for the second time derivatives."""
    return np.array(
        [
            [mat.c_E / mat.rho, -mat.e33 / mat.rho],
            [-mat.e33 / mat.eps0, -1.0],
        ]
    )


def eigenstructure(mat: MaterialParameters):
    """Eigenvalues (descending) and matching unit eigenvectors of the
    coupling matrix, columns sign-fixed so the decomposition is deterministic.

    The leading eigenvalue carries the standing wave; a negative one marks a
    spurious exponentially growing characteristic that the finite-difference
    reference must control.
    """
    A = coupling_matrix(mat)
    w, V = np.linalg.eig(A)
    if np.iscomplexobj(w) and np.max(np.abs(w.imag)) > 1e-12:
        raise ConfigurationError(f"coupling matrix has complex eigenvalues {w}")
    w = w.real
    V = V.real
    order = np.argsort(w)[::-1]
    w = w[order]
    V = V[:, order]
    for j in range(V.shape[1]):
        k = np.argmax(np.abs(V[:, j]))
        if V[k, j] < 0:
            V[:, j] = -V[:, j]
        V[:, j] /= np.linalg.norm(V[:, j])
    return w, V
