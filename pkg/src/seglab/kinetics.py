"""Reaction kinetics for the two-species competition system.

A Kinetics object bundles the intraspecific reaction terms f (first species)
and g (second species), their derivatives, and the interspecific weight alpha.
From these it derives the combined nonlinearity used by the segregation limit,

    h(w) = alpha * f(w+/alpha) - g(-w-),      w+ = max(w, 0), w- = min(w, 0),

its derivative h', and the primitive H with H(0) = 0. Both species' reactions
must vanish at zero density; the classical hypotheses additionally ask f, g > 0
on (0, 1) and < 0 above 1, which validate_hypothesis_a checks by sampling
rather than at construction (test kinetics like f = g = 0 are legitimate
objects that simply fail the report).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import quad

ArrayFn = Callable[[np.ndarray], np.ndarray]

#: |f(0)| and |g(0)| above this are rejected at construction.
ZERO_TOL = 1e-12

#: Derivative jump at w = 0 below this is treated as no kink.
KINK_TOL = 1e-12


@dataclass(frozen=True)
class Kinetics:
    """Reaction pair (f, g) with interspecific weight alpha.

    f_coeffs / g_coeffs hold ascending polynomial coefficients when the pair is
    polynomial (the logistic default is coefficient form [0, 1, -1]); they stay
    None for arbitrary callables, in which case H falls back to quadrature and
    the time stepper uses its reference (non-jitted) path.
    """

    alpha: float
    f: ArrayFn
    g: ArrayFn
    f_prime: ArrayFn
    g_prime: ArrayFn
    kind: str = "custom"
    f_coeffs: np.ndarray | None = None
    g_coeffs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not np.isfinite(self.alpha) or self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        f0 = float(self.f(np.array(0.0)))
        g0 = float(self.g(np.array(0.0)))
        if abs(f0) > ZERO_TOL or abs(g0) > ZERO_TOL:
            raise ValueError(
                f"reaction terms must vanish at zero density: f(0)={f0:.3e}, g(0)={g0:.3e}"
            )

    # -- constructors ---------------------------------------------------------

    @classmethod
    def logistic(cls, alpha: float = 1.0) -> "Kinetics":
        """f(s) = g(s) = s(1 - s)."""
        return cls.from_polynomials([0.0, 1.0, -1.0], [0.0, 1.0, -1.0],
                                    alpha=alpha, kind="logistic")

    @classmethod
    def from_polynomials(cls, f_coeffs: Sequence[float], g_coeffs: Sequence[float],
                         alpha: float = 1.0, kind: str = "polynomial") -> "Kinetics":
        """Build from ascending coefficient lists (constant term first)."""
        fc = np.asarray(f_coeffs, dtype=float)
        gc = np.asarray(g_coeffs, dtype=float)
        if fc.ndim != 1 or gc.ndim != 1 or fc.size == 0 or gc.size == 0:
            raise ValueError("coefficient lists must be non-empty 1-d sequences")
        fpc = npoly.polyder(fc) if fc.size > 1 else np.zeros(1)
        gpc = npoly.polyder(gc) if gc.size > 1 else np.zeros(1)
        return cls(
            alpha=float(alpha),
            f=lambda s, c=fc: npoly.polyval(s, c),
            g=lambda s, c=gc: npoly.polyval(s, c),
            f_prime=lambda s, c=fpc: npoly.polyval(s, c),
            g_prime=lambda s, c=gpc: npoly.polyval(s, c),
            kind=kind,
            f_coeffs=fc,
            g_coeffs=gc,
        )

    @classmethod
    def from_callables(cls, f: ArrayFn, g: ArrayFn, f_prime: ArrayFn,
                       g_prime: ArrayFn, alpha: float = 1.0) -> "Kinetics":
        return cls(alpha=float(alpha), f=f, g=g, f_prime=f_prime, g_prime=g_prime)

    # -- combined nonlinearity ------------------------------------------------

    def h(self, w: np.ndarray | float) -> np.ndarray | float:
        """alpha * f(w+/alpha) - g(-w-); reduces to alpha*f(w/alpha) for w >= 0."""
        w = np.asarray(w, dtype=float)
        pos = np.maximum(w, 0.0) / self.alpha
        neg = -np.minimum(w, 0.0)
        out = self.alpha * self.f(pos) - self.g(neg)
        return out if out.ndim else float(out)

    def h_prime(self, w: np.ndarray | float) -> np.ndarray | float:
        """Piecewise derivative of h; at w = 0 the two one-sided limits are averaged."""
        w = np.asarray(w, dtype=float)
        dpos = self.f_prime(np.maximum(w, 0.0) / self.alpha)
        dneg = self.g_prime(-np.minimum(w, 0.0))
        out = np.where(w > 0.0, dpos, np.where(w < 0.0, dneg, 0.5 * (dpos + dneg)))
        return out if out.ndim else float(out)

    @property
    def h_prime_jump_at_zero(self) -> float:
        """|f'(0) - g'(0)|, the kink size of h' at the sign change."""
        return abs(float(self.f_prime(np.array(0.0))) - float(self.g_prime(np.array(0.0))))

    @property
    def has_kink_at_zero(self) -> bool:
        return self.h_prime_jump_at_zero > KINK_TOL

    def H(self, w: np.ndarray | float) -> np.ndarray | float:
        """Primitive of h with H(0) = 0.

        Closed form for polynomial pairs: H(w) = alpha^2 * F(w/alpha) for
        w >= 0 and H(w) = G(-w) for w < 0, with F, G the antiderivatives of
        f, g vanishing at 0. Otherwise adaptive quadrature of h.
        """
        w = np.asarray(w, dtype=float)
        if self.f_coeffs is not None and self.g_coeffs is not None:
            F = npoly.polyint(self.f_coeffs)
            G = npoly.polyint(self.g_coeffs)
            pos = self.alpha ** 2 * npoly.polyval(np.maximum(w, 0.0) / self.alpha, F)
            neg = npoly.polyval(-np.minimum(w, 0.0), G)
            out = np.where(w >= 0.0, pos, neg)
            return out if out.ndim else float(out)
        return self._H_quadrature(w)

    def _H_quadrature(self, w: np.ndarray) -> np.ndarray | float:
        def one(wi: float) -> float:
            val, err = quad(lambda s: float(self.h(s)), 0.0, wi, limit=200)
            if not np.isfinite(val) or err > 1e-8 * (1.0 + abs(val)):
                raise RuntimeError(
                    f"quadrature for H({wi}) failed to converge (estimate {val}, error {err})"
                )
            return val

        out = np.vectorize(one)(w)
        return out if np.ndim(out) else float(out)


@dataclass
class HypothesisReport:
    """Sampled check of the classical sign and smoothness hypotheses."""

    f_at_zero: float
    g_at_zero: float
    sign_violations: list[tuple[str, float, float]]
    derivative_violations: list[tuple[str, float, float, float]]
    s_max: float
    n_samples: int

    @property
    def ok(self) -> bool:
        return not self.sign_violations and not self.derivative_violations


def validate_hypothesis_a(kin: Kinetics, n_samples: int = 200,
                          s_max: float = 3.0) -> HypothesisReport:
    """Sample f and g on (0, 1) and (1, s_max] and report sign/smoothness failures.

    Positivity is required on (0, 1), negativity above 1; each reported
    violation is a (name, s, value) triple. The C1 spot check compares the
    supplied derivatives against central differences.
    """
    if n_samples < 8:
        raise ValueError(f"n_samples must be >= 8, got {n_samples}")
    if s_max <= 1.0:
        raise ValueError(f"s_max must exceed 1, got {s_max}")

    inner = np.linspace(0.0, 1.0, n_samples // 2 + 2)[1:-1]
    outer = np.linspace(1.0, s_max, n_samples // 2 + 1)[1:]
    sign_violations: list[tuple[str, float, float]] = []
    for name, fn in (("f", kin.f), ("g", kin.g)):
        vin = np.asarray(fn(inner), dtype=float)
        vout = np.asarray(fn(outer), dtype=float)
        for s, v in zip(inner[vin <= 0.0], vin[vin <= 0.0]):
            sign_violations.append((name, float(s), float(v)))
        for s, v in zip(outer[vout >= 0.0], vout[vout >= 0.0]):
            sign_violations.append((name, float(s), float(v)))

    eps = 1e-6
    samples = np.linspace(eps, s_max - eps, 25)
    derivative_violations: list[tuple[str, float, float, float]] = []
    for name, fn, dfn in (("f", kin.f, kin.f_prime), ("g", kin.g, kin.g_prime)):
        fd = (np.asarray(fn(samples + eps)) - np.asarray(fn(samples - eps))) / (2 * eps)
        claimed = np.asarray(dfn(samples), dtype=float)
        bad = np.abs(fd - claimed) > 1e-4 * (1.0 + np.abs(claimed))
        for s, c, d in zip(samples[bad], claimed[bad], fd[bad]):
            derivative_violations.append((name, float(s), float(c), float(d)))

    return HypothesisReport(
        f_at_zero=float(kin.f(np.array(0.0))),
        g_at_zero=float(kin.g(np.array(0.0))),
        sign_violations=sign_violations,
        derivative_violations=derivative_violations,
        s_max=s_max,
        n_samples=n_samples,
    )
