"""Height and saturation constants, the Yule exponential moment and recentring.

The displaced-offspring moment of the Yule tree at time 1 is
``psi(theta) = exp(2 e**theta - 1)``. The height constants are
``a = theta*`` and ``b = log psi(a)`` where ``theta*`` solves the critical
equation ``theta psi'(theta) / psi(theta) = log psi(theta)``, which reduces to
``2 (a - 1) e**a + 1 = 0``. The saturation constants come from the same
equation for the reflected walk (offspring at +1), ``psi_hat(t) = psi(-t)``,
giving ``2 (alpha + 1) e**-alpha - 1 = 0`` and ``beta = -log psi_hat(alpha)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import ConfigError, ContractError, NumericalRangeError

DEFAULT_TOL = 1e-12
HEIGHT_BRACKET = (0.1, 0.99)
SATURATION_BRACKET = (1.0, 2.5)
_EXP_MAX = math.log(1.7976931348623157e308)


def height_equation(x: float) -> float:
    return 2.0 * (x - 1.0) * math.exp(x) + 1.0


def height_equation_prime(x: float) -> float:
    return 2.0 * x * math.exp(x)


def saturation_equation(x: float) -> float:
    return 2.0 * (x + 1.0) * math.exp(-x) - 1.0


def saturation_equation_prime(x: float) -> float:
    return -2.0 * x * math.exp(-x)


def bisect_newton(f, fprime, lo: float, hi: float, tol: float = DEFAULT_TOL,
                  max_iter: int = 200) -> float:
    """Root of ``f`` on a sign-changing bracket: bisection to 1e-4, then Newton.

    Newton iterates that leave the bracket fall back to bisection, so the
    bracket invariant holds throughout.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    assert flo * fhi < 0, "bracket does not change sign"
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        d = fprime(x)
        x_new = x - fx / d if d != 0 else 0.5 * (lo + hi)
        if not lo <= x_new <= hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol * 1e-3 or abs(f(x_new)) <= tol * 1e-3:
            return x_new
        x = x_new
    raise ArithmeticError("root polish did not converge")


def _check_tol(tolerance: float) -> None:
    if not 0 < tolerance <= 1e-6:
        raise ConfigError("tolerance must lie in (0, 1e-6]")


def solve_height_constants(tolerance: float = DEFAULT_TOL) -> tuple[float, float]:
    """(a, b) with 2(a-1)e^a + 1 = 0 and b = 2 a e^a."""
    _check_tol(tolerance)
    a = bisect_newton(height_equation, height_equation_prime, *HEIGHT_BRACKET, tol=tolerance)
    return a, 2.0 * a * math.exp(a)


def solve_saturation_constants(tolerance: float = DEFAULT_TOL) -> tuple[float, float]:
    """(alpha, beta) with 2(alpha+1)e^-alpha - 1 = 0 and beta = 2 alpha e^-alpha."""
    _check_tol(tolerance)
    alpha = bisect_newton(saturation_equation, saturation_equation_prime,
                          *SATURATION_BRACKET, tol=tolerance)
    return alpha, 2.0 * alpha * math.exp(-alpha)


def log_psi(theta: float) -> float:
    if theta > _EXP_MAX - 1:
        raise NumericalRangeError(f"psi overflows at theta={theta}")
    return 2.0 * math.exp(theta) - 1.0


def psi(theta: float) -> float:
    """E[sum over particles alive at time 1 of exp(-theta * position)]."""
    lp = log_psi(theta)
    if lp > _EXP_MAX:
        raise NumericalRangeError(f"psi overflows at theta={theta}")
    return math.exp(lp)


def psi_reflected(theta: float) -> float:
    """Moment of the walk whose offspring step +1 instead of -1."""
    return psi(-theta)


def criticality_residual(theta: float) -> float:
    """theta psi'/psi - log psi = 2 theta e^theta - (2 e^theta - 1)."""
    e = math.exp(theta) if theta <= _EXP_MAX - 1 else math.inf
    if math.isinf(e):
        raise NumericalRangeError(f"residual overflows at theta={theta}")
    return 2.0 * theta * e - (2.0 * e - 1.0)


def criticality_residual_reflected(theta: float) -> float:
    """Same residual for psi_hat(theta) = psi(-theta): -2 theta e^-theta - (2 e^-theta - 1)."""
    e = math.exp(-theta)
    return -2.0 * theta * e - (2.0 * e - 1.0)


@dataclass
class ConstantsSet:
    a: float
    b: float
    alpha: float
    beta: float
    residual_a: float
    residual_alpha: float
    tolerance: float

    @property
    def height_ratio(self) -> float:
        """b / a, the first-order constant of H_n / log n."""
        return self.b / self.a

    def as_dict(self) -> dict:
        return {
            "a": self.a, "b": self.b, "alpha": self.alpha, "beta": self.beta,
            "residuals": {
                "height_equation": self.residual_a,
                "saturation_equation": self.residual_alpha,
                "criticality_a": criticality_residual(self.a),
                "criticality_reflected_alpha": criticality_residual_reflected(self.alpha),
            },
            "identities": {
                "b_minus_2exp_a_plus_1": self.b - (2.0 * math.exp(self.a) - 1.0),
                "beta_minus_1_plus_2exp_neg_alpha": self.beta - (1.0 - 2.0 * math.exp(-self.alpha)),
                "b_over_a": self.height_ratio,
            },
            "tolerance": self.tolerance,
        }

    def within_tolerance(self) -> bool:
        return abs(self.residual_a) <= self.tolerance and abs(self.residual_alpha) <= self.tolerance


def solve_constants(tolerance: float = DEFAULT_TOL) -> ConstantsSet:
    a, b = solve_height_constants(tolerance)
    alpha, beta = solve_saturation_constants(tolerance)
    return ConstantsSet(a, b, alpha, beta, height_equation(a), saturation_equation(alpha), tolerance)


_DEFAULT: ConstantsSet | None = None


def default_constants() -> ConstantsSet:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = solve_constants()
    return _DEFAULT


def recentre_height(n: int, H: int, const: ConstantsSet | None = None) -> float:
    """(b log n - a H) / log log n."""
    if n < 3:
        raise ContractError("recentring needs n >= 3")
    c = const or default_constants()
    ln = math.log(n)
    return (c.b * ln - c.a * H) / math.log(ln)


def recentre_saturation(n: int, h: int, const: ConstantsSet | None = None) -> float:
    """(alpha h - beta log n) / log log n."""
    if n < 3:
        raise ContractError("recentring needs n >= 3")
    c = const or default_constants()
    ln = math.log(n)
    return (c.alpha * h - c.beta * ln) / math.log(ln)
