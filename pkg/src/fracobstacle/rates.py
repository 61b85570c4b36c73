"""Predicted regularity and convergence exponents for the three operator
cases: A (purely fractional), B (fractional plus drift), C (full
integro-differential).  Exponents may be open endpoints (x^- meaning any
rate strictly below x), carried as a value-plus-flag pair."""

import functools
from dataclasses import dataclass

from .errors import ConfigurationError


@functools.total_ordering
@dataclass(frozen=True)
class OpenReal:
    """A real exponent, possibly an open endpoint: OpenReal(x, True)
    means x^- and sorts strictly below the closed value x."""

    value: float
    open: bool = False

    def _key(self):
        return (self.value, 0 if self.open else 1)

    def __eq__(self, other):
        return self._key() == _as_open(other)._key()

    def __lt__(self, other):
        return self._key() < _as_open(other)._key()

    def __float__(self):
        return float(self.value)

    def __repr__(self):
        return "%g^-" % self.value if self.open else "%g" % self.value


def _as_open(x):
    return x if isinstance(x, OpenReal) else OpenReal(float(x))


def open_min(*vals):
    return min((_as_open(v) for v in vals))


@dataclass(frozen=True)
class CaseSpec:
    case_id: str
    iota: int
    s: float
    beta_nonzero: bool = False
    r: float = 1.0

    def __post_init__(self):
        if self.case_id not in ("A", "B", "C"):
            raise ConfigurationError("case_id must be A, B or C")
        if not 0.0 < self.s < 1.0:
            raise ConfigurationError("fractional order s must lie in (0,1)")
        if not 0.0 < self.r <= 1.0:
            raise ConfigurationError("elliptic regularity index r must lie in (0,1]")
        if self.case_id == "B":
            if self.s < 0.5:
                raise ConfigurationError("case B requires s >= 1/2")
            if self.iota != 0:
                raise ConfigurationError("case B has no second-order part (iota = 0)")
            if not self.beta_nonzero:
                raise ConfigurationError("case B requires a nonzero drift")
        if self.case_id == "C" and self.iota != 1:
            raise ConfigurationError("case C requires iota = 1")
        if self.case_id == "A" and (self.iota != 0 or self.beta_nonzero):
            raise ConfigurationError("case A is purely fractional (iota = 0, beta = 0)")

    @property
    def at_theory_boundary(self):
        """Case B at exactly s = 1/2 sits outside the drift theory."""
        return self.case_id == "B" and self.s == 0.5


def mu(s, r):
    """Regularity exponent: 1+r below the branch switch s = 5/4 - r/2,
    and (7/2 - 2s)^- above it."""
    if not 0.0 < s < 1.0:
        raise ConfigurationError("fractional order s must lie in (0,1)")
    if not 0.0 < r <= 1.0:
        raise ConfigurationError("elliptic regularity index r must lie in (0,1]")
    if s < 1.25 - 0.5 * r:
        return OpenReal(1.0 + r, False)
    return OpenReal(3.5 - 2.0 * s, True)


def sigma(spec):
    """Solution regularity exponent (reported, not used for acceptance)."""
    s = spec.s
    if spec.case_id == "A":
        return open_min(OpenReal(2 * s), OpenReal(s + 0.5, True))
    if spec.case_id == "B":
        return OpenReal(s + 0.5, True)
    return mu(s, spec.r)


def sigma_star(spec):
    """Interpolation-theory approximation exponent per case."""
    s = spec.s
    if spec.case_id in ("A", "B"):
        return open_min(OpenReal(s), OpenReal(0.5, True))
    m = mu(s, spec.r)
    return OpenReal(m.value - 1.0, m.open)


def predicted_rate(spec):
    """Expected finite element rate: sigma_star capped at (3/2 - s)^-."""
    return open_min(sigma_star(spec), OpenReal(1.5 - spec.s, True))
