"""Rational maps on the Riemann sphere with numeric coefficients.

Points are plain Python complex numbers, with the module-level ``INF``
singleton standing for the point at infinity.
"""

import hashlib
import math
from dataclasses import InitVar, dataclass, field

import numpy as np

from .errors import CoprimalityViolation, DegreeCapExceeded, DegreeTooLow
from .roots import RootSet, poly_roots, trim

ZERO_REL = 1e-13
DEGREE_CAP = 4096


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(z):
    return z is INF


def as_point(z):
    """Coerce to a sphere point; non-finite complex values become INF."""
    if z is INF:
        return INF
    z = complex(z)
    if math.isnan(z.real) or math.isnan(z.imag):
        if math.isinf(z.real) or math.isinf(z.imag):
            return INF
        raise ValueError("sphere points may not contain NaN")
    if math.isinf(z.real) or math.isinf(z.imag):
        return INF
    return z


def chordal(a, b):
    """Chordal distance on the unit sphere (diameter 2)."""
    if a is INF and b is INF:
        return 0.0
    if a is INF:
        a, b = b, a
    if b is INF:
        return 2.0 / math.hypot(1.0, abs(a))
    den = math.hypot(1.0, abs(a)) * math.hypot(1.0, abs(b))
    if not math.isfinite(den):
        # both points far out: compare in the 1/z chart
        return chordal(1.0 / a if a != 0 else INF, 1.0 / b if b != 0 else INF)
    return 2.0 * abs(a - b) / den


def chordal_array(a, b):
    """Vectorized chordal distance between finite arrays ``a`` and point ``b``."""
    a = np.asarray(a, dtype=np.complex128)
    if b is INF:
        return 2.0 / np.hypot(1.0, np.abs(a))
    return 2.0 * np.abs(a - b) / np.hypot(1.0, np.abs(a)) / np.hypot(1.0, abs(b))


@dataclass(frozen=True)
class Polynomial:
    """Ascending complex coefficients, leading zeros trimmed."""

    coeffs: np.ndarray
    scale: InitVar = None

    def __post_init__(self, scale):
        object.__setattr__(self, "coeffs", trim(self.coeffs, ZERO_REL, scale))
        self.coeffs.setflags(write=False)

    @property
    def degree(self):
        # zero polynomial has degree -1
        return len(self.coeffs) - 1

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    def deriv(self):
        c = self.coeffs
        return Polynomial(c[1:] * np.arange(1, len(c)))

    def padded(self, n):
        """Coefficients zero-padded to length n."""
        out = np.zeros(n, dtype=np.complex128)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def __mul__(self, other):
        if len(self.coeffs) == 0 or len(other.coeffs) == 0:
            return Polynomial(np.zeros(0, dtype=np.complex128))
        scale = np.convolve(np.abs(self.coeffs), np.abs(other.coeffs))
        return Polynomial(np.convolve(self.coeffs, other.coeffs), scale)

    def __sub__(self, other):
        n = max(len(self.coeffs), len(other.coeffs))
        a, b = self.padded(n), other.padded(n)
        return Polynomial(a - b, np.abs(a) + np.abs(b))

    def __eq__(self, other):
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())


@dataclass(frozen=True)
class Quotient:
    """An unreduced ratio of polynomials, evaluated pointwise."""

    num: Polynomial
    den: Polynomial

    def __call__(self, z):
        return self.num(z) / self.den(z)


@dataclass(frozen=True, eq=False)
class RationalMap:
    """R = P/Q of degree d = max(deg P, deg Q) >= 2, with coprime P and Q."""

    num: Polynomial
    den: Polynomial
    check_coprime: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.den.degree < 0:
            raise ValueError("denominator is the zero polynomial")
        if self.num.degree < 0:
            raise DegreeTooLow("numerator is the zero polynomial")
        if self.degree < 2:
            raise DegreeTooLow(f"degree {self.degree} < 2")
        d = self.degree
        # homogenized reversals: u**d * P(1/u), u**d * Q(1/u)
        object.__setattr__(self, "num_h", self.num.padded(d + 1)[::-1].copy())
        object.__setattr__(self, "den_h", self.den.padded(d + 1)[::-1].copy())
        if self.check_coprime and self.num.degree >= 1 and self.den.degree >= 1:
            _check_coprime(self.num, self.den)

    @classmethod
    def from_coeffs(cls, num, den=(1,), check_coprime=True):
        return cls(Polynomial(num), Polynomial(den), check_coprime)

    @classmethod
    def polynomial(cls, coeffs):
        return cls(Polynomial(coeffs), Polynomial([1.0]))

    @property
    def degree(self):
        return max(self.num.degree, self.den.degree)

    @property
    def is_polynomial(self):
        return self.den.degree == 0

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(self.num.coeffs.tobytes())
        h.update(b"/")
        h.update(self.den.coeffs.tobytes())
        return h.hexdigest()[:16]

    def as_polynomial_coeffs(self):
        """Coefficients of P/q0 for a polynomial map."""
        return self.num.coeffs / self.den.coeffs[0]

    def __call__(self, z):
        return eval_map(self, z)

    def __eq__(self, other):
        return (
            isinstance(other, RationalMap)
            and self.num == other.num
            and self.den == other.den
        )

    def __hash__(self):
        return hash((self.num, self.den))

    def __repr__(self):
        return f"RationalMap(num={self.num.coeffs.tolist()}, den={self.den.coeffs.tolist()})"


def _check_coprime(P, Q):
    rp = poly_roots(P.coeffs, pretrimmed=True)
    rq = poly_roots(Q.coeffs, pretrimmed=True)
    for a, _ in rp:
        for b, _ in rq:
            if abs(a - b) <= 1e-7 * max(1.0, abs(a)):
                raise CoprimalityViolation(f"numerator and denominator share the root {a}")


def _eval_scaled(c, z):
    """Value of c at z and the coefficient-weighted scale sum |c_k||z|^k."""
    val = 0j
    s = 0.0
    az = abs(z)
    for a in c[::-1]:
        val = val * z + a
        s = s * az + abs(a)
    return val, s


def eval_map(R, z):
    """R(z) on the sphere; |z| > 1 is evaluated in the w = 1/z chart."""
    z = as_point(z)
    if z is INF or abs(z) > 1.0:
        u = 0j if z is INF else 1.0 / z
        num, sn = _eval_scaled(R.num_h, u)
        den, sd = _eval_scaled(R.den_h, u)
    else:
        num, sn = _eval_scaled(R.num.coeffs, z)
        den, sd = _eval_scaled(R.den.coeffs, z)
    if abs(num) <= ZERO_REL * sn and abs(den) <= ZERO_REL * sd:
        raise CoprimalityViolation(f"P and Q both vanish at {z}")
    if den == 0:
        return INF
    w = num / den
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        return INF
    return w


def eval_array(R, z):
    """Vectorized R on finite complex arrays; poles come back as complex inf."""
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    small = np.abs(z) <= 1.0
    P = np.polynomial.polynomial.polyval
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        zs = z[small]
        out[small] = P(zs, R.num.coeffs) / P(zs, R.den.coeffs)
        u = 1.0 / z[~small]
        out[~small] = P(u, R.num_h) / P(u, R.den_h)
    bad = ~np.isfinite(out)
    out[bad] = complex(np.inf, 0.0)
    return out


def derivative(R):
    """Formal derivative (P'Q - PQ') / Q**2, not reduced."""
    P, Q = R.num, R.den
    return Quotient(P.deriv() * Q - P * Q.deriv(), Q * Q)


def _deriv_at(num, den, z):
    def P(x, c):
        return np.polynomial.polynomial.polyval(x, c) if len(c) else 0j
    dn = num[1:] * np.arange(1, len(num))
    dd = den[1:] * np.arange(1, len(den))
    a, b = P(z, num), P(z, den)
    return (P(z, dn) * b - a * P(z, dd)) / (b * b)


def local_derivative(R, z):
    """Derivative of R at z in the charts z (finite) or 1/z (at INF) on both sides."""
    z = as_point(z)
    w = eval_map(R, z)
    if z is not INF:
        if w is not INF:
            return complex(_deriv_at(R.num.coeffs, R.den.coeffs, z))
        return complex(_deriv_at(R.den.coeffs, R.num.coeffs, z))
    if w is not INF:
        return complex(_deriv_at(R.num_h, R.den_h, 0j))
    return complex(_deriv_at(R.den_h, R.num_h, 0j))


def critical_points(R):
    """Critical points with multiplicity; total multiplicity is 2d - 2."""
    N = derivative(R).num
    d = R.degree
    roots = []
    residual = 0.0
    if N.degree >= 1:
        rs = poly_roots(N.coeffs, pretrimmed=True)
        roots = list(rs.roots)
        residual = rs.residual
    finite = sum(m for _, m in roots)
    at_inf = 2 * d - 2 - finite
    if at_inf > 0:
        roots.append((INF, at_inf))
    return RootSet(tuple(roots), residual)


def preimages(R, w):
    """The d solutions of R(z) = w, with multiplicity (INF included)."""
    w = as_point(w)
    d = R.degree
    if w is INF:
        F = R.den
    else:
        F = R.num - Polynomial(R.den.coeffs * w)
    roots = []
    residual = 0.0
    if F.degree >= 1:
        rs = poly_roots(F.coeffs, pretrimmed=True)
        roots = list(rs.roots)
        residual = rs.residual
    at_inf = d - max(F.degree, 0)
    if at_inf > 0:
        roots.append((INF, at_inf))
    return RootSet(tuple(roots), residual)


def compose(R, S):
    """R o S as coefficient polynomials, no reduction."""
    d = R.degree
    N, D = S.num, S.den
    p = R.num.padded(d + 1)
    q = R.den.padded(d + 1)
    n_pows = [Polynomial([1.0])]
    d_pows = [Polynomial([1.0])]
    for _ in range(d):
        n_pows.append(n_pows[-1] * N)
        d_pows.append(d_pows[-1] * D)
    size = d * max(N.degree, D.degree) + 1
    num = np.zeros(size, dtype=np.complex128)
    den = np.zeros(size, dtype=np.complex128)
    num_scale = np.zeros(size)
    den_scale = np.zeros(size)
    for i in range(d + 1):
        a = n_pows[i].coeffs if i else np.ones(1, dtype=np.complex128)
        b = d_pows[d - i].coeffs if d - i else np.ones(1, dtype=np.complex128)
        term = np.zeros(size, dtype=np.complex128)
        t = np.convolve(a, b)
        term[: len(t)] = t
        mag = np.zeros(size)
        m = np.convolve(np.abs(a), np.abs(b))
        mag[: len(m)] = m
        num += p[i] * term
        den += q[i] * term
        num_scale += abs(p[i]) * mag
        den_scale += abs(q[i]) * mag
    return RationalMap(
        Polynomial(num, num_scale), Polynomial(den, den_scale), check_coprime=False
    )


def iterate_map(R, k, cap=DEGREE_CAP):
    """Coefficient representation of the k-th iterate R^k.

    Composition of coprime maps stays coprime, so iterates skip the
    (expensive, high-degree) root-matching check and only trim coefficients.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if R.degree ** k > cap:
        raise DegreeCapExceeded(f"degree {R.degree}**{k} exceeds cap {cap}")
    out = R
    for _ in range(k - 1):
        out = compose(R, out)
    return out


@dataclass(frozen=True)
class Mobius:
    """z -> (a z + b) / (c z + d) on the sphere."""

    a: complex = 1
    b: complex = 0
    c: complex = 0
    d: complex = 1

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)))
        if self.a * self.d - self.b * self.c == 0:
            raise ValueError("degenerate Mobius transformation")

    @property
    def is_identity(self):
        return self.b == 0 and self.c == 0 and self.a == self.d

    def __call__(self, z):
        z = as_point(z)
        if z is INF:
            return INF if self.c == 0 else self.a / self.c
        den = self.c * z + self.d
        if den == 0:
            return INF
        return (self.a * z + self.b) / den

    def inverse(self):
        return Mobius(self.d, -self.b, -self.c, self.a)

    def apply_array(self, z):
        z = np.asarray(z, dtype=np.complex128)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.a * z + self.b) / (self.c * z + self.d)
        return np.where(np.isfinite(out), out, complex(np.inf, 0.0))

    def to_list(self):
        return [[v.real, v.imag] for v in (self.a, self.b, self.c, self.d)]


def conjugate(R, M):
    """The map M o R o M^-1, expressed in the chart given by M."""
    if M.is_identity:
        return R
    Dg = R.degree
    A = Polynomial([-M.b, M.d])  # numerator of M^-1(w)
    B = Polynomial([M.a, -M.c])  # denominator of M^-1(w)
    p = R.num.padded(Dg + 1)
    q = R.den.padded(Dg + 1)
    size = Dg + 1
    num = np.zeros(size, dtype=np.complex128)
    den = np.zeros(size, dtype=np.complex128)
    apow = [Polynomial([1.0])]
    bpow = [Polynomial([1.0])]
    for _ in range(Dg):
        apow.append(apow[-1] * A)
        bpow.append(bpow[-1] * B)
    for i in range(Dg + 1):
        t = (apow[i] * bpow[Dg - i]).padded(size)
        num += p[i] * t
        den += q[i] * t
    N, D = Polynomial(num), Polynomial(den)
    n = max(len(N.coeffs), len(D.coeffs))
    top = M.a * N.padded(n) + M.b * D.padded(n)
    bot = M.c * N.padded(n) + M.d * D.padded(n)
    # normalize so the largest coefficient has modulus one
    s = max(np.max(np.abs(top)), np.max(np.abs(bot)))
    return RationalMap(Polynomial(top / s), Polynomial(bot / s))
