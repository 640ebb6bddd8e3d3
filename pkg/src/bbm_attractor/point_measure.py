"""Finite point measures, test functions, the metric d2 and membership in M2.

A :class:`PointMeasure` is an immutable multiset of real atoms stored as two
parallel arrays: strictly decreasing positions and integer-valued float64
multiplicities. Multiplicities are floats on purpose: lattice initial data
produce counts near e^{sqrt(2) L}, far beyond int64, and float64 stores every
integer below 2**53 exactly (larger ones to 53 significant bits).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyMeasure

SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Multiplicities above this are refused by the point-measure constructors and
# by the lattice builders (see initial_conditions).
MAX_MULTIPLICITY = 2.0**128


# --------------------------------------------------------------------------
# Point measures
# --------------------------------------------------------------------------


class PointMeasure:
    """Immutable finite point measure with explicit multiplicities."""

    __slots__ = ("_pos", "_mult")

    def __init__(self, positions, multiplicities=None):
        pos = np.asarray(positions, dtype=np.float64).ravel()
        if multiplicities is None:
            mult = np.ones_like(pos)
        else:
            mult = np.asarray(multiplicities, dtype=np.float64).ravel()
        if pos.shape != mult.shape:
            raise ValueError("positions and multiplicities differ in length")
        if not np.all(np.isfinite(pos)):
            raise ValueError("atom positions must be finite")
        if mult.size and (np.any(mult < 1) or np.any(mult != np.floor(mult)) or not np.all(np.isfinite(mult))):
            raise ValueError("multiplicities must be finite integers >= 1")
        if mult.size and np.any(mult > MAX_MULTIPLICITY):
            raise ValueError("multiplicity exceeds the supported range")
        if pos.size > 1 and not np.all(np.diff(pos) < 0):
            # Sort descending and merge bit-identical positions.
            uniq, inv = np.unique(pos, return_inverse=True)
            summed = np.zeros(uniq.size)
            np.add.at(summed, inv, mult)
            pos, mult = uniq[::-1].copy(), summed[::-1].copy()
        else:
            pos, mult = pos.copy(), mult.copy()
        pos.setflags(write=False)
        mult.setflags(write=False)
        self._pos = pos
        self._mult = mult

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]]) -> "PointMeasure":
        atoms = list(atoms)
        if not atoms:
            return cls.empty()
        arr = np.asarray(atoms, dtype=np.float64)
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def empty(cls) -> "PointMeasure":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def dirac(cls, *positions: float) -> "PointMeasure":
        """Sum of unit masses at the given positions."""
        return cls(np.asarray(positions, dtype=np.float64))

    @property
    def positions(self) -> np.ndarray:
        return self._pos

    @property
    def multiplicities(self) -> np.ndarray:
        return self._mult

    @property
    def is_empty(self) -> bool:
        return self._pos.size == 0

    def __len__(self) -> int:
        return int(self._pos.size)

    def __iter__(self):
        return iter(zip(self._pos.tolist(), self._mult.tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointMeasure):
            return NotImplemented
        return np.array_equal(self._pos, other._pos) and np.array_equal(self._mult, other._mult)

    def __hash__(self):
        return hash((self._pos.tobytes(), self._mult.tobytes()))

    def __add__(self, other: "PointMeasure") -> "PointMeasure":
        return PointMeasure(np.concatenate([self._pos, other._pos]), np.concatenate([self._mult, other._mult]))

    def __repr__(self) -> str:
        head = ", ".join(f"({p:.6g}, {m:.6g})" for p, m in list(self)[:4])
        more = ", ..." if len(self) > 4 else ""
        return f"PointMeasure([{head}{more}])"

    def total_mass(self) -> float:
        return float(self._mult.sum())

    def mass_geq(self, b: float) -> float:
        """eta([b, inf))."""
        k = np.searchsorted(-self._pos, -b, side="right")
        return float(self._mult[:k].sum())


def _require_nonempty(*etas: PointMeasure) -> None:
    for eta in etas:
        if eta.is_empty:
            raise EmptyMeasure("operation requires a nonzero point measure")


def max_point(eta: PointMeasure) -> float:
    _require_nonempty(eta)
    return float(eta.positions[0])


def translate(eta: PointMeasure, a: float) -> PointMeasure:
    """Shift every atom by ``a`` (the pushforward under x -> x + a)."""
    _require_nonempty(eta)
    return PointMeasure(eta.positions + a, eta.multiplicities)


def reflect(eta: PointMeasure) -> PointMeasure:
    """The measure A -> eta(-A)."""
    _require_nonempty(eta)
    return PointMeasure(-eta.positions[::-1], eta.multiplicities[::-1])


# --------------------------------------------------------------------------
# Test functions
# --------------------------------------------------------------------------


class TestFunction:
    """A non-negative function on the line, vectorized over numpy arrays."""

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class Alpha(TestFunction):
    k: int

    def __post_init__(self):
        if self.k < 1 or int(self.k) != self.k:
            raise ValueError("alpha(k) needs a positive integer k")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        far = x <= -1.0
        near = (x > -1.0) & (x < 0.0)
        out[far] = np.exp(-x[far] ** 2 / self.k)
        out[near] = -math.exp(-1.0 / self.k) * x[near]
        return out


@dataclass(frozen=True)
class Tent(TestFunction):
    center: float
    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("tent halfwidth must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.maximum(0.0, 1.0 - np.abs(x - self.center) / self.halfwidth)


@dataclass(frozen=True)
class StepHab(TestFunction):
    """Indicator of the half-open interval [a, b)."""

    a: float
    b: float

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return ((x >= self.a) & (x < self.b)).astype(np.float64)


@dataclass(frozen=True)
class IndicatorGeq(TestFunction):
    b: float

    def __call__(self, x):
        return (np.asarray(x, dtype=np.float64) >= self.b).astype(np.float64)


@dataclass(frozen=True)
class Staircase(TestFunction):
    """f(x) = sum_k c_k 1{x >= b_k}; the empty sum is the zero function."""

    terms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        terms = tuple((float(c), float(b)) for c, b in self.terms)
        if any(not c > 0 or not math.isfinite(c) or not math.isfinite(b) for c, b in terms):
            raise ValueError("staircase weights must be positive and finite")
        object.__setattr__(self, "terms", terms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms], dtype=np.float64)

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([b for _, b in self.terms], dtype=np.float64)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def shifted(self, a: float) -> "Staircase":
        """The function x -> f(x - a)."""
        return Staircase(tuple((c, b + a) for c, b in self.terms))

    def __add__(self, other: "Staircase") -> "Staircase":
        return Staircase(self.terms + other.terms)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for c, b in self.terms:
            out += c * (x >= b)
        return out


@dataclass(frozen=True)
class Custom(TestFunction):
    """User-supplied non-negative function with a declared super-gaussian decay rate."""

    fn: Callable[[np.ndarray], np.ndarray]
    decay: float

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=np.float64)), dtype=np.float64)


def integrate(f: TestFunction, eta: PointMeasure) -> float:
    """<f, eta> as an exact sum over atoms."""
    _require_nonempty(eta)
    return float(np.dot(eta.multiplicities, f(eta.positions)))


# --------------------------------------------------------------------------
# The metric d2
# --------------------------------------------------------------------------


def _center(j: int) -> float:
    # 0, 1/2, -1/2, 1, -1, 3/2, -3/2, ...
    if j == 0:
        return 0.0
    return 0.5 * ((j + 1) // 2) * (1 if j % 2 else -1)


def _unpair(k: int) -> tuple[int, int]:
    """Inverse Cantor pairing of k >= 0."""
    w = (math.isqrt(8 * k + 1) - 1) // 2
    t = w * (w + 1) // 2
    m = k - t
    return w - m, m


def vague_tent(k: int) -> Tent:
    """The k-th (k >= 1) tent function of the fixed vague-metric enumeration."""
    j, m = _unpair(k - 1)
    return Tent(_center(j), 2.0**-m)


@dataclass(frozen=True)
class D2Distance:
    value: float
    truncation_error: float
    vague: float
    max_gap: float
    alpha_series: float

    def __float__(self) -> float:
        return self.value


def d2_distance(eta1: PointMeasure, eta2: PointMeasure, K: int = 60) -> D2Distance:
    """d2 = vague part + |max difference| + sum_k 2^-k min(|<alpha_k, .>| gap, 1).

    Both series are cut after K terms; each tail is at most 2^-K.
    """
    _require_nonempty(eta1, eta2)
    if K < 1:
        raise ValueError("K must be positive")
    if eta1 == eta2:
        return D2Distance(0.0, 2.0 ** (1 - K), 0.0, 0.0, 0.0)
    weights = 2.0 ** -np.arange(1, K + 1)
    vague_terms = np.empty(K)
    alpha_terms = np.empty(K)
    for i in range(K):
        h = vague_tent(i + 1)
        vague_terms[i] = min(abs(integrate(h, eta1) - integrate(h, eta2)), 1.0)
        a = Alpha(i + 1)
        alpha_terms[i] = min(abs(integrate(a, eta1) - integrate(a, eta2)), 1.0)
    vague = float(weights @ vague_terms)
    alpha = float(weights @ alpha_terms)
    gap = abs(max_point(eta1) - max_point(eta2))
    return D2Distance(vague + gap + alpha, 2.0 ** (1 - K), vague, gap, alpha)


# --------------------------------------------------------------------------
# Intensity descriptors and M2 membership
# --------------------------------------------------------------------------


class Membership(str, enum.Enum):
    MEMBER = "member"
    NONMEMBER = "nonmember"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class IntensityDescriptor:
    """Symbolic intensity on (-inf, 0] (or a custom support).

    ``kind`` is one of ``abk``, ``modulated``, ``power_exp``, ``lattice`` or
    ``custom``. The tail of the log-density as x -> -inf is summarized by
    ``tail = (p, c, q)``: density ~ |x|^p exp(c |x|^q).
    """

    kind: str
    params: dict = field(default_factory=dict)
    support: tuple[float, float] = (-math.inf, 0.0)
    truncation: float | None = None
    density_fn: Callable | None = field(default=None, compare=False)
    tail: tuple[float, float, float] | None = None

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        lo, hi = self.support
        inside = (x >= lo) & (x <= hi)
        if self.kind == "abk":
            val = SQRT_2_OVER_PI * (-x) * np.exp(-SQRT2 * x)
        elif self.kind == "modulated":
            a, b = self.params["alpha"], self.params["beta"]
            val = SQRT_2_OVER_PI * (-x) * (1.0 + a * np.cos(np.abs(x) ** b)) * np.exp(-SQRT2 * x)
        elif self.kind == "power_exp":
            p, c, q = self.params["p"], self.params["c"], self.params["q"]
            ax = np.abs(x)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = ax**p * np.exp(c * ax**q)
        elif self.kind == "custom" and self.density_fn is not None:
            val = np.asarray(self.density_fn(x), dtype=np.float64)
        else:
            raise ValueError(f"descriptor kind {self.kind!r} has no pointwise density")
        return np.where(inside, val, 0.0)

    def with_truncation(self, L: float) -> "IntensityDescriptor":
        return IntensityDescriptor(self.kind, dict(self.params), self.support, float(L), self.density_fn, self.tail)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "truncation": self.truncation}


def abk() -> IntensityDescriptor:
    """sqrt(2/pi) (-x) e^{-sqrt2 x} on x < 0."""
    return IntensityDescriptor("abk", tail=(1.0, SQRT2, 1.0))


def modulated(alpha: float, beta: float) -> IntensityDescriptor:
    if not 0.0 <= alpha <= 1.0 or not 0.0 < beta <= 1.0:
        raise ValueError("modulated intensity needs alpha in [0,1] and beta in (0,1]")
    return IntensityDescriptor("modulated", {"alpha": float(alpha), "beta": float(beta)}, tail=(1.0, SQRT2, 1.0))


def power_exp(p: float, c: float, q: float) -> IntensityDescriptor:
    """|x|^p exp(c |x|^q) on x < 0."""
    return IntensityDescriptor("power_exp", {"p": float(p), "c": float(c), "q": float(q)}, tail=(float(p), float(c), float(q)))


def lattice(rule: str = "cesaro") -> IntensityDescriptor:
    """Deterministic lattice measures; ``rule`` is ``cesaro`` or ``violating``."""
    if rule not in ("cesaro", "violating"):
        raise ValueError("lattice rule must be 'cesaro' or 'violating'")
    p = 1.0 if rule == "cesaro" else 2.0
    return IntensityDescriptor("lattice", {"rule": rule}, tail=(p, SQRT2, 1.0))


def custom(density_fn: Callable, support=(-math.inf, 0.0), tail=None) -> IntensityDescriptor:
    return IntensityDescriptor("custom", {}, tuple(support), None, density_fn, tail)


def m2_membership(d) -> Membership:
    """Analytic membership test for M2.

    Accepts an :class:`IntensityDescriptor` or a finite :class:`PointMeasure`.
    A descriptor belongs to M2 when its mass on [0, inf) is finite and its
    log-density grows sub-quadratically toward -inf; log-density c|x|^q with
    c > 0 and q >= 2 violates the growth condition.
    """
    if isinstance(d, PointMeasure):
        _require_nonempty(d)
        return Membership.MEMBER
    if d.support[1] == math.inf:
        return Membership.UNDECIDED
    if d.tail is None:
        return Membership.UNDECIDED
    _, c, q = d.tail
    if c > 0 and q >= 2:
        return Membership.NONMEMBER
    return Membership.MEMBER


# --------------------------------------------------------------------------
# JSON interchange
# --------------------------------------------------------------------------


def _mult_to_json(m: float):
    return int(m)


def dumps_measure(eta: PointMeasure) -> str:
    """Byte-stable JSON text for ``eta``."""
    atoms = [[float(p), _mult_to_json(m)] for p, m in eta]
    return json.dumps({"atoms": atoms}, separators=(",", ":")) + "\n"


def loads_measure(text: str) -> PointMeasure:
    data = json.loads(text)
    if not isinstance(data, dict) or "atoms" not in data:
        raise ValueError("point-measure JSON must be an object with an 'atoms' list")
    atoms = data["atoms"]
    pos = []
    mult = []
    for item in atoms:
        if not isinstance(item, list) or len(item) != 2:
            raise ValueError("each atom must be a [position, multiplicity] pair")
        p, m = item
        if isinstance(m, bool) or not isinstance(m, int) or m < 1:
            raise ValueError("multiplicities must be positive integers")
        pos.append(float(p))
        mult.append(float(m))
    if any(b >= a for a, b in zip(pos, pos[1:])):
        raise ValueError("atoms must be sorted by strictly decreasing position")
    return PointMeasure(pos, mult)


def write_measure(eta: PointMeasure, path) -> None:
    Path(path).write_text(dumps_measure(eta), encoding="utf-8")


def read_measure(path) -> PointMeasure:
    return loads_measure(Path(path).read_text(encoding="utf-8"))
