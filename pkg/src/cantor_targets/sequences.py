"""Base sequences Q = (q_n) and weight sequences alpha = (alpha_n).

A spec string looks like ``kind:payload``::

    const:2             periodic:2,3          eventually:5,7|2,3
    expr:2+floor(sqrt(n))                     table:path/to/values.txt

Base terms are integers >= 2 (expressions are floored). Weight terms are
finite reals >= 0. :class:`CumulativeCache` keeps exact partial products
``Q_n``, rigorous log-domain partial sums, and float64 arrays for the
long-horizon dimension estimates.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from flint import arb, ctx

from . import expr as ex
from . import kernels
from .errors import CapExceeded, DomainError, ParseError
from .logreal import DEFAULT_PREC, LogReal, to_arb

BASE = "base"
WEIGHT = "weight"
KINDS = ("const", "periodic", "eventually", "expr", "table")
PROBE_TERMS = 16
DEFAULT_CAP_BITS = 1 << 20


@dataclass(frozen=True)
class SequenceSpec:
    """Parsed sequence description.

    ``preperiod``/``period`` hold the validated term values for the
    const, periodic, eventually and table kinds (a table is all
    preperiod); ``node`` holds the AST for ``expr``.
    """

    kind: str
    target: str
    text: str
    preperiod: tuple = ()
    period: tuple = ()
    node: object = None

    @property
    def is_base(self) -> bool:
        return self.target == BASE

    def __str__(self) -> str:
        return self.text


def _check_target(target: str) -> None:
    if target not in (BASE, WEIGHT):
        raise ValueError(f"target must be 'base' or 'weight', not {target!r}")


def _validate_value(value, target: str, where: str):
    """Return the validated term (int for base, Fraction or arb for weight)."""
    if target == BASE:
        if isinstance(value, arb):
            z = value.unique_fmpz()
            if z is None:
                raise DomainError(f"{where}: base terms must be integers")
            value = Fraction(int(z))
        if value.denominator != 1:
            raise DomainError(f"{where}: base terms must be integers, got {value}")
        if value < 2:
            raise DomainError(f"{where}: base terms must be >= 2, got {value}")
        return int(value)
    if isinstance(value, arb):
        if not value.is_finite():
            raise DomainError(f"{where}: weight is not finite")
        if value < 0:
            raise DomainError(f"{where}: weights must be >= 0")
        return value
    if value < 0:
        raise DomainError(f"{where}: weights must be >= 0, got {value}")
    return value


def _constant(text: str, target: str, where: str, offset: int = 0):
    try:
        node = ex.parse_expression(text)
    except ParseError as err:
        pos = None if err.position is None else err.position + offset
        raise ParseError(f"{where}: {str(err).split(' (at')[0]}", pos) from None
    if ex.uses_n(node):
        raise ParseError(f"{where}: list entries may not depend on n", offset)
    value = _validate_value(ex.evaluate(node, 1), target, where)
    # inexact weights keep their AST so they can be re-evaluated at any precision
    return node if isinstance(value, arb) else value


def _number_list(payload: str, target: str, offset: int, what: str) -> tuple:
    if not payload.strip():
        raise ParseError(f"empty {what} list", offset)
    out = []
    pos = offset
    for k, item in enumerate(payload.split(",")):
        out.append(_constant(item, target, f"{what} entry {k + 1}", pos))
        pos += len(item) + 1
    return tuple(out)


def parse_sequence_spec(text: str, target: str) -> SequenceSpec:
    """Parse ``kind:payload`` into a validated :class:`SequenceSpec`.

    Expression specs are probe-evaluated at n = 1..16 so domain errors
    surface at parse time.
    """
    _check_target(target)
    if ":" not in text:
        raise ParseError("expected 'kind:payload'", 0, text)
    kind, payload = text.split(":", 1)
    kind = kind.strip()
    offset = len(kind) + 1
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", 0, text)
    text = text.strip()
    if kind == "const":
        value = _constant(payload, target, "const", offset)
        return SequenceSpec("const", target, text, (), (value,))
    if kind == "periodic":
        return SequenceSpec("periodic", target, text, (), _number_list(payload, target, offset, "period"))
    if kind == "eventually":
        if payload.count("|") != 1:
            raise ParseError("eventually payload must be 'preperiod|period'", offset, text)
        pre, per = payload.split("|")
        return SequenceSpec(
            "eventually",
            target,
            text,
            _number_list(pre, target, offset, "preperiod"),
            _number_list(per, target, offset + len(pre) + 1, "period"),
        )
    if kind == "table":
        path = Path(payload.strip())
        try:
            lines = path.read_text().splitlines()
        except OSError as err:
            raise ParseError(f"cannot read table {str(path)!r}: {err.strerror}", offset, text) from None
        values = []
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                values.append(_constant(line, target, f"{path.name} line {lineno}"))
        if not values:
            raise ParseError(f"table {str(path)!r} has no values", offset, text)
        return SequenceSpec("table", target, text, tuple(values), ())
    try:
        node = ex.parse_expression(payload)
    except ParseError as err:
        pos = None if err.position is None else err.position + offset
        raise ParseError(str(err).split(" (at")[0], pos, text) from None
    spec = SequenceSpec("expr", target, text, node=node)
    for n in range(1, PROBE_TERMS + 1):
        term(spec, n)
    return spec


def term(spec: SequenceSpec, n: int, prec: int = DEFAULT_PREC):
    """``q_n`` (an int) or ``alpha_n`` (Fraction when exact, arb ball otherwise)."""
    if n < 1:
        raise ValueError(f"sequence index must be >= 1, got {n}")
    if spec.kind != "expr":
        pre, per = spec.preperiod, spec.period
        if n <= len(pre):
            value = pre[n - 1]
        elif not per:
            raise DomainError(f"table {spec.text!r} has only {len(pre)} entries, asked for n={n}")
        else:
            value = per[(n - len(pre) - 1) % len(per)]
        return value if isinstance(value, (int, Fraction)) else ex.evaluate(value, n, prec)
    where = f"{spec.text} at n={n}"
    if spec.is_base:
        q = ex.evaluate(spec.node, n, prec, floor_result=True)
        if q < 2:
            raise DomainError(f"{where}: base term {q} < 2")
        return q
    return _validate_value(ex.evaluate(spec.node, n, prec), WEIGHT, where)


def _float_of(value) -> float:
    if isinstance(value, arb):
        return float(value.mid())
    return float(value)


def _log_float(q: int) -> float:
    return math.log(q)


def float_terms(spec: SequenceSpec, start: int, stop: int) -> np.ndarray:
    """Float64 ``q_n`` logs (base) or ``alpha_n`` (weight) for ``start <= n < stop``."""
    n = np.arange(start, stop, dtype=np.int64)
    conv = _log_float if spec.is_base else _float_of
    if spec.kind != "expr":
        pre = np.array([conv(term(spec, k + 1)) for k in range(len(spec.preperiod))], dtype=np.float64)
        per = np.array(
            [conv(term(spec, len(spec.preperiod) + k + 1)) for k in range(len(spec.period))], dtype=np.float64
        )
        idx = n - 1
        out = np.empty(n.shape, dtype=np.float64)
        in_pre = idx < len(pre)
        out[in_pre] = pre[idx[in_pre]]
        if (~in_pre).any():
            if len(per) == 0:
                raise DomainError(f"table {spec.text!r} has only {len(pre)} entries, asked for n={stop - 1}")
            out[~in_pre] = per[(idx[~in_pre] - len(pre)) % len(per)]
        return out
    vals, suspect = ex.evaluate_array(spec.node, n, floor_result=spec.is_base)
    if spec.is_base:
        bad = ~suspect & (vals < 2)
        if bad.any():
            k = int(n[np.argmax(bad)])
            raise DomainError(f"{spec.text} at n={k}: base term {vals[np.argmax(bad)]:g} < 2")
        with np.errstate(all="ignore"):
            out = np.log(vals)
    else:
        bad = ~suspect & (vals < 0)
        if bad.any():
            k = int(n[np.argmax(bad)])
            raise DomainError(f"{spec.text} at n={k}: weights must be >= 0")
        out = vals.copy()
    for i in np.flatnonzero(suspect):
        out[i] = conv(term(spec, int(n[i])))
    return out


@dataclass
class CumulativeCache:
    """Append-only cache of partial products and partial sums for one spec.

    Exact products ``Q_n`` are kept while their bit length stays within
    ``cap_bits``; beyond that only log-domain values exist.
    """

    spec: SequenceSpec
    prec: int = DEFAULT_PREC
    cap_bits: int = DEFAULT_CAP_BITS
    _terms: list = field(default_factory=list, repr=False)
    _products: list = field(default_factory=lambda: [1], repr=False)
    _capped: bool = field(default=False, repr=False)
    _sums: list = field(default_factory=list, repr=False)
    _float_terms: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _float_prefix: np.ndarray | None = field(default=None, repr=False)
    _siblings: dict = field(default_factory=dict, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    @classmethod
    def from_text(cls, text: str, target: str, **kwargs) -> CumulativeCache:
        return cls(parse_sequence_spec(text, target), **kwargs)

    @property
    def is_base(self) -> bool:
        return self.spec.is_base

    def at_precision(self, prec: int) -> CumulativeCache:
        """A cache for the same spec working at ``prec`` bits (memoised)."""
        if prec == self.prec:
            return self
        with self._lock:
            sib = self._siblings.get(prec)
            if sib is None:
                sib = CumulativeCache(self.spec, prec=prec, cap_bits=self.cap_bits)
                sib._terms = self._terms if self.is_base else []
                self._siblings[prec] = sib
            return sib

    # exact terms --------------------------------------------------------

    def term(self, n: int):
        if n < 1:
            raise ValueError(f"sequence index must be >= 1, got {n}")
        if n > len(self._terms):
            with self._lock:
                for k in range(len(self._terms) + 1, n + 1):
                    self._terms.append(term(self.spec, k, self.prec))
        return self._terms[n - 1]

    def partial_product(self, n: int) -> int:
        """Exact ``Q_n = q_1 ... q_n``; :class:`CapExceeded` past ``cap_bits``."""
        self._need_base()
        if n < 0:
            raise ValueError("n must be >= 0")
        if n >= len(self._products):
            with self._lock:
                while len(self._products) <= n and not self._capped:
                    k = len(self._products)
                    nxt = self._products[-1] * self.term(k)
                    if nxt.bit_length() > self.cap_bits:
                        self._capped = True
                        break
                    self._products.append(nxt)
        if n >= len(self._products):
            raise CapExceeded(
                f"Q_{n} exceeds cap of {self.cap_bits} bits (exact products known up to n={len(self._products) - 1})"
            )
        return self._products[n]

    def has_exact_product(self, n: int) -> bool:
        try:
            self.partial_product(n)
        except CapExceeded:
            return False
        return True

    def product_mod(self, n: int, m: int) -> int:
        """``Q_n mod m`` without forming ``Q_n`` when it is capped."""
        if n < len(self._products):
            return self._products[n] % m
        r = 1 % m
        for k in range(1, n + 1):
            r = r * self.term(k) % m
        return r

    # rigorous log-domain sums ------------------------------------------

    def _extend_sums(self, n: int) -> None:
        with self._lock, ctx.workprec(self.prec):
            acc = self._sums[-1] if self._sums else arb(0)
            for k in range(len(self._sums) + 1, n + 1):
                t = self.term(k)
                acc = acc + (to_arb(t, self.prec).log() if self.is_base else to_arb(t, self.prec))
                self._sums.append(acc)

    def _sum(self, n: int) -> LogReal:
        if n < 0:
            raise ValueError("n must be >= 0")
        if n == 0:
            return LogReal(arb(0), self.prec)
        if n > len(self._sums):
            self._extend_sums(n)
        return LogReal(self._sums[n - 1], self.prec)

    def log_partial_product(self, n: int) -> LogReal:
        """``log Q_n`` as a ball carrying the accumulated rounding bound."""
        self._need_base()
        return self._sum(n)

    def alpha_partial_sum(self, n: int) -> LogReal:
        """``alpha(n) = alpha_1 + ... + alpha_n`` as a ball."""
        self._need_weight()
        return self._sum(n)

    # float64 arrays -----------------------------------------------------

    def float_terms(self, N: int) -> np.ndarray:
        """``log q_n`` (base) or ``alpha_n`` (weight) for n = 1..N as float64."""
        have = len(self._float_terms)
        if N > have:
            with self._lock:
                have = len(self._float_terms)
                if N > have:
                    new = float_terms(self.spec, have + 1, N + 1)
                    self._float_terms = np.concatenate([self._float_terms, new])
                    self._float_prefix = None
        return self._float_terms[:N]

    def float_prefix(self, N: int) -> np.ndarray:
        """``log Q_n`` (base) or ``alpha(n)`` (weight) for n = 1..N as float64.

        Recomputed from scratch whenever the term array grows, so the
        values never depend on the order of earlier requests.
        """
        self.float_terms(N)
        with self._lock:
            if self._float_prefix is None or len(self._float_prefix) != len(self._float_terms):
                self._float_prefix = kernels.prefix_sum(self._float_terms)
            return self._float_prefix[:N]

    def _need_base(self):
        if not self.is_base:
            raise TypeError(f"{self.spec.text!r} is a weight sequence; a base sequence is required")

    def _need_weight(self):
        if self.is_base:
            raise TypeError(f"{self.spec.text!r} is a base sequence; a weight sequence is required")


def as_cache(value, target: str, **kwargs) -> CumulativeCache:
    """Accept a cache, a spec, or spec text."""
    if isinstance(value, CumulativeCache):
        if value.spec.target != target:
            raise TypeError(f"expected a {target} sequence, got {value.spec.target}")
        return value
    if isinstance(value, SequenceSpec):
        if value.target != target:
            raise TypeError(f"expected a {target} sequence, got {value.target}")
        return CumulativeCache(value, **kwargs)
    return CumulativeCache.from_text(value, target, **kwargs)


def log_partial_product(cache: CumulativeCache, n: int) -> LogReal:
    return cache.log_partial_product(n)


def partial_product(cache: CumulativeCache, n: int) -> int:
    return cache.partial_product(n)


def alpha_partial_sum(cache: CumulativeCache, n: int) -> LogReal:
    return cache.alpha_partial_sum(n)
