"""Synthetic psi-mixing sources and exact mixing coefficients.

Finite Markov chains are the exactly analyzable case: for a stationary chain
with transition matrix ``P`` and stationary law ``pi``, the coefficient of
the events generated by the state ``n`` steps ahead is::

    psi(n) = max_{x,y} |P^n(x, y) / pi(y) - 1|

By the Markov property, conditioning the whole future beyond the gap on the
whole past reduces to conditioning on the last observed state, and the
future's law given ``X_j = x`` is a mixture over ``y`` of the law given
``X_{j+n} = y`` with weights ``P^n(x, y)``. Every future event probability
ratio is therefore a convex combination of the ratios ``P^n(x, y)/pi(y)``,
so the same expression bounds the full coefficient and is attained on
single-state events: it is exact for the state process. For the observable
``f(X_i)``, whose sigma-fields are coarser, it is an upper bound.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Union

import numba
import numpy as np

from .errors import ConfigError, PreconditionError, ProfileError, StructureError, ValidationError
from .rng import generator, stream

MAX_STATES = 64
ROW_TOL = 1e-12
STATIONARY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Markov chains
# ---------------------------------------------------------------------------

def _check_stochastic(P) -> np.ndarray:
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise StructureError(f"transition matrix must be square, got shape {P.shape}")
    s = P.shape[0]
    if not 2 <= s <= MAX_STATES:
        raise StructureError(f"number of states must be in [2, {MAX_STATES}], got {s}")
    if not np.all(np.isfinite(P)) or np.any(P < 0):
        raise StructureError("transition probabilities must be finite and nonnegative")
    row_err = np.abs(P.sum(axis=1) - 1.0).max()
    if row_err > ROW_TOL:
        raise StructureError(f"rows must sum to 1 (max deviation {row_err:.3g})")
    return P


def _is_irreducible(P: np.ndarray) -> bool:
    s = P.shape[0]
    adj = P > 0

    def reach(a):
        seen = {0}
        todo = deque([0])
        while todo:
            i = todo.popleft()
            for j in np.flatnonzero(a[i]):
                if j not in seen:
                    seen.add(int(j))
                    todo.append(int(j))
        return len(seen) == s

    return reach(adj) and reach(adj.T)


def stationary_dist(P) -> np.ndarray:
    """Stationary law of an irreducible stochastic matrix.

    Solves ``pi (P - I) = 0`` with ``sum(pi) = 1`` by least squares on the
    stacked system, then verifies the residual.
    """
    P = _check_stochastic(P)
    if not _is_irreducible(P):
        raise StructureError("transition matrix is reducible")
    s = P.shape[0]
    A = np.vstack([P.T - np.eye(s), np.ones((1, s))])
    b = np.zeros(s + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    # one refinement sweep; exact for rank-one (i.i.d.) transition matrices
    pi = pi @ P
    pi /= math.fsum(pi)
    resid = np.abs(pi @ P - pi).max()
    if resid > STATIONARY_TOL:
        raise StructureError(f"stationary solve did not converge (residual {resid:.3g})")
    return pi


@dataclass(frozen=True)
class FiniteMarkovChain:
    """Immutable chain: transition matrix, stationary law and centered observable.

    Build with :func:`make_chain`, which validates ``P`` and centers ``f``.
    ``initial`` is ``None`` for a stationary start.
    """

    P: np.ndarray
    pi: np.ndarray
    f: np.ndarray
    name: str = ""
    initial: Optional[np.ndarray] = None

    @property
    def s(self) -> int:
        return self.P.shape[0]

    @property
    def certified(self) -> bool:
        """All transitions positive, which forces geometric decay of psi."""
        return bool(np.all(self.P > 0))

    @property
    def is_stationary(self) -> bool:
        return self.initial is None or np.allclose(self.initial, self.pi, rtol=0, atol=STATIONARY_TOL)

    def second_eigenvalue_modulus(self) -> float:
        ev = np.sort(np.abs(np.linalg.eigvals(self.P)))[::-1]
        return float(ev[1])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "states": self.s,
            "P": [float(v) for v in self.P.ravel()],
            "f": [float(v) for v in self.f],
        }


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def make_chain(P, f=None, name: str = "", initial=None) -> FiniteMarkovChain:
    """Validate ``P``, compute ``pi`` and center ``f`` so that ``pi @ f == 0``.

    ``f`` defaults to the state index.
    """
    P = _check_stochastic(P)
    pi = stationary_dist(P)
    s = P.shape[0]
    f = np.arange(s, dtype=float) if f is None else np.asarray(f, dtype=float)
    if f.shape != (s,) or not np.all(np.isfinite(f)):
        raise ValidationError(f"f must be {s} finite values")
    f = f - math.fsum(pi * f)
    init = None
    if initial is not None:
        init = np.asarray(initial, dtype=float)
        if init.shape != (s,) or np.any(init < 0) or abs(init.sum() - 1.0) > ROW_TOL:
            raise ValidationError("initial law must be a probability vector")
        init = _frozen(init)
    return FiniteMarkovChain(P=_frozen(P), pi=_frozen(pi), f=_frozen(f), name=name, initial=init)


def iid_chain(weights, values, name: str = "iid") -> FiniteMarkovChain:
    """Chain whose rows all equal ``weights``: an i.i.d. sequence."""
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return make_chain(np.tile(w, (w.size, 1)), values, name=name)


def chain_from_dict(d: Mapping) -> FiniteMarkovChain:
    """Parse the chain file schema ``{states, P (row-major), f, name}``."""
    try:
        s = int(d["states"])
        raw = np.asarray(d["P"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed chain specification: {exc}") from None
    if raw.size != s * s:
        raise StructureError(f"P has {raw.size} entries, expected {s * s}")
    return make_chain(raw.reshape(s, s), d.get("f"), name=str(d.get("name", "")))


def load_chain(path: Union[str, Path]) -> FiniteMarkovChain:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return chain_from_dict(data)


def save_chain(chain: FiniteMarkovChain, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(chain.to_dict(), indent=2, sort_keys=True) + "\n")


def psi_coefficient(chain: FiniteMarkovChain, n: int) -> float:
    """Exact psi-mixing coefficient of a stationary chain at gap ``n``."""
    if n < 1:
        raise ValidationError(f"gap must be >= 1, got {n}")
    if not chain.is_stationary:
        raise PreconditionError("psi coefficient requires a stationary initial law")
    if np.any(chain.pi <= 0):
        raise PreconditionError("stationary law has a zero entry")
    if np.all(chain.P == chain.P[0]):
        # identical rows: the sequence is i.i.d. and psi vanishes at every gap
        return 0.0
    Pn = np.linalg.matrix_power(chain.P, int(n))
    return float(np.abs(Pn / chain.pi[None, :] - 1.0).max())


@dataclass(frozen=True)
class DoukhanCheck:
    lhs: float
    rhs: float
    holds: bool


def _state_values(fn, chain: FiniteMarkovChain) -> np.ndarray:
    if callable(fn):
        return np.array([fn(i) for i in range(chain.s)], dtype=float)
    v = np.asarray(fn, dtype=float)
    if v.shape != (chain.s,):
        raise ValidationError(f"state functional must have {chain.s} values")
    return v


def doukhan_gap_check(chain: FiniteMarkovChain, g, h, gap: int) -> DoukhanCheck:
    """Covariance inequality ``|E XY - EX EY| <= psi(gap) E|X| E|Y|`` by enumeration.

    ``Y = g(state_1)`` and ``X = h(state_{1+gap})`` under the stationary law.
    ``g`` and ``h`` are arrays of per-state values or callables on state index.
    """
    gv = _state_values(g, chain)
    hv = _state_values(h, chain)
    pi = chain.pi
    Pn = np.linalg.matrix_power(chain.P, int(gap))
    joint = pi[:, None] * Pn
    exy = float(gv @ joint @ hv)
    ex = float(pi @ hv)
    ey = float(pi @ gv)
    lhs = abs(exy - ex * ey)
    rhs = psi_coefficient(chain, gap) * float(pi @ np.abs(hv)) * float(pi @ np.abs(gv))
    return DoukhanCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + 1e-12)


@numba.njit(cache=True)
def _walk(cum_init, cum_rows, u):
    n = u.size
    s = cum_rows.shape[0]
    out = np.empty(n, dtype=np.int64)
    x = 0
    while x < s - 1 and u[0] >= cum_init[x]:
        x += 1
    out[0] = x
    for i in range(1, n):
        row = cum_rows[x]
        y = 0
        while y < s - 1 and u[i] >= row[y]:
            y += 1
        out[i] = y
        x = y
    return out


def _cumulative(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p, axis=-1)
    c[..., -1] = 1.0
    return np.ascontiguousarray(c)


def chain_states(chain: FiniteMarkovChain, length: int, rng: np.random.Generator, burn_in: int = 0) -> np.ndarray:
    """State path of ``length`` steps; stationary start unless ``chain.initial`` is set."""
    start = chain.pi if chain.initial is None else chain.initial
    u = rng.random(length + burn_in)
    path = _walk(_cumulative(np.asarray(start)), _cumulative(np.asarray(chain.P)), u)
    return path[burn_in:]


def simulate_chain(chain: FiniteMarkovChain, length: int, seed: int, burn_in: int = 0) -> np.ndarray:
    """Observable path ``f(X_1), ..., f(X_length)`` driven by the Philox stream for ``seed``.

    ``burn_in`` steps are discarded first; it is meant for chains with a
    non-stationary ``initial`` law.
    """
    if length < 1:
        raise ValidationError("length must be >= 1")
    if burn_in < 0:
        raise ValidationError("burn_in must be >= 0")
    return chain.f[chain_states(chain, length, generator(seed), burn_in)]


# ---------------------------------------------------------------------------
# Mixing profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixingProfile:
    psi: Mapping[int, float]
    certified: bool = False

    def __post_init__(self):
        clean = {}
        for gap, value in dict(self.psi).items():
            value = float(value)
            if not value >= 0:
                raise ValidationError(f"psi({gap}) must be nonnegative, got {value}")
            clean[int(gap)] = value
        object.__setattr__(self, "psi", clean)

    def __call__(self, n: int) -> float:
        try:
            return self.psi[int(n)]
        except KeyError:
            raise ProfileError(f"psi({n}) is not tabulated") from None

    @classmethod
    def from_chain(cls, chain: FiniteMarkovChain, gaps: Iterable[int]) -> "MixingProfile":
        return cls({g: psi_coefficient(chain, g) for g in gaps}, certified=True)

    @classmethod
    def constant(cls, value: float, gaps: Iterable[int]) -> "MixingProfile":
        return cls({g: value for g in gaps}, certified=False)


# ---------------------------------------------------------------------------
# Sources for Monte Carlo
# ---------------------------------------------------------------------------

class NormalSource:
    """I.i.d. standard normal observations."""

    kind = "normal"
    mean = 0.0

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(length)

    def exact_block_sums(self, m: int, k: int, rng: np.random.Generator) -> np.ndarray:
        # Each retained block sum is exactly N(0, m).
        return math.sqrt(m) * rng.standard_normal(k)

    def psi(self, n: int) -> float:
        return 0.0

    def describe(self) -> dict:
        return {"kind": self.kind}


class ZeroSource:
    kind = "zero"
    mean = 0.0

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(length)

    def psi(self, n: int) -> float:
        return 0.0

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass
class MovingAverageSource:
    """``eta_i = (e_i + ... + e_{i+q}) / sqrt(q+1)`` with i.i.d. normal ``e``: q-dependent."""

    order: int
    kind: str = field(default="ma", init=False)
    mean: float = field(default=0.0, init=False)

    def __post_init__(self):
        if self.order < 0:
            raise ValidationError("moving-average order must be >= 0")

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        q = self.order
        e = rng.standard_normal(length + q)
        c = np.concatenate([[0.0], np.cumsum(e)])
        return (c[q + 1:] - c[: length]) / math.sqrt(q + 1)

    def psi(self, n: int) -> float:
        # Gaussian dependence within the window has unbounded density ratios.
        return 0.0 if n > self.order else math.inf

    def describe(self) -> dict:
        return {"kind": self.kind, "order": self.order}


@dataclass
class ChainSource:
    chain: FiniteMarkovChain
    kind: str = field(default="markov", init=False)
    mean: float = field(default=0.0, init=False)

    def sample(self, length: int, rng: np.random.Generator) -> np.ndarray:
        return self.chain.f[chain_states(self.chain, length, rng)]

    def psi(self, n: int) -> float:
        return psi_coefficient(self.chain, n)

    def describe(self) -> dict:
        return {"kind": self.kind, "chain": self.chain.to_dict()}


Source = Union[NormalSource, ZeroSource, MovingAverageSource, ChainSource]


def source_from_spec(spec: Union[str, Mapping], base_dir: Optional[Path] = None) -> Source:
    """Build a source from ``{"kind": ...}`` or a bare kind name.

    Kinds: ``normal``, ``zero``, ``ma`` (with ``order``), ``markov`` (with
    an inline ``chain`` object or a ``chain_file`` path).
    """
    if isinstance(spec, str):
        spec = {"kind": spec}
    kind = spec.get("kind")
    if kind == "normal":
        return NormalSource()
    if kind == "zero":
        return ZeroSource()
    if kind == "ma":
        return MovingAverageSource(int(spec.get("order", 1)))
    if kind == "markov":
        if "chain" in spec:
            return ChainSource(chain_from_dict(spec["chain"]))
        if "chain_file" in spec:
            path = Path(spec["chain_file"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return ChainSource(load_chain(path))
        raise ConfigError("markov source needs 'chain' or 'chain_file'")
    raise ConfigError(f"unknown source kind {kind!r}")


# ---------------------------------------------------------------------------
# Moment conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentRow:
    m: int
    second: float
    second_se: float
    higher: float
    higher_se: float


@dataclass(frozen=True)
class MomentReport:
    rho: float
    replicates: int
    rows: tuple
    c1_sq: float
    c2_pow: float

    @property
    def lower_condition_ok(self) -> bool:
        """Whether the block variance stays bounded away from zero on the grid."""
        return self.c1_sq > 0


def moment_diagnostics(source: Source, m_grid: Sequence[int], rho: float, replicates: int, seed: int) -> MomentReport:
    """Monte Carlo estimates of ``E S_m^2 / m`` and ``E|S_m|^(2+rho) / m^(1+rho/2)``.

    ``S_m`` is the sum of the first ``m`` observations. The envelope reports
    the smallest normalized second moment (an estimate of ``c_1^2``) and the
    largest normalized higher moment (an estimate of ``c_2^(2+rho)``).
    """
    grid = sorted({int(m) for m in m_grid})
    if not grid or grid[0] < 1:
        raise ValidationError("m-grid must be a nonempty set of positive integers")
    if not 0 < rho <= 1:
        raise ValidationError("rho must lie in (0, 1]")
    if replicates < 100:
        raise ValidationError("need at least 100 replicates")
    mmax = grid[-1]
    partial = np.empty((replicates, mmax))
    for r in range(replicates):
        partial[r] = np.cumsum(source.sample(mmax, stream(seed, r)))
    rows = []
    p = 2.0 + rho
    for m in grid:
        S = partial[:, m - 1]
        a = S * S / m
        b = np.abs(S) ** p / m ** (1.0 + rho / 2.0)
        rows.append(MomentRow(
            m=m,
            second=float(a.mean()),
            second_se=float(a.std(ddof=1) / math.sqrt(replicates)),
            higher=float(b.mean()),
            higher_se=float(b.std(ddof=1) / math.sqrt(replicates)),
        ))
    return MomentReport(
        rho=rho,
        replicates=replicates,
        rows=tuple(rows),
        c1_sq=min(r.second for r in rows),
        c2_pow=max(r.higher for r in rows),
    )
