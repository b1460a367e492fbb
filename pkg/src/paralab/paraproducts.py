"""Martingale paraproducts, their companions, and symbolic operator trees.

The product b·f of two step functions splits into three bilinear pieces:
the high-low paraproduct ``pi`` (fluctuations of b against the running
average of f), the diagonal piece ``lambda_op`` (fluctuations against
fluctuations), and the low-high piece ``r_op``.  ``theta`` is pi plus
lambda.  Commutators with left multiplication and the auxiliary maps
``v_ab`` / ``w_afg`` used to control them are provided alongside.

At finite depth every level sum runs k = 1..N, so identities stated for
bi-infinite filtrations pick up explicit level-0 mean terms:

    b·f = pi(b,f) + lambda_op(b,f) + r_op(b,f) + (E_0 b)·(E_0 f)

When the symbol has zero mean the correction vanishes and every stated
identity holds verbatim; ``StepFunction.mean_zero`` produces such symbols.

Operators are also available as symbolic trees (``Pi``, ``Lambda``, ...,
combined with ``Compose``/``Sum``/``Scale``/``Commutator``/``Adjoint``)
that can be applied to functions, assembled into dense matrices on the
atom/matrix-unit basis, and parsed from a small text form used by the CLI.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .lattice import Lattice
from .stepfn import (
    StepFunction,
    _analysis_weights,
    cond_expect_values,
    level_averages,
    multiply,
    multiply_values,
)


def _adj(values: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(values, -1, -2))


def _check_scalar_symbol(a: StepFunction, name: str):
    if not a.is_scalar:
        raise ValueError(f"{name} requires a scalar symbol (m = 1), got m = {a.m}")


# ---------------------------------------------------------------------------
# functional operators (array cores accept a leading batch dimension on f)
# ---------------------------------------------------------------------------


def _diffs(values: np.ndarray, lattice: Lattice) -> list[np.ndarray]:
    """[d_1, ..., d_N] from one coarsening pass."""
    avgs = level_averages(values, lattice)
    return [avgs[k] - avgs[k - 1] for k in range(1, lattice.N + 1)]


def pi_values(b: np.ndarray, f: np.ndarray, lattice: Lattice) -> np.ndarray:
    avgs_f = level_averages(f, lattice)
    diffs_b = _diffs(b, lattice)
    acc = None
    for k in range(1, lattice.N + 1):
        term = multiply_values(diffs_b[k - 1], avgs_f[k - 1])
        acc = term if acc is None else acc + term
    return acc


def pi(b: StepFunction, f: StepFunction) -> StepFunction:
    """Paraproduct with symbol b: sum over k of d_k(b)·E_{k-1}(f)."""
    return f.with_values(pi_values(b.values, f.values, f.lattice))


def pi_star_values(b: np.ndarray, f: np.ndarray, lattice: Lattice) -> np.ndarray:
    diffs_b = _diffs(b, lattice)
    diffs_f = _diffs(f, lattice)
    acc = None
    for k in range(1, lattice.N + 1):
        term = cond_expect_values(
            multiply_values(_adj(diffs_b[k - 1]), diffs_f[k - 1]), lattice, k - 1
        )
        acc = term if acc is None else acc + term
    return acc


def pi_star(b: StepFunction, f: StepFunction) -> StepFunction:
    """Adjoint of the paraproduct: sum over k of E_{k-1}(d_k(b)*·d_k(f))."""
    return f.with_values(pi_star_values(b.values, f.values, f.lattice))


def lambda_values(b: np.ndarray, f: np.ndarray, lattice: Lattice) -> np.ndarray:
    diffs_b = _diffs(b, lattice)
    diffs_f = _diffs(f, lattice)
    acc = None
    for k in range(lattice.N):
        term = multiply_values(diffs_b[k], diffs_f[k])
        acc = term if acc is None else acc + term
    return acc


def lambda_op(b: StepFunction, f: StepFunction) -> StepFunction:
    """Diagonal piece: sum over k of d_k(b)·d_k(f)."""
    return f.with_values(lambda_values(b.values, f.values, f.lattice))


def r_values(b: np.ndarray, f: np.ndarray, lattice: Lattice) -> np.ndarray:
    avgs_b = level_averages(b, lattice)
    diffs_f = _diffs(f, lattice)
    acc = None
    for k in range(1, lattice.N + 1):
        term = multiply_values(avgs_b[k - 1], diffs_f[k - 1])
        acc = term if acc is None else acc + term
    return acc


def r_op(b: StepFunction, f: StepFunction) -> StepFunction:
    """Low-high piece: sum over k of E_{k-1}(b)·d_k(f)."""
    return f.with_values(r_values(b.values, f.values, f.lattice))


def theta_values(b: np.ndarray, f: np.ndarray, lattice: Lattice) -> np.ndarray:
    return pi_values(b, f, lattice) + lambda_values(b, f, lattice)


def theta(b: StepFunction, f: StepFunction) -> StepFunction:
    """pi + lambda: the part of multiplication bounded by the BMO size of b."""
    return f.with_values(theta_values(b.values, f.values, f.lattice))


def commutator_pi_mult(a: StepFunction, b: StepFunction, f: StepFunction) -> StepFunction:
    """[pi_a, M_b](f) = pi(a, b·f) - b·pi(a, f) for a scalar symbol a."""
    _check_scalar_symbol(a, "commutator_pi_mult")
    return pi(a, multiply(b, f)) - multiply(b, pi(a, f))


def v_ab(a: StepFunction, b: StepFunction, f: StepFunction) -> StepFunction:
    """Sum over k of d_k(a)·E_{k-1}(tail sum over j >= k of d_j(b)·d_j(f))."""
    _check_scalar_symbol(a, "v_ab")
    lattice = f.lattice
    diffs_a = _diffs(a.values, lattice)
    diffs_b = _diffs(b.values, lattice)
    diffs_f = _diffs(f.values, lattice)
    N = lattice.N
    tail = None
    tails = [None] * (N + 1)
    for j in range(N, 0, -1):
        term = multiply_values(diffs_b[j - 1], diffs_f[j - 1])
        tail = term if tail is None else tail + term
        tails[j] = tail
    acc = None
    for k in range(1, N + 1):
        term = multiply_values(
            diffs_a[k - 1], cond_expect_values(tails[k], lattice, k - 1)
        )
        acc = term if acc is None else acc + term
    return f.with_values(acc)


def w_afg(a: StepFunction, f: StepFunction, g: StepFunction) -> StepFunction:
    """Bilinear remainder pairing the symbol against two test functions.

    First sum: running prefix of E_{j-1}(d_j(conj a)·d_j(g)) against d_k(f)*.
    Second sum: level-k projections d_k(d_k(conj a)·d_k(g)) against E_{k-1}(f)*.
    """
    _check_scalar_symbol(a, "w_afg")
    lattice = f.lattice
    a_bar = np.conj(a.values)
    diffs_abar = _diffs(a_bar, lattice)
    diffs_g = _diffs(g.values, lattice)
    avgs_f = level_averages(f.values, lattice)
    diffs_f = [avgs_f[k] - avgs_f[k - 1] for k in range(1, lattice.N + 1)]
    acc = None
    prefix = None
    for k in range(1, lattice.N + 1):
        prod = multiply_values(diffs_abar[k - 1], diffs_g[k - 1])
        cond = cond_expect_values(prod, lattice, k - 1)
        prefix = cond if prefix is None else prefix + cond
        term = multiply_values(prefix, _adj(diffs_f[k - 1]))
        term = term - multiply_values(prod - cond, _adj(avgs_f[k - 1]))
        acc = term if acc is None else acc + term
    return f.with_values(acc)


def w_cond_closed(
    a: StepFunction, f: StepFunction, g: StepFunction, m_level: int
) -> StepFunction:
    """Closed form of E_m applied to ``w_afg`` (three-term expression)."""
    _check_scalar_symbol(a, "w_cond_closed")
    lattice = f.lattice
    if not 0 <= m_level <= lattice.N:
        raise ValueError(f"conditioning level {m_level} outside [0, {lattice.N}]")
    a_bar = np.conj(a.values)
    diffs_abar = _diffs(a_bar, lattice)
    diffs_g = _diffs(g.values, lattice)
    avgs_f = level_averages(f.values, lattice)
    f_m_adj = _adj(avgs_f[m_level])

    full = pi_star_values(a.values, g.values, lattice)
    term1 = multiply_values(cond_expect_values(full, lattice, m_level), f_m_adj)

    tail = None
    for j in range(m_level + 1, lattice.N + 1):
        prod = multiply_values(diffs_abar[j - 1], diffs_g[j - 1])
        tail = prod if tail is None else tail + prod
    if tail is None:
        term2 = np.zeros_like(term1)
    else:
        term2 = multiply_values(cond_expect_values(tail, lattice, m_level), f_m_adj)

    term3 = None
    for j in range(1, m_level + 1):
        prod = multiply_values(diffs_abar[j - 1], diffs_g[j - 1])
        piece = multiply_values(prod, _adj(avgs_f[j - 1]))
        term3 = piece if term3 is None else term3 + piece
    if term3 is None:
        term3 = np.zeros_like(term1)

    return f.with_values(term1 - term2 - term3)


def dk_product_expansion(b: StepFunction, f: StepFunction, k: int) -> StepFunction:
    """Level-k projection of d_k(b)·d_k(f) via wavelet coefficient products.

    Expands both level-k differences over the oscillating Haar functions of
    the level-(k-1) intervals; products of two oscillations combine by
    exponent addition, and the combinations that close up to a constant
    (exponent sum divisible by d) drop out of the level-k projection.
    For d = 2 every pair closes up, so the result is identically zero.
    """
    lattice = f.lattice
    d, N = lattice.d, lattice.N
    if not 1 <= k <= N:
        raise ValueError(f"level {k} outside [1, {N}]")
    cb = _level_coefficients(b.values, lattice, k - 1)
    cf = _level_coefficients(f.values, lattice, k - 1)
    n_int = d ** (k - 1)
    mb, mf = cb.shape[-1], cf.shape[-1]
    mout = max(mb, mf)
    combos = np.zeros((n_int, d - 1, mout, mout), dtype=np.complex128)
    for i in range(1, d):
        for j in range(1, d):
            rem = ((i + j - 1) % d) + 1
            if rem == d:
                continue  # closes up to the flat function; killed by d_k
            combos[:, rem - 1] += multiply_values(cb[:, i - 1], cf[:, j - 1])
    Wsyn = np.conj(_analysis_weights(d)).T  # [j, i-1] = w^(i(j+1))
    piece = float(d) ** (k - 1) * np.einsum("ji,kipq->kjpq", Wsyn, combos)
    piece = piece.reshape(d**k, mout, mout)
    values = np.repeat(piece, d ** (N - k), axis=0)
    return StepFunction(lattice, values)


def _level_coefficients(values: np.ndarray, lattice: Lattice, n: int) -> np.ndarray:
    """Wavelet coefficients at one interval level, shape (d^n, d-1, m, m)."""
    d, N = lattice.d, lattice.N
    m = values.shape[-1]
    child_avgs = values.reshape(d ** (n + 1), d ** (N - n - 1), m, m).mean(axis=1)
    W = _analysis_weights(d)
    amp = float(d) ** (n / 2.0) * float(d) ** (-(n + 1))
    return amp * np.einsum("ij,kjpq->kipq", W, child_avgs.reshape(d**n, d, m, m))


# ---------------------------------------------------------------------------
# symbolic operator trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pi:
    symbol: StepFunction


@dataclass(frozen=True, eq=False)
class PiStar:
    symbol: StepFunction


@dataclass(frozen=True, eq=False)
class Lambda:
    symbol: StepFunction


@dataclass(frozen=True, eq=False)
class R:
    symbol: StepFunction


@dataclass(frozen=True, eq=False)
class Theta:
    symbol: StepFunction


@dataclass(frozen=True, eq=False)
class LeftMult:
    symbol: StepFunction


@dataclass(frozen=True, eq=False)
class Identity:
    pass


@dataclass(frozen=True, eq=False)
class Compose:
    factors: tuple  # Compose(A, B)(f) = A(B(f))


@dataclass(frozen=True, eq=False)
class Sum:
    terms: tuple


@dataclass(frozen=True, eq=False)
class Scale:
    factor: complex
    op: "OperatorSpec"


@dataclass(frozen=True, eq=False)
class Commutator:
    left: "OperatorSpec"
    right: "OperatorSpec"


@dataclass(frozen=True, eq=False)
class Adjoint:
    op: "OperatorSpec"


OperatorSpec = Union[
    Pi, PiStar, Lambda, R, Theta, LeftMult, Identity, Compose, Sum, Scale,
    Commutator, Adjoint,
]

_LEAF_TYPES = (Pi, PiStar, Lambda, R, Theta, LeftMult)


def spec_symbols(spec: OperatorSpec) -> list[StepFunction]:
    """All step-function symbols appearing in the tree."""
    if isinstance(spec, _LEAF_TYPES):
        return [spec.symbol]
    if isinstance(spec, Identity):
        return []
    if isinstance(spec, Compose):
        return [s for f in spec.factors for s in spec_symbols(f)]
    if isinstance(spec, Sum):
        return [s for t in spec.terms for s in spec_symbols(t)]
    if isinstance(spec, Scale):
        return spec_symbols(spec.op)
    if isinstance(spec, Commutator):
        return spec_symbols(spec.left) + spec_symbols(spec.right)
    if isinstance(spec, Adjoint):
        return spec_symbols(spec.op)
    raise TypeError(f"unknown operator node {type(spec).__name__}")


def spec_context(spec: OperatorSpec, lattice: Lattice | None = None,
                 m: int | None = None) -> tuple[Lattice, int]:
    """Resolve the lattice and matrix dimension an operator tree acts on."""
    syms = spec_symbols(spec)
    lattices = {s.lattice for s in syms}
    if lattice is not None:
        lattices.add(lattice)
    if len(lattices) > 1:
        raise ValueError("operator symbols live on different lattices")
    if not lattices:
        raise ValueError("cannot infer lattice: tree has no symbols")
    dims = {s.m for s in syms if s.m > 1}
    if m is not None:
        dims.add(m)
    if len(dims) > 1:
        raise ValueError(f"inconsistent matrix dimensions in tree: {sorted(dims)}")
    return lattices.pop(), (dims.pop() if dims else 1)


def adjoint_spec(spec: OperatorSpec) -> OperatorSpec:
    """Symbolic adjoint with respect to the trace-integral pairing."""
    if isinstance(spec, Pi):
        return PiStar(spec.symbol)
    if isinstance(spec, PiStar):
        return Pi(spec.symbol)
    if isinstance(spec, LeftMult):
        return LeftMult(spec.symbol.adjoint())
    if isinstance(spec, R):
        return R(spec.symbol.adjoint())
    if isinstance(spec, Theta):
        return Theta(spec.symbol.adjoint())
    if isinstance(spec, Lambda):
        # Lambda(b)* = Theta(b*) - PiStar(b); collapses to Pi(b*) when d = 2
        return Sum((Theta(spec.symbol.adjoint()), Scale(-1.0, PiStar(spec.symbol))))
    if isinstance(spec, Identity):
        return spec
    if isinstance(spec, Compose):
        return Compose(tuple(adjoint_spec(f) for f in reversed(spec.factors)))
    if isinstance(spec, Sum):
        return Sum(tuple(adjoint_spec(t) for t in spec.terms))
    if isinstance(spec, Scale):
        return Scale(np.conj(spec.factor), adjoint_spec(spec.op))
    if isinstance(spec, Commutator):
        return Scale(-1.0, Commutator(adjoint_spec(spec.left), adjoint_spec(spec.right)))
    if isinstance(spec, Adjoint):
        return spec.op
    raise TypeError(f"unknown operator node {type(spec).__name__}")


def apply_values(spec: OperatorSpec, values: np.ndarray, lattice: Lattice) -> np.ndarray:
    if isinstance(spec, Pi):
        return pi_values(spec.symbol.values, values, lattice)
    if isinstance(spec, PiStar):
        return pi_star_values(spec.symbol.values, values, lattice)
    if isinstance(spec, Lambda):
        return lambda_values(spec.symbol.values, values, lattice)
    if isinstance(spec, R):
        return r_values(spec.symbol.values, values, lattice)
    if isinstance(spec, Theta):
        return theta_values(spec.symbol.values, values, lattice)
    if isinstance(spec, LeftMult):
        return multiply_values(spec.symbol.values, values)
    if isinstance(spec, Identity):
        return values.copy()
    if isinstance(spec, Compose):
        out = values
        for factor in reversed(spec.factors):
            out = apply_values(factor, out, lattice)
        return out
    if isinstance(spec, Sum):
        acc = None
        for term in spec.terms:
            contrib = apply_values(term, values, lattice)
            acc = contrib if acc is None else acc + contrib
        if acc is None:
            raise ValueError("empty operator sum")
        return acc
    if isinstance(spec, Scale):
        return complex(spec.factor) * apply_values(spec.op, values, lattice)
    if isinstance(spec, Commutator):
        ab = apply_values(spec.left, apply_values(spec.right, values, lattice), lattice)
        ba = apply_values(spec.right, apply_values(spec.left, values, lattice), lattice)
        return ab - ba
    if isinstance(spec, Adjoint):
        return apply_values(adjoint_spec(spec.op), values, lattice)
    raise TypeError(f"unknown operator node {type(spec).__name__}")


def apply_operator(spec: OperatorSpec, f: StepFunction) -> StepFunction:
    """Evaluate the operator tree on a step function.

    A scalar argument against matrix symbols is promoted to its multiple
    of the identity matrix, so all nodes (including Identity) act on one
    consistent matrix size.
    """
    lattice, m = spec_context(spec, lattice=f.lattice, m=f.m if f.m > 1 else None)
    values = f.values
    if f.m == 1 and m > 1:
        values = values * np.eye(m)
    return StepFunction(lattice, apply_values(spec, values, lattice))


def assemble(spec: OperatorSpec, lattice: Lattice | None = None,
             m: int | None = None) -> np.ndarray:
    """Dense matrix on the basis {atom s} x {matrix unit e_uv}, atoms major.

    Column (s·m² + u·m + v) holds the coordinates of the operator applied
    to the indicator-of-atom-s times e_uv basis function.
    """
    lattice, m = spec_context(spec, lattice, m)
    A = lattice.n_atoms
    dim = A * m * m
    basis = np.eye(dim, dtype=np.complex128).reshape(dim, A, m, m)
    image = apply_values(spec, basis, lattice)
    return image.reshape(dim, dim).T


def vector_action_matrix(spec: OperatorSpec, lattice: Lattice | None = None,
                         m: int | None = None) -> np.ndarray:
    """Matrix of the operator on column-vector-valued step functions.

    Every operator in this module acts by pointwise left multiplication
    combined with atom averaging, so it preserves each matrix column and
    acts identically on all of them: the full assembled matrix is this
    one tensored with an m x m identity.  In particular both have the
    same singular values.
    """
    lattice, m = spec_context(spec, lattice, m)
    A = lattice.n_atoms
    dim = A * m
    basis = np.zeros((dim, A, m, m), dtype=np.complex128)
    idx = np.arange(dim)
    basis[idx, idx // m, idx % m, 0] = 1.0
    image = apply_values(spec, basis, lattice)
    return image[..., :, :, 0].reshape(dim, dim).T


# ---------------------------------------------------------------------------
# text form used by the CLI, e.g.  commutator(pi(a), mult(b))
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*|[(),]|[^A-Za-z_(),\s]+)")


def parse_operator(text: str, symbols: dict[str, StepFunction]) -> OperatorSpec:
    """Parse the operator text form against a table of named symbols.

    Known forms: pi(x), pistar(x), lambda(x), r(x), theta(x), mult(x),
    identity, compose(E, ...), sum(E, ...), scale(c, E), commutator(E, E),
    adjoint(E); bare names refer to symbols only inside leaf constructors.
    """
    expr, rest = _parse_expr(text.strip(), symbols)
    if rest.strip():
        raise ValueError(f"trailing input in operator expression: {rest!r}")
    return expr


def _parse_expr(text: str, symbols) -> tuple[OperatorSpec, str]:
    match = _TOKEN.match(text)
    if not match:
        raise ValueError(f"expected an operator expression at {text!r}")
    name = match.group(1)
    rest = text[match.end():].lstrip()
    if name in ("id", "identity"):
        return Identity(), rest
    if not rest.startswith("("):
        raise ValueError(f"operator {name!r} needs arguments, e.g. {name}(b)")
    args, rest = _split_args(rest)
    lname = name.lower()
    if lname in ("pi", "pistar", "pi_star", "lambda", "r", "theta", "mult"):
        if len(args) != 1:
            raise ValueError(f"{name} takes exactly one symbol argument")
        sym = _lookup_symbol(args[0], symbols)
        ctor = {
            "pi": Pi, "pistar": PiStar, "pi_star": PiStar, "lambda": Lambda,
            "r": R, "theta": Theta, "mult": LeftMult,
        }[lname]
        return ctor(sym), rest
    if lname == "compose":
        return Compose(tuple(_parse_sub(a, symbols) for a in args)), rest
    if lname == "sum":
        return Sum(tuple(_parse_sub(a, symbols) for a in args)), rest
    if lname == "scale":
        if len(args) != 2:
            raise ValueError("scale takes (constant, operator)")
        return Scale(_parse_complex(args[0]), _parse_sub(args[1], symbols)), rest
    if lname == "commutator":
        if len(args) != 2:
            raise ValueError("commutator takes exactly two operators")
        return Commutator(_parse_sub(args[0], symbols), _parse_sub(args[1], symbols)), rest
    if lname == "adjoint":
        if len(args) != 1:
            raise ValueError("adjoint takes exactly one operator")
        return Adjoint(_parse_sub(args[0], symbols)), rest
    raise ValueError(f"unknown operator {name!r}")


def _parse_sub(text: str, symbols) -> OperatorSpec:
    expr, rest = _parse_expr(text.strip(), symbols)
    if rest.strip():
        raise ValueError(f"trailing input in operator expression: {rest!r}")
    return expr


def _split_args(text: str) -> tuple[list[str], str]:
    """Split '(a, b(c), d)...' into top-level arguments and the remainder."""
    assert text.startswith("(")
    depth = 0
    args, current = [], []
    for pos, ch in enumerate(text):
        if ch == "(":
            depth += 1
            if depth == 1:
                continue
        elif ch == ")":
            depth -= 1
            if depth == 0:
                args.append("".join(current).strip())
                rest = text[pos + 1:].lstrip()
                args = [a for a in args if a]
                return args, rest
        elif ch == "," and depth == 1:
            args.append("".join(current).strip())
            current = []
            continue
        if depth >= 1:
            current.append(ch)
    raise ValueError(f"unbalanced parentheses in {text!r}")


def _lookup_symbol(name: str, symbols: dict[str, StepFunction]) -> StepFunction:
    name = name.strip()
    if name not in symbols:
        known = ", ".join(sorted(symbols)) or "(none)"
        raise ValueError(f"unknown symbol {name!r}; known symbols: {known}")
    return symbols[name]


def _parse_complex(text: str) -> complex:
    cleaned = text.strip().replace(" ", "").replace("i", "j").replace("I", "j")
    try:
        return complex(cleaned)
    except ValueError as exc:
        raise ValueError(f"cannot parse scale constant {text!r}") from exc
