"""Problem records, argument layouts, and functional evaluation.

The integrand argument vector is flat: slot 0 carries t, followed by the
blocks q, q', ..., q^(m) and then the delayed blocks q(t-tau), ...,
q^(m)(t-tau), each of length n.  Control-problem integrands use the layout
(t; q; u; q_tau; u_tau) and the Hamiltonian adds (p; lambda) blocks.

All records are immutable after construction and evaluation is pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import calculus, expr
from .errors import OutOfDomain
from .trajectory import Trajectory, segments_from_callable

__all__ = ["ArgLayout", "ArgVector", "Integrand", "IsoperimetricProblem", "AugmentedSetup",
           "ControlProblem", "TransformationGroup", "args_at", "augmented_integrand",
           "functional_value", "constraint_values", "constraint_defect", "problem_from_json",
           "integrand_from_expr"]


@dataclass(frozen=True)
class ArgLayout:
    """Block lengths of a flat argument vector; block indices are 1-based."""

    blocks: tuple[int, ...]

    @classmethod
    def variational(cls, m: int, n: int) -> "ArgLayout":
        return cls((1,) + (n,) * (2 * (m + 1)))

    @classmethod
    def control(cls, n: int, mc: int, k: int = 0) -> "ArgLayout":
        """Hamiltonian layout (t; q; u; q_tau; u_tau; p; lambda)."""
        return cls((1, n, mc, n, mc, n, k))

    @property
    def nblocks(self) -> int:
        return len(self.blocks)

    @property
    def size(self) -> int:
        return sum(self.blocks)

    def block_slice(self, block: int) -> slice:
        start = sum(self.blocks[: block - 1])
        return slice(start, start + self.blocks[block - 1])


class ArgVector:
    """Flat argument values (scalars or per-slot arrays) plus their layout."""

    __slots__ = ("values", "layout")

    def __init__(self, values, layout: ArgLayout):
        self.values = list(values)
        self.layout = layout
        if len(self.values) != layout.size:
            raise ValueError(f"{len(self.values)} values for a layout of size {layout.size}")

    def block(self, b: int) -> np.ndarray:
        return np.asarray(self.values[self.layout.block_slice(b)])


class Integrand:
    """Scalar integrand over a flat argument vector.

    ``fn(values) -> value`` must be deterministic and should accept numpy
    arrays (and the toolkit's dual numbers) in the slots; ``partial_fn(block,
    values)`` optionally supplies analytic block gradients.
    """

    __slots__ = ("fn", "partial_fn", "name")

    def __init__(self, fn: Callable, partial_fn: Callable | None = None, name: str = ""):
        self.fn = fn
        self.partial_fn = partial_fn
        self.name = name or getattr(fn, "__name__", "integrand")

    def __call__(self, values):
        return self.fn(values)

    def __repr__(self):
        return f"Integrand({self.name})"


def integrand_from_expr(text: str, m: int, n: int) -> Integrand:
    """Compile an expression over the variational argument names."""
    ast = expr.parse(text)
    return Integrand(expr.compiled(ast, expr.Binding(m, n)), name=text)


def constant_integrand(value: float) -> Integrand:
    def fn(values):
        t = np.asarray(values[0], dtype=float)
        return np.full(t.shape, value) if t.ndim else value

    return Integrand(fn, name=f"const<{value}>")


@dataclass(frozen=True)
class IsoperimetricProblem:
    """Higher-order isoperimetric variational problem with one fixed delay."""

    m: int
    n: int
    tau: float
    t1: float
    t2: float
    L: Integrand
    g: tuple[Integrand, ...] = ()
    l: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: Callable | None = None
    boundary: np.ndarray | None = None  # rows i = 0..m-1: q^(i)(t2)

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "l", np.atleast_1d(np.asarray(self.l, dtype=float)))
        if self.boundary is not None:
            b = np.asarray(self.boundary, dtype=float).reshape(self.m, self.n)
            object.__setattr__(self, "boundary", b)
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not self.tau < self.t2 - self.t1:
            raise ValueError("need tau < t2 - t1")
        if len(self.g) != len(self.l):
            raise ValueError(f"{len(self.g)} constraint integrands but {len(self.l)} targets")

    @property
    def k(self) -> int:
        return len(self.g)

    @property
    def layout(self) -> ArgLayout:
        return ArgLayout.variational(self.m, self.n)

    @property
    def span(self) -> float:
        return self.t2 - self.t1

    def stitched_history(self, panels: int = 4):
        """History callable interpolated into polynomial segments on [t1-tau, t1]."""
        if self.history is None:
            raise ValueError("problem has no history function")
        return segments_from_callable(self.history, self.t1 - self.tau, self.t1,
                                      panels=panels, degree=self.m + 2)


@dataclass(frozen=True)
class AugmentedSetup:
    """A problem together with its multiplier vector, fixing F = L - lam . g."""

    problem: IsoperimetricProblem
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "lam", lam)
        if len(lam) != self.problem.k:
            raise ValueError(f"lambda has {len(lam)} entries for {self.problem.k} constraints")


@dataclass(frozen=True)
class ControlProblem:
    """Delayed optimal-control problem: minimize int L dt s.t. qdot = phi."""

    n: int
    mc: int
    tau: float
    t1: float
    t2: float
    L: Integrand
    phi: tuple[Integrand, ...]
    g: tuple[Integrand, ...] = ()
    l: np.ndarray = field(default_factory=lambda: np.zeros(0))
    history: Callable | None = None
    control_history: Callable | None = None
    terminal_state: np.ndarray | None = None  # fixed q(t2); None => p(t2) = 0

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(self.phi))
        object.__setattr__(self, "g", tuple(self.g))
        object.__setattr__(self, "l", np.atleast_1d(np.asarray(self.l, dtype=float)))
        if self.terminal_state is not None:
            q = np.atleast_1d(np.asarray(self.terminal_state, dtype=float))
            object.__setattr__(self, "terminal_state", q)
        if not 0 < self.tau < self.t2 - self.t1:
            raise ValueError("need 0 < tau < t2 - t1")
        if len(self.phi) != self.n:
            raise ValueError("phi must have one component per state dimension")

    @property
    def k(self) -> int:
        return len(self.g)

    @property
    def layout(self) -> ArgLayout:
        """Layout of L / g / phi arguments: (t; q; u; q_tau; u_tau)."""
        return ArgLayout((1, self.n, self.mc, self.n, self.mc))

    @property
    def span(self) -> float:
        return self.t2 - self.t1


@dataclass(frozen=True)
class TransformationGroup:
    """Infinitesimal generators of an s-parameter transformation group.

    For variational problems eta and xi take (t, q); for control problems
    they take (t, q, u) and the optional varrho / varsigma act on the control
    and costate.  The gauge term is an integrand over the problem's argument
    layout (None means identically zero).
    """

    eta: Callable
    xi: Callable
    gauge: Integrand | None = None
    varrho: Callable | None = None
    varsigma: Callable | None = None


# ---------------------------------------------------------------------------
# argument assembly and functional evaluation


def args_at(traj: Trajectory, t, tau: float, m: int) -> ArgVector:
    """[q]^m_tau(t): current and delayed derivative blocks along a trajectory.

    Vectorized: t may be an array, in which case every slot holds an array.
    """
    layout = ArgLayout.variational(m, traj.n)
    t = np.asarray(t, dtype=float)
    values: list = [t if t.ndim else float(t)]
    for shift in (0.0, -tau):
        for j in range(m + 1):
            block = traj.eval(t + shift, j)
            if t.ndim:
                values.extend(block[..., i] for i in range(traj.n))
            else:
                values.extend(float(x) for x in np.atleast_1d(block))
    return ArgVector(values, layout)


def augmented_integrand(setup: AugmentedSetup) -> Integrand:
    """F = L - lam . g; analytic partials compose linearly when present."""
    L, gs, lam = setup.problem.L, setup.problem.g, setup.lam
    if not len(lam):
        return L

    def fn(values):
        out = L(values)
        for lj, gj in zip(lam, gs):
            if lj != 0.0:
                out = out - lj * gj(values)
        return out

    partial_fn = None
    if L.partial_fn is not None and all(gj.partial_fn is not None for gj in gs):
        def partial_fn(block, values):
            out = np.asarray(L.partial_fn(block, values), dtype=float).copy()
            for lj, gj in zip(lam, gs):
                out -= lj * np.asarray(gj.partial_fn(block, values), dtype=float)
            return out

    return Integrand(fn, partial_fn, name=f"{L.name} - lam.g")


def _quadrature_breaks(problem: IsoperimetricProblem, traj: Trajectory) -> list[float]:
    breaks = set(traj.breakpoints())
    breaks.update(b + problem.tau for b in traj.breakpoints())
    breaks.add(problem.t2 - problem.tau)
    return sorted(breaks)


def _check_coverage(problem: IsoperimetricProblem, traj: Trajectory) -> None:
    lo, hi = traj.domain
    slack = 1e-9 * max(1.0, problem.span)
    if lo > problem.t1 - problem.tau + slack or hi < problem.t2 - slack:
        raise OutOfDomain(
            f"trajectory covers [{lo}, {hi}], problem needs "
            f"[{problem.t1 - problem.tau}, {problem.t2}]"
        )


def path_value_function(integrand: Integrand, traj: Trajectory, tau: float, m: int):
    """t |-> integrand([q]^m_tau(t)), accepting scalar or array t."""

    def fn(ts):
        return np.asarray(integrand(args_at(traj, ts, tau, m).values), dtype=float)

    return fn


def functional_value(problem: IsoperimetricProblem, traj: Trajectory) -> float:
    """J = int_{t1}^{t2} L[q]^m_tau(t) dt by panel quadrature split at breaks."""
    _check_coverage(problem, traj)
    fn = path_value_function(problem.L, traj, problem.tau, problem.m)
    return calculus.integrate(fn, problem.t1, problem.t2, _quadrature_breaks(problem, traj))


def constraint_values(problem: IsoperimetricProblem, traj: Trajectory) -> np.ndarray:
    """I_j = int g_j dt for every constraint integrand."""
    _check_coverage(problem, traj)
    breaks = _quadrature_breaks(problem, traj)
    return np.array([
        calculus.integrate(path_value_function(gj, traj, problem.tau, problem.m),
                           problem.t1, problem.t2, breaks)
        for gj in problem.g
    ])


def constraint_defect(problem: IsoperimetricProblem, traj: Trajectory) -> np.ndarray:
    return constraint_values(problem, traj) - problem.l


# ---------------------------------------------------------------------------
# problem files


def _history_from_exprs(texts: Sequence[str]):
    asts = [expr.parse(s) for s in texts]
    binding = expr.TableBinding({"t": 0})

    def history(t):
        return np.array([expr.bind_eval(a, binding, [t]) for a in asts], dtype=float)

    return history


def problem_from_json(text: str) -> IsoperimetricProblem:
    """Parse the problem-file schema.

    Fields: m, n, tau, t1, t2, L (expression), g (list of expressions),
    l (list of reals), history (expression in t, or a list for n > 1),
    boundary {"q": [...], "qd": [...], ...} giving q^(i)(t2) by derivative
    order (key "q" + "d" * i).
    """
    record = json.loads(text)
    m, n = int(record["m"]), int(record["n"])
    L = integrand_from_expr(record["L"], m, n)
    g = tuple(integrand_from_expr(s, m, n) for s in record.get("g", ()))
    if "k" in record and int(record["k"]) != len(g):
        raise ValueError(f"k = {record['k']} but {len(g)} constraint expressions given")
    hist = record.get("history")
    if hist is not None:
        hist = _history_from_exprs([hist] if isinstance(hist, str) else hist)
    boundary = None
    if "boundary" in record:
        boundary = np.zeros((m, n))
        for i in range(m):
            key = "q" + "d" * i
            if key in record["boundary"]:
                boundary[i] = np.atleast_1d(np.asarray(record["boundary"][key], dtype=float))
    return IsoperimetricProblem(
        m=m, n=n, tau=float(record["tau"]), t1=float(record["t1"]), t2=float(record["t2"]),
        L=L, g=g, l=np.asarray(record.get("l", []), dtype=float),
        history=hist, boundary=boundary,
    )
