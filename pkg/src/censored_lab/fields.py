"""Scalar fields: evaluable functions with optional exact derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    """A vectorised function on R^dim.

    ``eval`` maps an array of shape (..., dim) to shape (...); ``gradient``
    and ``hessian`` (when given) return (..., dim) and (..., dim, dim).
    """

    eval: Callable
    dim: int
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    support_note: str = "C^inf"
    name: str = "field"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return self.eval(x)

    def __add__(self, other):
        return combine(self, other, 1.0, 1.0)

    def __sub__(self, other):
        return combine(self, other, 1.0, -1.0)

    def scaled(self, c: float) -> "ScalarField":
        grad = None if self.gradient is None else (lambda x: c * self.gradient(x))
        hess = None if self.hessian is None else (lambda x: c * self.hessian(x))
        return ScalarField(lambda x: c * self.eval(x), self.dim, grad, hess, self.support_note, f"{c}*{self.name}")


def combine(u: ScalarField, v: ScalarField, a: float, b: float) -> ScalarField:
    if u.dim != v.dim:
        raise ValueError("fields of different dimension")
    grad = hess = None
    if u.gradient is not None and v.gradient is not None:
        grad = lambda x: a * u.gradient(x) + b * v.gradient(x)
    if u.hessian is not None and v.hessian is not None:
        hess = lambda x: a * u.hessian(x) + b * v.hessian(x)
    return ScalarField(lambda x: a * u.eval(x) + b * v.eval(x), u.dim, grad, hess, "min of parts", f"{u.name}{'+' if b >= 0 else '-'}{v.name}")


def _eye_like(x, dim, c=1.0):
    return np.broadcast_to(c * np.eye(dim), x.shape[:-1] + (dim, dim)).copy()


def torsion(M: float, n: int) -> ScalarField:
    """(M^2 - |x|^2) / (2n); L_Omega of it is 1 on every Omega inside B_M."""
    if not M > 0:
        raise ValueError("M must be positive")
    return ScalarField(
        lambda x: (M * M - np.sum(x * x, axis=-1)) / (2.0 * n),
        n,
        lambda x: -x / n,
        lambda x: _eye_like(x, n, -1.0 / n),
        name=f"torsion(M={M})",
    )


def quadratic(n: int) -> ScalarField:
    """|x|^2."""
    return ScalarField(
        lambda x: np.sum(x * x, axis=-1), n, lambda x: 2.0 * x, lambda x: _eye_like(x, n, 2.0), name="|x|^2"
    )


def affine(slope, offset: float = 0.0) -> ScalarField:
    b = np.atleast_1d(np.asarray(slope, dtype=float))
    n = b.size
    return ScalarField(
        lambda x: x @ b + offset,
        n,
        lambda x: np.broadcast_to(b, x.shape).copy(),
        lambda x: _eye_like(x, n, 0.0),
        name="affine",
    )


def constant(c: float, n: int) -> ScalarField:
    return affine(np.zeros(n), c)


def monomial(p: float, n: int) -> ScalarField:
    """x_n^p on the half space (p >= 0)."""

    def ev(x):
        return np.maximum(x[..., -1], 0.0) ** p

    def grad(x):
        g = np.zeros(x.shape)
        g[..., -1] = p * x[..., -1] ** (p - 1.0)
        return g

    def hess(x):
        h = np.zeros(x.shape + (n,))
        h[..., -1, -1] = p * (p - 1.0) * x[..., -1] ** (p - 2.0)
        return h

    return ScalarField(ev, n, grad, hess, support_note=f"C^{p} at x_n = 0", name=f"x_n^{p}")


def sine(n: int) -> ScalarField:
    """sin(x_1)."""

    def grad(x):
        g = np.zeros(x.shape)
        g[..., 0] = np.cos(x[..., 0])
        return g

    def hess(x):
        h = np.zeros(x.shape + (n,))
        h[..., 0, 0] = -np.sin(x[..., 0])
        return h

    return ScalarField(lambda x: np.sin(x[..., 0]), n, grad, hess, name="sin(x_1)")


def profile_field(profile: Callable, n: int, name: str = "profile") -> ScalarField:
    """Field x -> profile(x_n) on R^n."""
    return ScalarField(lambda x: profile(x[..., -1]), n, name=name)


def translated(u: ScalarField, z) -> ScalarField:
    """u(. ; z) = u(. + z)."""
    z = np.asarray(z, dtype=float)
    return ScalarField(
        lambda x: u.eval(x + z),
        u.dim,
        None if u.gradient is None else (lambda x: u.gradient(x + z)),
        None if u.hessian is None else (lambda x: u.hessian(x + z)),
        u.support_note,
        f"{u.name}(.+z)",
    )


def rescaled(u: ScalarField, r: float) -> ScalarField:
    """u_r(x) = u(r x)."""
    return ScalarField(
        lambda x: u.eval(r * x),
        u.dim,
        None if u.gradient is None else (lambda x: r * u.gradient(r * x)),
        None if u.hessian is None else (lambda x: r * r * u.hessian(r * x)),
        u.support_note,
        f"{u.name}({r}.)",
    )


def hessian_fd_defect(u: ScalarField, x, h: float = 1e-4) -> float:
    """max |central-difference Hessian - u.hessian| at x (checks the O(h^2) contract)."""
    x = np.asarray(x, dtype=float)
    n = u.dim
    H = np.empty((n, n))
    E = np.eye(n) * h
    for i in range(n):
        for j in range(n):
            H[i, j] = (
                u.eval(x + E[i] + E[j]) - u.eval(x + E[i] - E[j]) - u.eval(x - E[i] + E[j]) + u.eval(x - E[i] - E[j])
            ) / (4.0 * h * h)
    return float(np.max(np.abs(H - u.hessian(x))))


CATALOG = {
    "torsion": "torsion(M, n): (M^2 - |x|^2)/(2n)",
    "quadratic": "|x|^2",
    "affine": "b . x + c",
    "monomial": "x_n^p",
    "sin": "sin(x_1)",
}


def from_selector(name: str, n: int, **kw) -> ScalarField:
    """Build a catalog field by name (used by the command line)."""
    if name == "torsion":
        return torsion(kw.get("M", 1.0), n)
    if name == "quadratic":
        return quadratic(n)
    if name == "affine":
        slope = kw.get("slope", np.arange(1, n + 1, dtype=float))
        return affine(slope, kw.get("offset", 0.0))
    if name == "monomial":
        return monomial(kw.get("p", 2.0), n)
    if name == "sin":
        return sine(n)
    if name in ("one", "zero"):
        return constant(1.0 if name == "one" else 0.0, n)
    raise KeyError(f"unknown field {name!r}; choose from {sorted(CATALOG) + ['one', 'zero']}")
