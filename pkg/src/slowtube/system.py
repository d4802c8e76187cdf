"""Fast-slow system container: symbolic fields, Jacobians, evaluations.

A system x' = f(x, y, eps), y' = eps * g(x, y, eps) is described by
expression trees for f and g over declared fast/slow variable names, a
parameter table of interval values, and the validated parameter range
[0, eps0].  All partial derivative trees are built once and cached; interval
evaluation of those trees over a box yields rigorous Jacobian enclosures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interval import IMatrix, Interval, IVector
from .symexpr import diff, parse

__all__ = ["FastSlowSystem", "NewtonFailed", "newton_layer_equilibrium"]

EPS_NAME = "eps"


class NewtonFailed(RuntimeError):
    """Floating Newton iteration for a layer equilibrium did not converge."""


@dataclass(frozen=True)
class FastSlowSystem:
    fast_vars: tuple
    slow_vars: tuple
    f_exprs: tuple
    g_exprs: tuple
    params: dict
    eps0: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def from_strings(fast_vars, slow_vars, f_sources, g_sources, params, eps0):
        """Build a system from expression text; params map names to numbers,
        (lo, hi) pairs, or Interval values."""
        fast_vars = tuple(fast_vars)
        slow_vars = tuple(slow_vars)
        if len(f_sources) != len(fast_vars):
            raise ValueError("need one fast equation per fast variable")
        if len(g_sources) != len(slow_vars):
            raise ValueError("need one slow equation per slow variable")
        declared = set(fast_vars) | set(slow_vars) | set(params) | {EPS_NAME}
        if len(declared) < len(fast_vars) + len(slow_vars) + len(params) + 1:
            raise ValueError("variable/parameter names must be distinct")
        ivparams = {}
        for k, v in params.items():
            if isinstance(v, Interval):
                ivparams[k] = v
            elif isinstance(v, (tuple, list)):
                ivparams[k] = Interval(float(v[0]), float(v[1]))
            else:
                ivparams[k] = Interval.point(float(v))
        f_exprs = tuple(parse(s) for s in f_sources)
        g_exprs = tuple(parse(s) for s in g_sources)
        for e in f_exprs + g_exprs:
            undeclared = e.free_vars() - declared
            if undeclared:
                raise ValueError(f"undeclared names in right-hand side: {sorted(undeclared)}")
        if eps0 < 0:
            raise ValueError("eps0 must be nonnegative")
        return FastSlowSystem(
            fast_vars=fast_vars,
            slow_vars=slow_vars,
            f_exprs=f_exprs,
            g_exprs=g_exprs,
            params=ivparams,
            eps0=float(eps0),
        )

    @property
    def n(self) -> int:
        return len(self.fast_vars)

    @property
    def l(self) -> int:
        return len(self.slow_vars)

    # -- cached derivative trees -------------------------------------------

    def _deriv_grid(self, key, exprs, names):
        grid = self._cache.get(key)
        if grid is None:
            grid = tuple(tuple(diff(e, v) for v in names) for e in exprs)
            self._cache[key] = grid
        return grid

    @property
    def fx_trees(self):
        return self._deriv_grid("fx", self.f_exprs, self.fast_vars)

    @property
    def fy_trees(self):
        return self._deriv_grid("fy", self.f_exprs, self.slow_vars)

    @property
    def feps_trees(self):
        return self._deriv_grid("feps", self.f_exprs, (EPS_NAME,))

    @property
    def gx_trees(self):
        return self._deriv_grid("gx", self.g_exprs, self.fast_vars)

    @property
    def gy_trees(self):
        return self._deriv_grid("gy", self.g_exprs, self.slow_vars)

    @property
    def geps_trees(self):
        return self._deriv_grid("geps", self.g_exprs, (EPS_NAME,))

    # -- environments -------------------------------------------------------

    def env(self, x_box, y_box, eps_iv: Interval) -> dict:
        """Interval environment binding fast vars, slow vars, eps, params."""
        e = dict(self.params)
        for name, iv in zip(self.fast_vars, x_box):
            e[name] = iv
        for name, iv in zip(self.slow_vars, y_box):
            e[name] = iv
        e[EPS_NAME] = eps_iv
        return e

    def float_env(self, x, y, eps: float) -> dict:
        e = {k: v.mid for k, v in self.params.items()}
        for name, v in zip(self.fast_vars, x):
            e[name] = float(v)
        for name, v in zip(self.slow_vars, y):
            e[name] = float(v)
        e[EPS_NAME] = float(eps)
        return e

    # -- interval evaluations ------------------------------------------------

    def f_ivec(self, env) -> IVector:
        return IVector([e.eval(env) for e in self.f_exprs])

    def g_ivec(self, env) -> IVector:
        return IVector([e.eval(env) for e in self.g_exprs])

    def _grid_imat(self, grid, env) -> IMatrix:
        return IMatrix([[d.eval(env) for d in row] for row in grid])

    def fx_imat(self, env) -> IMatrix:
        return self._grid_imat(self.fx_trees, env)

    def fy_imat(self, env) -> IMatrix:
        return self._grid_imat(self.fy_trees, env)

    def gx_imat(self, env) -> IMatrix:
        return self._grid_imat(self.gx_trees, env)

    def gy_imat(self, env) -> IMatrix:
        return self._grid_imat(self.gy_trees, env)

    def feps_ivec(self, env) -> IVector:
        return IVector([row[0].eval(env) for row in self.feps_trees])

    def geps_ivec(self, env) -> IVector:
        return IVector([row[0].eval(env) for row in self.geps_trees])

    # -- floating evaluations (predictors, sample points) ---------------------

    def f_point(self, x, y, eps: float = 0.0) -> np.ndarray:
        env = self.float_env(x, y, eps)
        return np.array([e.eval_float(env) for e in self.f_exprs])

    def g_point(self, x, y, eps: float = 0.0) -> np.ndarray:
        env = self.float_env(x, y, eps)
        return np.array([e.eval_float(env) for e in self.g_exprs])

    def fx_point(self, x, y, eps: float = 0.0) -> np.ndarray:
        env = self.float_env(x, y, eps)
        return np.array([[d.eval_float(env) for d in row] for row in self.fx_trees])

    def fy_point(self, x, y, eps: float = 0.0) -> np.ndarray:
        env = self.float_env(x, y, eps)
        return np.array([[d.eval_float(env) for d in row] for row in self.fy_trees])


def newton_layer_equilibrium(
    system: FastSlowSystem,
    y_bar,
    x_guess,
    tol: float = 1e-13,
    max_iter: int = 60,
) -> np.ndarray:
    """Damped Newton for f(x, y_bar, 0) = 0 in the fast variables."""
    x = np.array(x_guess, dtype=float)
    y = np.asarray(y_bar, dtype=float)
    r = system.f_point(x, y, 0.0)
    best = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        if best <= tol:
            return x
        J = system.fx_point(x, y, 0.0)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise NewtonFailed(f"singular Jacobian at {x}: {exc}") from exc
        t = 1.0
        for _ in range(10):
            cand = x + t * step
            rc = system.f_point(cand, y, 0.0)
            nc = float(np.max(np.abs(rc)))
            if nc < best or nc <= tol:
                x, r, best = cand, rc, nc
                break
            t *= 0.5
        else:
            raise NewtonFailed(f"line search stalled at residual {best:.3e}")
    if best <= tol * 100:
        return x
    raise NewtonFailed(f"no convergence, residual {best:.3e}")
