"""Benchmark problem definitions and registry.

Each :class:`Problem` bundles the system, domain, default grid, boundary
conditions, pointwise primitive initializer, and (when available) a
reference solution: an analytic callable, an exact Riemann solution, or a
tabulated profile shipped under ``problems/data/``.
"""

import os

import numpy as np

from ..solver import (ADERSolver, Dirichlet, Grid, Outflow, Periodic,
                      PiecewiseX, Reflect, cell_average_init)
from ..systems import make_system
from .exact_euler import solve_euler_rp
from .exact_rhd import solve_rhd_rp
from .reference import load_reference_profile

__all__ = ["Problem", "get_problem", "list_problems", "alfven_speed"]

_DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

_PARAM_KEYS = {
    "euler": ("gamma",),
    "rhd": ("gamma",),
    "rmhd": ("gamma", "kappa"),
    "baer-nunziato": ("gamma1", "pi1", "gamma2", "pi2",
                      "nu_fric", "mu_relax"),
}


def _params_dict(system):
    return dict(zip(_PARAM_KEYS[system.name], system.params))


def alfven_speed(rho, p, B0, eta, gamma):
    """Propagation speed of the circularly polarized Alfven wave.

    Root of the dispersion relation
    ``eta^2 B0^2 v^4 - (rho h + B0^2 (1 + eta^2)) v^2 + B0^2 = 0``
    on the subluminal branch.
    """
    h = 1.0 + gamma / (gamma - 1.0) * p / rho
    roots = np.roots([eta * eta * B0 * B0,
                      -(rho * h + B0 * B0 * (1.0 + eta * eta)),
                      B0 * B0])
    v2 = min(r.real for r in roots if abs(r.imag) < 1e-14 and 0 < r.real < 1)
    return float(np.sqrt(v2))


# ------------------------------------------------------------ initializers

def _jump_init(VL, VR, x0):
    VL = np.asarray(VL, dtype=np.float64)
    VR = np.asarray(VR, dtype=np.float64)

    def f(x, y):
        return np.where((np.asarray(x) < x0)[..., None], VL, VR)
    return f


def _sod_factory(params):
    return _jump_init([1.0, 0, 0, 0, 1.0], [0.125, 0, 0, 0, 0.1], 0.5)


_BLAST_LEFT = np.array([1.0, 0, 0, 0, 1.0e3])
_BLAST_MID = np.array([1.0, 0, 0, 0, 1.0e-2])
_BLAST_RIGHT = np.array([1.0, 0, 0, 0, 1.0e2])


def _blast_factory(params):
    def f(x, y):
        x = np.asarray(x)
        out = np.where((x < -0.4)[..., None], _BLAST_LEFT, _BLAST_MID)
        return np.where((x > 0.4)[..., None], _BLAST_RIGHT, out)
    return f


def _vortex_prim(x, y, gamma, eps=5.0):
    dx = np.asarray(x) - 5.0
    dy = np.asarray(y) - 5.0
    r2 = dx * dx + dy * dy
    dT = -(eps * eps * (gamma - 1.0) / (8.0 * gamma * np.pi ** 2)
           ) * np.exp(1.0 - r2)
    dv = eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
    base = 1.0 + dT
    out = np.empty(np.broadcast(dx, dy).shape + (5,))
    out[..., 0] = base ** (1.0 / (gamma - 1.0))
    out[..., 1] = 1.0 - dy * dv
    out[..., 2] = 1.0 + dx * dv
    out[..., 3] = 0.0
    out[..., 4] = base ** (gamma / (gamma - 1.0))
    return out


def _vortex_factory(params):
    g = params["gamma"]
    return lambda x, y: _vortex_prim(x, y, g)


def _vortex_reference(params):
    g = params["gamma"]

    def f(x, y, t):
        return _vortex_prim(np.mod(np.asarray(x) - t, 10.0),
                            np.mod(np.asarray(y) - t, 10.0), g)
    return f


_DMR_POST = np.array([8.0 / 1.4, 8.25 * np.sqrt(3.0) / 2.0, -8.25 / 2.0,
                      0.0, 116.5 / 1.4])
_DMR_PRE = np.array([1.0, 0.0, 0.0, 0.0, 1.0 / 1.4])


def _dmr_state(x, y, t):
    """Isolated Mach-10 oblique shock, 60 degrees to the x axis."""
    xs = 1.0 / 6.0 + (np.asarray(y) + 20.0 * t) / np.sqrt(3.0)
    return np.where((np.asarray(x) < xs)[..., None], _DMR_POST, _DMR_PRE)


def _dmr_factory(params):
    return lambda x, y: _dmr_state(x, y, 0.0)


def _kh_factory(params):
    rho0, rho1, vs, a, eta0, sigma = 0.505, 0.495, 0.5, 0.01, 0.1, 0.1

    def f(x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        up = y > 0.0
        arg = np.where(up, (y - 0.5) / a, (y + 0.5) / a)
        sgn = np.where(up, 1.0, -1.0)
        th = np.tanh(arg)
        out = np.empty(np.broadcast(x, y).shape + (5,))
        out[..., 0] = rho0 + sgn * rho1 * th
        out[..., 1] = sgn * vs * th
        out[..., 2] = (sgn * eta0 * vs * np.sin(2.0 * np.pi * x)
                       * np.exp(-(arg * a) ** 2 / sigma))
        out[..., 3] = 0.0
        out[..., 4] = 1.0
        return out
    return f


def _alfven_prim(x, t, gamma, rho=1.0, p=1.0, B0=1.0, eta=1.0):
    va = alfven_speed(rho, p, B0, eta, gamma)
    phi = np.asarray(x) - va * t
    out = np.empty(np.asarray(x).shape + (9,))
    out[..., 0] = rho
    out[..., 1] = 0.0
    out[..., 2] = -va * eta * np.cos(phi)
    out[..., 3] = -va * eta * np.sin(phi)
    out[..., 4] = p
    out[..., 5] = B0
    out[..., 6] = eta * B0 * np.cos(phi)
    out[..., 7] = eta * B0 * np.sin(phi)
    out[..., 8] = 0.0
    return out


def _alfven_factory(params):
    g = params["gamma"]
    return lambda x, y: _alfven_prim(x, 0.0, g)


def _alfven_reference(params):
    g = params["gamma"]
    return lambda x, y, t: _alfven_prim(x, t, g)


def _rotor_factory(params):
    def f(x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        inside = np.hypot(x, y) <= 0.1
        out = np.empty(np.broadcast(x, y).shape + (9,))
        out[..., 0] = np.where(inside, 10.0, 1.0)
        out[..., 1] = np.where(inside, -9.3 * y, 0.0)
        out[..., 2] = np.where(inside, 9.3 * x, 0.0)
        out[..., 3] = 0.0
        out[..., 4] = 1.0
        out[..., 5] = 1.0
        out[..., 6] = 0.0
        out[..., 7] = 0.0
        out[..., 8] = 0.0
        return out
    return f


def _bn_state(rho1, v1, p1, rho2, v2, p2, phi1):
    return np.array([rho1, v1, 0, 0, p1, rho2, v2, 0, 0, p2, phi1])


# ----------------------------------------------------------------- problem

_BC_MAKERS = {
    "periodic": Periodic,
    "outflow": Outflow,
    "reflect": Reflect,
}


class Problem:
    """A named benchmark: system, domain, data, and reference solution."""

    def __init__(self, name, system, ndim, box, default_grid, t_final,
                 bcs, init_factory, system_params=None, reference_kind="none",
                 reference=None, default_flux="rusanov", default_M=3,
                 default_guess="muscl-cn", snap_times=(), description=""):
        self.name = name
        self.system_name = system
        self.ndim = ndim
        self.box = tuple(tuple(float(v) for v in b) for b in box)
        self.default_grid = tuple(default_grid)
        self.t_final = float(t_final)
        self._bcs = bcs
        self._init_factory = init_factory
        self.system_params = dict(system_params or {})
        self.reference_kind = reference_kind
        self._reference = reference
        self.default_flux = default_flux
        self.default_M = default_M
        self.default_guess = default_guess
        self.snap_times = tuple(snap_times)
        self.description = description

    def make_system(self, **overrides):
        return make_system(self.system_name,
                           **{**self.system_params, **overrides})

    def make_bcs(self, params):
        bcs = {}
        for side, spec in self._bcs.items():
            if callable(spec) and not isinstance(spec, str):
                bcs[side] = spec(params)
            else:
                bcs[side] = _BC_MAKERS[spec]()
        return bcs

    def make_grid(self, M, nx=None, ny=None, params=None):
        nx = self.default_grid[0] if nx is None else int(nx)
        if self.ndim == 1:
            return Grid(1, nx, box=self.box, gw=M,
                        bcs=self.make_bcs(params or {}))
        ny = (self.default_grid[1] if ny is None else int(ny))
        return Grid(2, nx, ny, box=self.box, gw=M,
                    bcs=self.make_bcs(params or {}))

    def initializer(self, params):
        return self._init_factory(params)

    def setup(self, M=None, nx=None, ny=None, pipeline="prim", flux=None,
              guess=None, cfl=0.5, fixed_dt=None, velocity="v", npts=3,
              weno_params=None, **system_overrides):
        """Build (solver, Q0) ready to run."""
        M = self.default_M if M is None else int(M)
        flux = self.default_flux if flux is None else flux
        guess = self.default_guess if guess is None else guess
        system = self.make_system(**system_overrides)
        params = _params_dict(system)
        grid = self.make_grid(M, nx, ny, params)
        Q0 = cell_average_init(system, grid, self.initializer(params), npts)
        solver = ADERSolver(system, grid, M, pipeline=pipeline, flux=flux,
                            guess=guess, cfl=cfl, fixed_dt=fixed_dt,
                            velocity=velocity, weno_params=weno_params)
        return solver, Q0

    # -- references -------------------------------------------------------

    def analytic_reference(self, params):
        """Callable f(x, y, t) -> primitive states, or None."""
        if self.reference_kind != "analytic":
            return None
        return self._reference(params)

    def exact_riemann(self, params):
        """Solved Riemann problem plus interface position, or None."""
        if self.reference_kind != "exact-rp":
            return None
        solver_fn, VL, VR, x0 = self._reference
        return solver_fn(VL, VR, params["gamma"]), x0

    def reference_path(self):
        if self.reference_kind != "file":
            return None
        return os.path.join(_DATA_DIR, self._reference)

    def load_reference(self):
        path = self.reference_path()
        return None if path is None else load_reference_profile(path)


# ---------------------------------------------------------------- registry

def _outflow_1d():
    return {"xlo": "outflow", "xhi": "outflow"}


PROBLEMS = {}


def _register(p):
    PROBLEMS[p.name] = p
    return p


_register(Problem(
    "sod", "euler", 1, ((0.0, 1.0),), (400,), 0.2,
    _outflow_1d(), _sod_factory, {"gamma": 1.4},
    reference_kind="exact-rp",
    reference=(solve_euler_rp, [1.0, 0, 0, 0, 1.0], [0.125, 0, 0, 0, 0.1],
               0.5),
    default_flux="rusanov", default_M=3,
    description="Sod shock tube"))

_register(Problem(
    "blast", "euler", 1, ((-0.5, 0.5),), (500,), 0.038,
    {"xlo": "reflect", "xhi": "reflect"}, _blast_factory, {"gamma": 1.4},
    default_flux="rusanov", default_M=3, snap_times=(0.028, 0.038),
    description="interacting blast waves between reflecting walls"))

_register(Problem(
    "vortex", "euler", 2, ((0.0, 10.0), (0.0, 10.0)), (100, 100), 1.0,
    {"xlo": "periodic", "xhi": "periodic",
     "ylo": "periodic", "yhi": "periodic"},
    _vortex_factory, {"gamma": 1.4},
    reference_kind="analytic", reference=_vortex_reference,
    default_flux="osher", default_M=3,
    description="isentropic vortex advected diagonally"))

_register(Problem(
    "dmr", "euler", 2, ((0.0, 3.0), (0.0, 1.0)), (300, 75), 0.2,
    {"xlo": lambda p: Dirichlet(_dmr_state),
     "xhi": "outflow",
     "ylo": lambda p: PiecewiseX(1.0 / 6.0, Dirichlet(_dmr_state), Reflect()),
     "yhi": lambda p: Dirichlet(_dmr_state)},
    _dmr_factory, {"gamma": 1.4},
    default_flux="rusanov", default_M=3,
    description="double Mach reflection of a Mach-10 shock"))

_register(Problem(
    "rhd-rp1", "rhd", 1, ((-0.5, 0.5),), (300,), 0.4,
    _outflow_1d(),
    lambda p: _jump_init([1.0, -0.6, 0, 0, 10.0], [10.0, 0.5, 0, 0, 20.0],
                         0.0),
    {"gamma": 5.0 / 3.0},
    reference_kind="exact-rp",
    reference=(solve_rhd_rp, [1.0, -0.6, 0, 0, 10.0],
               [10.0, 0.5, 0, 0, 20.0], 0.0),
    default_flux="rusanov", default_M=3,
    description="relativistic Riemann problem, double rarefaction"))

_register(Problem(
    "rhd-rp2", "rhd", 1, ((-0.5, 0.5),), (500,), 0.4,
    _outflow_1d(),
    lambda p: _jump_init([1e-3, 0, 0, 0, 1.0], [1e-3, 0, 0, 0, 1e-5], 0.0),
    {"gamma": 5.0 / 3.0},
    reference_kind="exact-rp",
    reference=(solve_rhd_rp, [1e-3, 0, 0, 0, 1.0], [1e-3, 0, 0, 0, 1e-5],
               0.0),
    default_flux="rusanov", default_M=2,
    description="relativistic Riemann problem, strong blast wave"))

_register(Problem(
    "kh", "rhd", 2, ((-0.5, 0.5), (-1.0, 1.0)), (100, 200), 2.0,
    {"xlo": "periodic", "xhi": "periodic",
     "ylo": "periodic", "yhi": "periodic"},
    _kh_factory, {"gamma": 4.0 / 3.0},
    default_flux="osher", default_M=3,
    description="relativistic Kelvin-Helmholtz instability"))

_register(Problem(
    "alfven", "rmhd", 2, ((0.0, 2.0 * np.pi), (0.0, 2.0 * np.pi)),
    (50, 50), 2.0 * np.pi / alfven_speed(1.0, 1.0, 1.0, 1.0, 5.0 / 3.0),
    {"xlo": "periodic", "xhi": "periodic",
     "ylo": "periodic", "yhi": "periodic"},
    _alfven_factory, {"gamma": 5.0 / 3.0, "kappa": 10.0},
    reference_kind="analytic", reference=_alfven_reference,
    default_flux="rusanov", default_M=3, default_guess="adams-bashforth",
    description="circularly polarized Alfven wave, one period"))

_register(Problem(
    "rmhd-rp1", "rmhd", 1, ((-0.5, 0.5),), (400,), 0.4,
    _outflow_1d(),
    lambda p: _jump_init([1.0, 0, 0, 0, 1.0, 0.5, 1.0, 0, 0],
                         [0.125, 0, 0, 0, 0.1, 0.5, -1.0, 0, 0], 0.0),
    {"gamma": 2.0, "kappa": 10.0},
    reference_kind="file", reference="rmhd-rp1.txt",
    default_flux="rusanov", default_M=3,
    description="relativistic Brio-Wu magnetized shock tube"))

_register(Problem(
    "rmhd-rp2", "rmhd", 1, ((-0.5, 0.5),), (400,), 0.55,
    _outflow_1d(),
    lambda p: _jump_init([1.08, 0.4, 0.3, 0.2, 0.95, 2.0, 0.3, 0.3, 0],
                         [1.0, -0.45, -0.2, 0.2, 1.0, 2.0, -0.7, 0.5, 0],
                         0.0),
    {"gamma": 5.0 / 3.0, "kappa": 10.0},
    reference_kind="file", reference="rmhd-rp2.txt",
    default_flux="rusanov", default_M=3,
    description="generic relativistic MHD Riemann problem"))

_register(Problem(
    "rotor", "rmhd", 2, ((-0.6, 0.6), (-0.6, 0.6)), (100, 100), 0.4,
    {"xlo": "outflow", "xhi": "outflow",
     "ylo": "outflow", "yhi": "outflow"},
    _rotor_factory, {"gamma": 4.0 / 3.0, "kappa": 10.0},
    default_flux="rusanov", default_M=3,
    description="relativistic magnetized rotor"))


def _bn_problem(name, VL, VR, t_final, flux, pars, desc):
    _register(Problem(
        name, "baer-nunziato", 1, ((-0.5, 0.5),), (300,), t_final,
        _outflow_1d(), lambda p, L=VL, R=VR: _jump_init(L, R, 0.0),
        pars, reference_kind="file", reference=f"{name}.txt",
        default_flux=flux, default_M=3, description=desc))


_BN_IDEAL = {"gamma1": 1.4, "pi1": 0.0, "gamma2": 1.4, "pi2": 0.0,
             "nu_fric": 0.0, "mu_relax": 0.0}

_bn_problem("bn-rp1",
            _bn_state(1.0, 0.0, 1.0, 0.5, 0.0, 1.0, 0.4),
            _bn_state(2.0, 0.0, 2.0, 1.5, 0.0, 2.0, 0.8),
            0.1, "osher", dict(_BN_IDEAL),
            "two-phase Riemann problem 1")

_bn_problem("bn-rp2",
            _bn_state(800.0, 0.0, 500.0, 1.5, 0.0, 2.0, 0.4),
            _bn_state(1000.0, 0.0, 600.0, 1.0, 0.0, 1.0, 0.3),
            0.1, "osher",
            {"gamma1": 3.0, "pi1": 100.0, "gamma2": 1.4, "pi2": 0.0,
             "nu_fric": 0.0, "mu_relax": 0.0},
            "two-phase Riemann problem 2, stiffened solid phase")

_bn_problem("bn-rp3",
            _bn_state(1.0, 0.9, 2.5, 1.0, 0.0, 1.0, 0.9),
            _bn_state(1.0, 0.0, 1.0, 1.2, 1.0, 2.0, 0.2),
            0.1, "osher", dict(_BN_IDEAL),
            "two-phase Riemann problem 3")

_bn_problem("bn-rp5",
            _bn_state(1.0, 0.0, 1.0, 0.2, 0.0, 0.3, 0.8),
            _bn_state(1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.3),
            0.2, "rusanov", dict(_BN_IDEAL),
            "two-phase Riemann problem 5")

_bn_problem("bn-rp6",
            _bn_state(0.2068, 1.4166, 0.0416, 0.5806, 1.5833, 1.375, 0.1),
            _bn_state(2.2263, 0.9366, 6.0, 0.4890, -0.70138, 0.986, 0.2),
            0.1, "osher", dict(_BN_IDEAL),
            "two-phase Riemann problem 6")


def get_problem(name):
    try:
        return PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: "
                       f"{', '.join(sorted(PROBLEMS))}") from None


def list_problems():
    return sorted(PROBLEMS)
