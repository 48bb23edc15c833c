"""Benchmark problems, exact Riemann solvers, and reference handling."""

from .exact_euler import EulerRP, RiemannError, solve_euler_rp
from .exact_rhd import RHDRP, solve_rhd_rp
from .reference import (ReferenceProfile, cell_averages_1d, cell_averages_2d,
                        error_norm, load_reference_profile, observed_orders,
                        shock_position, total_variation)
from .setups import (PROBLEMS, Problem, alfven_speed, get_problem,
                     list_problems)

__all__ = [
    "EulerRP", "RHDRP", "RiemannError", "solve_euler_rp", "solve_rhd_rp",
    "exact_riemann_euler", "exact_riemann_rhd",
    "ReferenceProfile", "load_reference_profile", "error_norm",
    "total_variation", "shock_position", "observed_orders",
    "cell_averages_1d", "cell_averages_2d",
    "PROBLEMS", "Problem", "get_problem", "list_problems", "alfven_speed",
]


def exact_riemann_euler(left, right, gamma, xi):
    """Exact Euler Riemann solution sampled at similarity points xi."""
    return solve_euler_rp(left, right, gamma).sample(xi)


def exact_riemann_rhd(left, right, gamma, xi):
    """Exact RHD Riemann solution sampled at similarity points xi."""
    return solve_rhd_rp(left, right, gamma).sample(xi)
