"""EIT reconstruction with the IAS algorithm and a complete electrode model."""

from ._eitias import (
    Problem,
    backends,
    make_mesh,
    phantom_field,
    solve_least_squares,
    theta_update,
)

__all__ = ["Problem", "backends", "make_mesh", "phantom_field", "solve_least_squares", "theta_update"]
