"""Exact gradients and Hessian-vector products of costs of Runge-Kutta solutions."""

from .tableau import (
    AdjointTableau,
    ButcherTableau,
    PartnerUndefinedError,
    adjoint_partner,
    make_tableau,
    verify_partner,
)
from .odecore import (
    CoupledTrajectory,
    OdeSystem,
    Trajectory,
    coupled_system,
    integrate,
    integrate_coupled,
)
from .adjoint import (
    AdjointSweepResult,
    CostAttachment,
    sweep_first_order,
    sweep_naive,
    sweep_second_order,
)
from .sensitivity import (
    HvpOperator,
    assemble_hessian,
    fd_gradient_oracle,
    fd_hvp_oracle,
    gradient,
    make_hvp_operator,
)
from .problems import allen_cahn, pendulum, wave

__version__ = "0.1.0"
