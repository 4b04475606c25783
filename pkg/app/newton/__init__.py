"""Newton polishing with block tri-diagonal normal equations."""

from app.newton.block_tridiag import (
    BlockCholeskyFactor,
    BlockTriDiagonal,
    FactorizationCost,
    block_cholesky,
    factorization_cost,
    tridiag_solve,
)
from app.newton.gamma import (
    ActiveConstraintStack,
    GammaPolys,
    apply_delta_transpose,
    assemble_sigma,
    build_active_set,
    delta_matrix,
    expand_gamma,
    jacobian_blocks,
    merge_decision,
)
from app.newton.polish import NewtonSettings, NewtonStep, PolishResult, convergence_rate, newton_polish

__all__ = [
    'BlockCholeskyFactor',
    'BlockTriDiagonal',
    'FactorizationCost',
    'block_cholesky',
    'factorization_cost',
    'tridiag_solve',
    'ActiveConstraintStack',
    'GammaPolys',
    'apply_delta_transpose',
    'assemble_sigma',
    'build_active_set',
    'delta_matrix',
    'expand_gamma',
    'jacobian_blocks',
    'merge_decision',
    'NewtonSettings',
    'NewtonStep',
    'PolishResult',
    'convergence_rate',
    'newton_polish',
]
