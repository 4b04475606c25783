"""Symmetric block tri-diagonal matrices: block Cholesky factorization and solves."""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from app.core.errors import FactorizationError

logger = logging.getLogger(__name__)


def _check_blocks(diagonal: Sequence[np.ndarray], lower: Sequence[np.ndarray]) -> None:
    if not diagonal:
        raise ValueError("a block tri-diagonal matrix needs at least one diagonal block")
    if len(lower) != len(diagonal) - 1:
        raise ValueError(f"{len(diagonal)} diagonal blocks need {len(diagonal) - 1} sub-diagonal blocks, got {len(lower)}")
    for i, block in enumerate(diagonal):
        if block.ndim != 2 or block.shape[0] != block.shape[1]:
            raise ValueError(f"diagonal block {i} is not square: {block.shape}")
    for i, block in enumerate(lower, start=1):
        expected = (diagonal[i].shape[0], diagonal[i - 1].shape[0])
        if block.shape != expected:
            raise ValueError(f"sub-diagonal block {i} has shape {block.shape}, expected {expected}")


def _assemble(diagonal: Sequence[np.ndarray], lower: Sequence[np.ndarray], symmetric: bool) -> np.ndarray:
    sizes = [d.shape[0] for d in diagonal]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    dense = np.zeros((offsets[-1], offsets[-1]))
    for i, block in enumerate(diagonal):
        dense[offsets[i]:offsets[i + 1], offsets[i]:offsets[i + 1]] = block
    for i, block in enumerate(lower, start=1):
        dense[offsets[i]:offsets[i + 1], offsets[i - 1]:offsets[i]] = block
        if symmetric:
            dense[offsets[i - 1]:offsets[i], offsets[i]:offsets[i + 1]] = block.T
    return dense


@dataclass
class BlockTriDiagonal:
    """Diagonal blocks D_0..D_M and sub-diagonal blocks L_1..L_M (lower[i-1] = L_i couples block i to i-1)."""

    diagonal: List[np.ndarray]
    lower: List[np.ndarray]

    def __post_init__(self):
        _check_blocks(self.diagonal, self.lower)

    @property
    def sizes(self) -> List[int]:
        return [d.shape[0] for d in self.diagonal]

    @property
    def dimension(self) -> int:
        return sum(self.sizes)

    def to_dense(self) -> np.ndarray:
        return _assemble(self.diagonal, self.lower, symmetric=True)


@dataclass
class BlockCholeskyFactor:
    """Lower block bi-diagonal Pi with Pi Pi^T equal to the factorized matrix."""

    diagonal: List[np.ndarray]
    lower: List[np.ndarray]

    @property
    def sizes(self) -> List[int]:
        return [d.shape[0] for d in self.diagonal]

    def to_dense(self) -> np.ndarray:
        return _assemble(self.diagonal, self.lower, symmetric=False)


def block_cholesky(sigma: BlockTriDiagonal) -> BlockCholeskyFactor:
    """
    Factorize block by block.

    Pi_D0 = chol(D_0); Pi_Lk = L_k Pi_D(k-1)^-T; Pi_Dk = chol(D_k - Pi_Lk Pi_Lk^T).

    Raises:
        FactorizationError: a pivot block is not positive definite
    """
    diagonal: List[np.ndarray] = []
    lower: List[np.ndarray] = []
    for k, block in enumerate(sigma.diagonal):
        pivot = block
        if k > 0:
            coupling = solve_triangular(diagonal[-1], sigma.lower[k - 1].T, lower=True).T
            lower.append(coupling)
            pivot = block - coupling @ coupling.T
        try:
            diagonal.append(cholesky(0.5 * (pivot + pivot.T), lower=True))
        except np.linalg.LinAlgError:
            raise FactorizationError(k) from None
    return BlockCholeskyFactor(diagonal, lower)


def tridiag_solve(factor: BlockCholeskyFactor, rhs: np.ndarray) -> np.ndarray:
    """Solve Pi Pi^T z = rhs by forward then backward block substitution."""
    rhs = np.asarray(rhs, dtype=float)
    sizes = factor.sizes
    if rhs.shape != (sum(sizes),):
        raise ValueError(f"right-hand side has shape {rhs.shape}, expected ({sum(sizes)},)")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    pieces = [rhs[offsets[i]:offsets[i + 1]] for i in range(len(sizes))]

    forward: List[np.ndarray] = []
    for k, piece in enumerate(pieces):
        if k > 0:
            piece = piece - factor.lower[k - 1] @ forward[-1]
        forward.append(solve_triangular(factor.diagonal[k], piece, lower=True))

    solution: List[np.ndarray] = [None] * len(sizes)
    for k in range(len(sizes) - 1, -1, -1):
        piece = forward[k]
        if k + 1 < len(sizes):
            piece = piece - factor.lower[k].T @ solution[k + 1]
        solution[k] = solve_triangular(factor.diagonal[k], piece, lower=True, trans="T")
    return np.concatenate(solution) if solution else np.zeros(0)


class FactorizationCost(NamedTuple):
    block_flops: float
    dense_flops: float
    ratio: float


def factorization_cost(sigma: BlockTriDiagonal) -> FactorizationCost:
    """Cubic flop model of the block factorization against a dense Cholesky of the same matrix."""
    sizes = sigma.sizes
    block = 0.0
    for k, size in enumerate(sizes):
        block += size ** 3 / 3.0
        if k > 0:
            previous = sizes[k - 1]
            # triangular solve for Pi_Lk, then the Schur update
            block += previous ** 2 * size + size ** 2 * previous
    dense = sigma.dimension ** 3 / 3.0
    cost = FactorizationCost(block, dense, block / dense if dense else 0.0)
    logger.debug("block Cholesky %.3e flops vs dense %.3e (ratio %.3e)", *cost)
    return cost
