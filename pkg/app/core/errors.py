"""Exception hierarchy shared by the solver, bench and service layers."""

from typing import Any, Optional


class TrajoptError(Exception):
    """Base class for every error raised by this package."""


class DaArgumentError(TrajoptError, ValueError):
    """Invalid argument to a polynomial operation (index, arity, context, tolerance)."""


class DaDomainError(TrajoptError, ArithmeticError):
    """Intrinsic evaluated with a constant part outside its domain."""

    def __init__(self, function: str, value: float):
        self.function = function
        self.value = value
        super().__init__(f"{function} undefined at constant part {value!r}")


class CapabilityError(TrajoptError):
    """Requested derivative order exceeds what the truncation order can represent."""


class DynamicsDomainError(TrajoptError, ArithmeticError):
    """Dynamics evaluated at a singular state."""

    def __init__(
        self,
        quantity: str,
        value: float,
        stage: Optional[int] = None,
        substep: Optional[int] = None,
    ):
        self.quantity = quantity
        self.value = value
        self.stage = stage
        self.substep = substep
        super().__init__(self._describe())

    def _describe(self) -> str:
        where = []
        if self.stage is not None:
            where.append(f"stage {self.stage}")
        if self.substep is not None:
            where.append(f"substep {self.substep}")
        suffix = f" ({', '.join(where)})" if where else ""
        return f"singular {self.quantity} = {self.value!r}{suffix}"

    def at(self, stage: Optional[int] = None, substep: Optional[int] = None) -> "DynamicsDomainError":
        """Attach location context and refresh the message."""
        if stage is not None:
            self.stage = stage
        if substep is not None:
            self.substep = substep
        self.args = (self._describe(),)
        return self


class RegularizationExhausted(TrajoptError):
    """The Q_uu regularization ladder went past its ceiling."""

    def __init__(self, rho: float, reg_max: float):
        self.rho = rho
        self.reg_max = reg_max
        super().__init__(f"regularization {rho:.3e} exceeds ceiling {reg_max:.3e}")


class ConvergenceFailure(TrajoptError):
    """Solver did not converge (reported as DNC)."""

    def __init__(self, reason: str, trajectory: Any = None, phase: Optional[str] = None, partial: Any = None):
        self.reason = reason
        self.trajectory = trajectory
        self.phase = phase
        self.partial = partial
        prefix = f"[{phase}] " if phase else ""
        super().__init__(f"{prefix}{reason}")


class FactorizationError(TrajoptError):
    """Non-positive-definite pivot block in the block Cholesky recurrence."""

    def __init__(self, block: int):
        self.block = block
        super().__init__(f"pivot block {block} is not positive definite")


class PolishFailure(TrajoptError):
    """Newton polishing stalled or could not factorize the normal matrix."""

    def __init__(self, reason: str, trajectory: Any = None, d_max: float = float("inf"), trace: Any = None):
        self.reason = reason
        self.trajectory = trajectory
        self.d_max = d_max
        self.trace = list(trace or ())
        super().__init__(f"{reason} (d_max={d_max:.3e})")


class ScenarioError(TrajoptError, ValueError):
    """Scenario file could not be parsed or failed validation."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        key: Optional[str] = None,
    ):
        self.path = path
        self.line = line
        self.key = key
        context = []
        if path:
            context.append(str(path))
        if line is not None:
            context.append(f"line {line}")
        if key:
            context.append(f"key '{key}'")
        prefix = f"{': '.join(context)}: " if context else ""
        super().__init__(f"{prefix}{message}")
