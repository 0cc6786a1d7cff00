"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class TrainingFailure(RuntimeError):
    """Sub-network training stopped without reaching its target MSE."""

    def __init__(self, message: str, best_mse: float):
        super().__init__(f"{message} (best mse {best_mse:.6g})")
        self.best_mse = best_mse


class CompositionError(ValueError):
    pass
