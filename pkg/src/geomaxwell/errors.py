"""Exception types shared across the package."""


class NonConvergence(RuntimeError):
    """An iterative solve did not reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None, **payload):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.payload = payload

    def __str__(self):
        parts = [super().__str__()]
        if self.residual is not None:
            parts.append(f"residual={self.residual:.3e}")
        if self.iterations is not None:
            parts.append(f"iterations={self.iterations}")
        for k, v in self.payload.items():
            parts.append(f"{k}={v}")
        return ", ".join(parts)


class ConstitutiveError(ValueError):
    """The constitutive map is singular or outside its domain."""


class LeakageError(RuntimeError):
    """Distribution function mass reached the truncated velocity boundary."""


class ConfigError(ValueError):
    """Invalid scenario configuration; message carries the field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class AmbiguousSpectrum(RuntimeError):
    """A spectrum has more than one comparable peak."""
