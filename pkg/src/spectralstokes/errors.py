"""Exception types shared across the package."""


class MeshError(ValueError):
    """Invalid mesh content: parse failures, dangling indices, bad elements."""


class ConfigError(ValueError):
    """Invalid or inconsistent case configuration (CLI exit code 2)."""


class ConvergenceError(RuntimeError):
    """Iterative solve failed to reach its tolerance (CLI exit code 3)."""
