class ToolkitError(Exception):
    """Base class; carries the CLI exit code."""
    exit_code = 3


class ConfigError(ToolkitError):
    exit_code = 2


class GridError(ToolkitError):
    pass


class ShootingError(ToolkitError):
    pass


class SingularSystemError(ToolkitError):
    def __init__(self, msg, smallest_singular_value=None):
        super().__init__(msg)
        self.smallest_singular_value = smallest_singular_value


class MarchError(ToolkitError):
    pass


class ProfileError(ToolkitError):
    pass
