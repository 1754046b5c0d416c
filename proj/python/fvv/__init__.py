"""Free-viewpoint rendering over analytic scenes."""

from ._core import (
    Config,
    ConfigError,
    Error,
    InputError,
    ParseError,
    Pipeline,
    Scene,
    StageError,
    ValidationError,
    ablate,
    even_subset,
    sphere_checker_scene,
    two_sphere_scene,
)

__all__ = [
    "Config",
    "ConfigError",
    "Error",
    "InputError",
    "ParseError",
    "Pipeline",
    "Scene",
    "StageError",
    "ValidationError",
    "ablate",
    "even_subset",
    "sphere_checker_scene",
    "two_sphere_scene",
]
