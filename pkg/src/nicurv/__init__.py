"""nicurv: numerical laboratory for negative isotropic curvature."""
__version__ = "0.1.0"


class NicurvError(Exception):
    """Base class for every error raised by nicurv."""
