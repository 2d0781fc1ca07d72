"""R-D-lambda rate control: offset power-law R-D model, hierarchical
initialization, LMS coefficient updates, GOP/picture bit allocation, a
virtual encoder for closed-loop simulation and R-D curve fitting."""
from .kernels import BACKEND
from .model_core import (
    DomainError,
    ModelCoefficients,
    QpLambdaMap,
    RdGroundTruth,
    VideoGeometry,
    bpp_from_lambda,
    lambda_from_bpp,
    lambda_from_qp,
    qp_from_lambda,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DomainError",
    "ModelCoefficients",
    "QpLambdaMap",
    "RdGroundTruth",
    "VideoGeometry",
    "bpp_from_lambda",
    "lambda_from_bpp",
    "lambda_from_qp",
    "qp_from_lambda",
    "__version__",
]
