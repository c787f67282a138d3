"""Problem adapters: instance loading, objective evaluation, and the shared
operator set (random / next / unary / binary / ternary) per problem family."""

from .base import ProblemAdapter
from .tsp import TspAdapter, TspInstance
from .bpp import BppAdapter, BppInstance
from .co import CoAdapter, CoFunction
from .vc import VcAdapter, VcInstance
from .params import ParamsAdapter, SurrogateEvaluator, ExternalEvaluator, default_param_space
from .loaders import load_instance, generate_bpp_volumes

__all__ = [
    "ProblemAdapter",
    "TspAdapter",
    "TspInstance",
    "BppAdapter",
    "BppInstance",
    "CoAdapter",
    "CoFunction",
    "VcAdapter",
    "VcInstance",
    "ParamsAdapter",
    "SurrogateEvaluator",
    "ExternalEvaluator",
    "default_param_space",
    "load_instance",
    "generate_bpp_volumes",
]
