"""Search-based evasion testing for call-graph malware detectors."""
from .errors import FcgError
from .graph import CriticalArea, FunctionCallGraph, NodeKind, SensitiveApiIndex, identify_critical_area, load_fcg, save_fcg
from .embed import Embedder, Scheme

__version__ = "0.1.0"

__all__ = [
    "FcgError", "CriticalArea", "FunctionCallGraph", "NodeKind", "SensitiveApiIndex",
    "identify_critical_area", "load_fcg", "save_fcg", "Embedder", "Scheme",
]
