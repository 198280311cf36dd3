"""Feature and emission export on top of the granalign file formats."""

from .audio import SAMPLE_RATE, load_audio
from .backends import (
    BLANK_LABEL,
    DEFAULT_MODEL,
    FEATURE_DIM,
    FRAME_DUR_S,
    FRAME_HOP,
    HuggingFaceBackend,
    SyntheticBackend,
    get_backend,
)
from .errors import (
    AudioError,
    ExporterError,
    ModelUnavailableError,
    ValidationError,
)
from .export import (
    DEFAULT_LAYERS,
    ExportJob,
    export_emissions,
    export_frame_features,
    export_unit_features,
)

__version__ = "0.1.0"

__all__ = [
    "AudioError",
    "BLANK_LABEL",
    "DEFAULT_LAYERS",
    "DEFAULT_MODEL",
    "ExportJob",
    "ExporterError",
    "FEATURE_DIM",
    "FRAME_DUR_S",
    "FRAME_HOP",
    "HuggingFaceBackend",
    "ModelUnavailableError",
    "SAMPLE_RATE",
    "SyntheticBackend",
    "ValidationError",
    "export_emissions",
    "export_frame_features",
    "export_unit_features",
    "get_backend",
    "load_audio",
    "__version__",
]
