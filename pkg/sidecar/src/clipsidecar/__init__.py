"""CLIP embedding sidecar: HTTP service and EBAE batch exporter."""

from .backends import ClipBackend, HashBackend, load_backend
from .ebae import write_ebae
from .export import batch_export
from .preprocessing import preprocess
from .service import create_app

__version__ = "0.1.0"
