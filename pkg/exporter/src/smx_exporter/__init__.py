"""smx-exporter: dump any classifier's softmax predictions in the smx/csv
exchange format consumed by the analysis toolkit."""

from .export import ExportError, ExportManifest, export_predictions
from .writer import write_csv, write_smx

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportManifest",
    "export_predictions",
    "write_csv",
    "write_smx",
]
