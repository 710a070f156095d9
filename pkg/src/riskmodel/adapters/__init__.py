"""Bidirectional mappings between the canonical model and external tools."""

from .common import (
    ExportResult,
    ImportResult,
    MappingEntry,
    MappingTable,
    MAPPING_TABLES,
    merge_fragment,
)
from .cyrus import CyrusExportResult, RelationalExport, export_cyrus, import_cyrus_results
from .monarc import (
    FakeMonarcClient,
    HttpMonarcClient,
    MonarcClient,
    PushReport,
    export_monarc,
    import_monarc,
    monarc_push,
)
from .pistar import export_pistar, import_pistar
from .sync import ChangeSet, apply_changes, diff_models

__all__ = [
    "ChangeSet",
    "CyrusExportResult",
    "ExportResult",
    "FakeMonarcClient",
    "HttpMonarcClient",
    "ImportResult",
    "MAPPING_TABLES",
    "MappingEntry",
    "MappingTable",
    "MonarcClient",
    "PushReport",
    "RelationalExport",
    "apply_changes",
    "diff_models",
    "export_cyrus",
    "export_monarc",
    "export_pistar",
    "import_cyrus_results",
    "import_monarc",
    "import_pistar",
    "merge_fragment",
]
