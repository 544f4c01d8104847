"""Export Hugging Face GPT-2-family checkpoints into faultlab's format.

The converter is deliberately independent of faultlab itself: it writes
the FLTLAB01 container and the BPE vocab/merges text files purely from
their documented formats (see ``docs/checkpoint_format.md`` and
``docs/data_formats.md`` in the faultlab repository), so a bug in either
implementation shows up as a cross-check failure instead of being
invisible.
"""

from .container import write_checkpoint
from .convert import ConversionSummary, convert, resolve_source
from .errors import ConvertError
from .gpt2 import map_config, plan_tensors, target_shapes
from .tokenizer_files import export_tokenizer_files

__version__ = "0.1.0"

__all__ = [
    "ConversionSummary",
    "ConvertError",
    "convert",
    "export_tokenizer_files",
    "map_config",
    "plan_tensors",
    "resolve_source",
    "target_shapes",
    "write_checkpoint",
    "__version__",
]
