"""Offline tag pipeline feeding the cross-modal retrieval engine:
extract tags from foundation models, clean them, assemble tag sentences,
encode them with a frozen text encoder, and write engine-format banks."""

__version__ = "0.1.0"

from .build import build_bank
from .cleaning import clean_raw_output, clean_tags, parse_raw_output
from .encoder import HashingTextEncoder
from .extract import extract_tags, filter_tags
from .records import TagRecord, pool_tags, read_records, write_records
from .sentences import assemble_sentence

__all__ = [
    "HashingTextEncoder", "TagRecord", "assemble_sentence", "build_bank",
    "clean_raw_output", "clean_tags", "extract_tags", "filter_tags",
    "parse_raw_output", "pool_tags", "read_records", "write_records",
]
