"""Synthetic quad-modal sequence generation and the on-disk dataset format."""

from quadscan.synthdata.corpus import (
    NAMED_SPECS,
    CorpusSpec,
    default_corpus_spec,
    make_corpus,
    mini_corpus_spec,
    parse_corpus_spec,
    read_manifest,
    split_counts,
)
from quadscan.synthdata.generator import (
    EVENT_THRESHOLD,
    PALETTE,
    SCENARIO_TAGS,
    SCENARIOS,
    ScenarioConfig,
    generate,
)
from quadscan.synthdata.pnm import read_pgm, read_ppm, write_pgm, write_ppm
from quadscan.synthdata.sequence import (
    SyntheticSequence,
    event_bytes,
    event_polarity,
    events_from_rgb,
    read_sequence,
    write_sequence,
)

__all__ = [
    "CorpusSpec",
    "EVENT_THRESHOLD",
    "NAMED_SPECS",
    "PALETTE",
    "SCENARIOS",
    "SCENARIO_TAGS",
    "ScenarioConfig",
    "SyntheticSequence",
    "default_corpus_spec",
    "event_bytes",
    "event_polarity",
    "events_from_rgb",
    "generate",
    "make_corpus",
    "mini_corpus_spec",
    "parse_corpus_spec",
    "read_manifest",
    "read_pgm",
    "read_ppm",
    "read_sequence",
    "split_counts",
    "write_pgm",
    "write_ppm",
    "write_sequence",
]
