"""Weakly-supervised extraction of procedural knowledge from interview transcripts.

Protocol outlines are parsed into phrase graphs, their phrases are matched
back to transcript spans, and the matches become training data for a CRF
span labeler and a span-pair relation classifier. The pipeline assembles the
predictions into a flowchart-like knowledge graph.
"""

from .corpus import TextSpan, Transcript, load_transcript, read_transcript
from .crf import CrfModel, crf_train, viterbi
from .datasets import build_pair_dataset, build_seq_dataset, sample_labels
from .embeddings import EmbeddingTable, load_embeddings, read_embeddings
from .matcher import MatcherConfig, match_phrase, match_protocol
from .pipeline import KnowledgeGraph, assemble, export_graph, run_extract, run_relate
from .protocol import ProtocolGraph, RelationLabel, parse_protocol, read_protocol
from .relation import ReConfig, ReModel, re_train

__version__ = "0.1.0"

__all__ = [
    "CrfModel",
    "EmbeddingTable",
    "KnowledgeGraph",
    "MatcherConfig",
    "ProtocolGraph",
    "ReConfig",
    "ReModel",
    "RelationLabel",
    "TextSpan",
    "Transcript",
    "assemble",
    "build_pair_dataset",
    "build_seq_dataset",
    "crf_train",
    "export_graph",
    "load_embeddings",
    "load_transcript",
    "match_phrase",
    "match_protocol",
    "parse_protocol",
    "read_embeddings",
    "read_protocol",
    "read_transcript",
    "re_train",
    "run_extract",
    "run_relate",
    "sample_labels",
    "viterbi",
]
