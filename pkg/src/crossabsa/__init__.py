"""Cross-domain aspect-based sentiment analysis with a bidirectional seq2seq tagger."""

from .core import (
    Corpus,
    Example,
    Polarity,
    SchemaViolationError,
    SentimentTuple,
    SpanAlignmentError,
    Split,
    Task,
    TransferPair,
    tuple_conforms,
)
from .tagging import FormatError, TaggedSequence, parse, serialize, tagger_vocabulary, validate
from .model import (
    Seq2SeqModel,
    ToyBackbone,
    ToyBackboneConfig,
    TrainConfig,
    Vocabulary,
    create_backbone,
)
from .decoding import ConstraintSet, constrained_generate, free_generate
from .evaluation import EvalResult, GroupAccuracy, micro_f1, sentence_group_accuracy
from .data import (
    DomainProfile,
    demo_profiles,
    enumerate_pairs,
    load_corpus,
    project_corpus,
    save_corpus,
    synth_corpus,
)
from .pipeline import Mode, PipelineConfig, PipelineError, RunReport, run_pipeline
from .matrix import DataLayout, MatrixResult, run_generation_sweep, run_transfer_matrix

__version__ = "0.1.0"
