"""Batch correction of OCR word errors.

Groups erroneous word predictions by image-embedding and edit-distance
similarity, corrects whole groups in one action (automatically or through a
human editor), and accounts for the human effort in seconds.
"""

__version__ = "0.1.0"

from batchcorrect.corpus import Corpus, EmbeddingMatrix, WordInstance
from batchcorrect.costing import CostModel, CostReport
from batchcorrect.distance import edit_distance, normalized_distance
from batchcorrect.lexicon import Dictionary, Suggestion

__all__ = [
    "Corpus",
    "CostModel",
    "CostReport",
    "Dictionary",
    "EmbeddingMatrix",
    "Suggestion",
    "WordInstance",
    "edit_distance",
    "normalized_distance",
    "__version__",
]
