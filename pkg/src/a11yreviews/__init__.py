"""Detect accessibility issues in low-code app reviews.

Pipeline: normalize -> two sentence embeddings concatenated -> five-layer MLP
-> keyword fallback when the MLP is not confident.
"""

from .classifier import MlpModel, ModelPrediction, TrainConfig, init_model, load_model, predict, save_model, train
from .corpus import LabeledDataset, Review, class_balance, load_reviews, save_reviews, stratified_split
from .embedding import ConcatEmbedder, HashProvider, concat_embed, embed_batch, hash_embed, hash_embedder
from .evaluation import Variant, confusion, evaluate_variant, metrics
from .hybrid import DecisionPath, HybridConfig, HybridPrediction, Pipeline, classify_review, decide
from .keywords import KeywordSets, default_keyword_sets, extract_candidates, match_keywords
from .preprocess import PreprocessConfig, normalize, preprocess_dataset

__version__ = "0.1.0"
