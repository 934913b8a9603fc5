"""Classical per-review screening baseline: preprocessing, TF-IDF,
logistic regression and k-fold cross-validation."""

from .crossval import CrossvalResult, FoldAssignment, FoldOutcome, crossval_review, make_folds
from .logreg import (
    LogisticRegression,
    load_model,
    loss_and_gradient,
    save_model,
    train_logreg,
)
from .preprocess import (
    PreprocessConfig,
    TextPreprocessor,
    default_stopwords,
    load_stopwords,
    preprocess_text,
    stem,
)
from .tfidf import SparseVector, TfidfVectorizer, vectors_to_matrix

__all__ = [
    "CrossvalResult",
    "FoldAssignment",
    "FoldOutcome",
    "LogisticRegression",
    "PreprocessConfig",
    "SparseVector",
    "TextPreprocessor",
    "TfidfVectorizer",
    "crossval_review",
    "default_stopwords",
    "load_model",
    "load_stopwords",
    "loss_and_gradient",
    "make_folds",
    "preprocess_text",
    "save_model",
    "stem",
    "train_logreg",
    "vectors_to_matrix",
]
