"""Learned, schema-agnostic meta-features for tabular datasets."""

from .data import TabularDataset, ToyGenSpec, generate_toy, ingest_csv, subsample_fixed
from .encoder import MetaFeatures, SetEncoder, encode_batch, extract
from .engineered import engineered_mf
from .sampling import Batch, LabeledPair, kfold_split, sample_batch, sample_pair
from .similarity import SimilarityModel, TrainConfig, evaluate_pairs, pair_loss, similarity, train

__version__ = "0.1.0"
