"""Motion-biometric user verification toolkit.

Feature extraction from wearable sensor streams, per-activity
identification and per-user authentication forests, a black-box
zeroth-order adversarial attack against them, and the probability-threshold
gate that decides when the biometric factor may be trusted versus when the
caller must fall back to a second authentication factor.
"""

from .activities import ACTIVITIES, ALL_ACTIVITY_CODES, DISCUSSION_ACTIVITIES, SOURCES
from .attack import AttackConfig, AttackResult, Normalizer, attack_dataset, attack_loss, zoo_attack
from .authentication import AuthSplit, EerReport, RocCurve, build_auth_split, roc_and_eer
from .errors import MotioncredError
from .folds import FoldAssignment, stratified_folds
from .forest import DecisionForest, ForestParams, train_forest
from .gate import (
    Outcome,
    ThresholdTable,
    VerificationDecision,
    calibrate_threshold,
    gate_stats,
    verify,
)
from .identification import AccuracyTable, ProbabilityStats, probability_stats
from .ingest import FeatureTable, FeatureVector, SensorReading, extract_features, fuse, parse_raw, window
from .synth import SynthConfig, synth_generate

__version__ = "0.1.0"
