"""Two-step, threshold-gated user verification.

Step 1 identifies the sample's subject with the per-activity identification
forest and gates on the predicted-class probability. Step 2 authenticates
against the claimed subject's own binary model and gates again. A sample is
Verified only when both models are confident and agree with the claim;
Rejected only when the authentication model confidently calls imposter;
everything else falls back to a second authentication factor (OTP or
similar -- delivering it is the caller's job).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .authentication import genuine_probability
from .errors import CalibrationError, ConfigurationError
from .forest import DecisionForest
from .identification import ProbabilityStats
from .ingest import FeatureVector

THRESHOLD_SCHEMA_VERSION = 1
TAU_CEILING = 0.95

MIDPOINT_POLICY = "midpoint"
PERCENTILE_POLICY = "benign-percentile"
PERCENTILE_LEVEL = 5.0
POLICIES = (MIDPOINT_POLICY, PERCENTILE_POLICY)


class Outcome(Enum):
    VERIFIED = "verified"
    FALLBACK_SECOND_FACTOR = "fallback-second-factor"
    REJECTED = "rejected"


@dataclass(frozen=True)
class DecisionTrace:
    claimed_subject: int
    predicted_subject: int
    id_probability: float
    id_threshold: float
    step_reached: int  # 1 or 2
    auth_genuine_probability: float | None = None
    auth_threshold: float | None = None


@dataclass(frozen=True)
class VerificationDecision:
    outcome: Outcome
    trace: DecisionTrace


def calibrate_threshold(
    benign: ProbabilityStats,
    adversarial: ProbabilityStats,
    floor: float,
    policy: str = MIDPOINT_POLICY,
) -> float:
    """Pick the trust threshold separating benign from adversarial scores.

    midpoint: halfway between the benign and adversarial mean top-1
    probabilities. benign-percentile: the 5th percentile of the benign
    *correct* predictions' probabilities (needs per-sample correctness).
    Either way the result is clamped to [floor, 0.95]; the calibration
    premise benign_mean > adversarial_mean must hold or there is nothing
    to separate.
    """
    if benign.n_samples == 0 or adversarial.n_samples == 0:
        raise CalibrationError("calibration needs non-empty benign and adversarial stats")
    if benign.mean <= adversarial.mean:
        raise CalibrationError(
            "defense premise failed: benign mean top-1 probability "
            f"{benign.mean:.4f} does not exceed adversarial {adversarial.mean:.4f}"
        )
    if policy == MIDPOINT_POLICY:
        tau = (benign.mean + adversarial.mean) / 2.0
    elif policy == PERCENTILE_POLICY:
        if benign.correct is None:
            raise CalibrationError("benign-percentile policy needs correctness flags")
        vals = benign.values[benign.correct]
        if vals.size == 0:
            raise CalibrationError("no correctly predicted benign samples to calibrate on")
        tau = float(np.percentile(vals, PERCENTILE_LEVEL))
    else:
        raise CalibrationError(f"unknown threshold policy {policy!r}")
    return float(min(max(tau, floor), TAU_CEILING))


@dataclass
class ThresholdTable:
    """Calibrated per-model trust thresholds."""

    id_thresholds: dict[tuple[str, tuple[str, ...]], float]
    auth_thresholds: dict[tuple[int, str, tuple[str, ...]], float]
    policy: str = MIDPOINT_POLICY

    def id_tau(self, activity: str, mask: tuple[str, ...]) -> float:
        try:
            return self.id_thresholds[(activity, mask)]
        except KeyError:
            raise ConfigurationError(
                f"no identification threshold for activity {activity!r}, mask {mask}"
            ) from None

    def auth_tau(self, subject: int, activity: str, mask: tuple[str, ...]) -> float:
        try:
            return self.auth_thresholds[(subject, activity, mask)]
        except KeyError:
            raise ConfigurationError(
                f"no authentication threshold for subject {subject}, "
                f"activity {activity!r}, mask {mask}"
            ) from None

    def save(self, path: str | Path) -> None:
        doc = {
            "schema_version": THRESHOLD_SCHEMA_VERSION,
            "policy": self.policy,
            "id": [
                {"activity": a, "mask": "+".join(m), "tau": t}
                for (a, m), t in sorted(self.id_thresholds.items())
            ],
            "auth": [
                {"subject": s, "activity": a, "mask": "+".join(m), "tau": t}
                for (s, a, m), t in sorted(self.auth_thresholds.items())
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)

    @classmethod
    def load(cls, path: str | Path) -> "ThresholdTable":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("schema_version") != THRESHOLD_SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported threshold schema version {doc.get('schema_version')!r}"
            )
        return cls(
            id_thresholds={
                (e["activity"], tuple(e["mask"].split("+"))): float(e["tau"])
                for e in doc["id"]
            },
            auth_thresholds={
                (int(e["subject"]), e["activity"], tuple(e["mask"].split("+"))): float(e["tau"])
                for e in doc["auth"]
            },
            policy=doc.get("policy", MIDPOINT_POLICY),
        )


def verify(
    sample: FeatureVector,
    claimed_subject: int,
    id_models: dict[tuple[str, tuple[str, ...]], DecisionForest],
    auth_models: dict[tuple[int, str, tuple[str, ...]], DecisionForest],
    thresholds: ThresholdTable,
) -> VerificationDecision:
    """Run the two-step gate on one sample. Identification always runs
    first; the authentication model is never consulted unless step one
    passed."""
    key = (sample.activity, sample.sensor_mask)
    id_model = id_models.get(key)
    if id_model is None:
        raise ConfigurationError(
            f"no identification model for activity {sample.activity!r}, mask {sample.sensor_mask}"
        )
    id_tau = thresholds.id_tau(sample.activity, sample.sensor_mask)
    # Configuration is validated before any model is consulted; a missing
    # model must surface as an error, never as a decision.
    auth_key = (claimed_subject, sample.activity, sample.sensor_mask)
    auth_model = auth_models.get(auth_key)
    if auth_model is None:
        raise ConfigurationError(
            f"no authentication model for subject {claimed_subject}, "
            f"activity {sample.activity!r}, mask {sample.sensor_mask}"
        )
    auth_tau = thresholds.auth_tau(claimed_subject, sample.activity, sample.sensor_mask)

    proba = id_model.predict_proba_one(sample.values)
    top = int(np.argmax(proba))
    predicted_subject = int(id_model.classes[top])
    id_probability = float(proba[top])

    if id_probability < id_tau or predicted_subject != claimed_subject:
        return VerificationDecision(
            outcome=Outcome.FALLBACK_SECOND_FACTOR,
            trace=DecisionTrace(
                claimed_subject=claimed_subject,
                predicted_subject=predicted_subject,
                id_probability=id_probability,
                id_threshold=id_tau,
                step_reached=1,
            ),
        )

    p_genuine = float(genuine_probability(auth_model, sample.values[None, :])[0])
    trace = DecisionTrace(
        claimed_subject=claimed_subject,
        predicted_subject=predicted_subject,
        id_probability=id_probability,
        id_threshold=id_tau,
        step_reached=2,
        auth_genuine_probability=p_genuine,
        auth_threshold=auth_tau,
    )
    confidence = max(p_genuine, 1.0 - p_genuine)
    if confidence < auth_tau:
        return VerificationDecision(Outcome.FALLBACK_SECOND_FACTOR, trace)
    if p_genuine < 0.5:  # argmax says imposter, confidently
        return VerificationDecision(Outcome.REJECTED, trace)
    return VerificationDecision(Outcome.VERIFIED, trace)


def replay_trace(trace: DecisionTrace) -> Outcome:
    """Recompute the outcome from trace fields alone (soundness check)."""
    if trace.step_reached == 1:
        return Outcome.FALLBACK_SECOND_FACTOR
    if trace.auth_genuine_probability is None or trace.auth_threshold is None:
        raise ValueError("step-2 trace must carry authentication fields")
    if trace.id_probability < trace.id_threshold or trace.predicted_subject != trace.claimed_subject:
        return Outcome.FALLBACK_SECOND_FACTOR
    confidence = max(trace.auth_genuine_probability, 1.0 - trace.auth_genuine_probability)
    if confidence < trace.auth_threshold:
        return Outcome.FALLBACK_SECOND_FACTOR
    if trace.auth_genuine_probability < 0.5:
        return Outcome.REJECTED
    return Outcome.VERIFIED


@dataclass(frozen=True)
class GateStats:
    total_samples: int
    misclassified: int
    misclassified_above_threshold: int

    @property
    def pass_rate(self) -> float:
        if self.total_samples == 0:
            return 0.0
        return self.misclassified_above_threshold / self.total_samples


def gate_stats(
    model: DecisionForest,
    X: np.ndarray,
    y_true: np.ndarray,
    tau: float,
) -> GateStats:
    """Count misclassifications, and those confident enough to pass the gate."""
    X = np.asarray(X, dtype=np.float64)
    proba = model.predict_proba(X)
    top1 = proba.max(axis=1)
    pred = model.classes[np.argmax(proba, axis=1)]
    wrong = pred != np.asarray(y_true)
    return GateStats(
        total_samples=X.shape[0],
        misclassified=int(wrong.sum()),
        misclassified_above_threshold=int((wrong & (top1 >= tau)).sum()),
    )
