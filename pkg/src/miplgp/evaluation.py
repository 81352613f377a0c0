"""Repeated-split evaluation with paired significance testing.

run_experiment draws `runs` seeded bag-level splits, fits every configured
algorithm on each train side, and scores accuracy on the test side. All
algorithms see identical splits, so accuracy differences are paired; the
first-listed algorithm is compared against each other one with a two-tailed
paired t-test at the 0.05 level.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .baselines import PlKnnClassifier
from .data import MiplDataset, Split, random_split
from .errors import DatasetFormatError
from .estimator import MiplGpClassifier

# Two-tailed 5% critical values of Student's t for df = 1..30; larger df fall
# back to the normal quantile.
T_CRITICAL_95 = {
    1: 12.7062, 2: 4.3027, 3: 3.1824, 4: 2.7764, 5: 2.5706,
    6: 2.4469, 7: 2.3646, 8: 2.3060, 9: 2.2622, 10: 2.2281,
    11: 2.2010, 12: 2.1788, 13: 2.1604, 14: 2.1448, 15: 2.1314,
    16: 2.1199, 17: 2.1098, 18: 2.1009, 19: 2.0930, 20: 2.0860,
    21: 2.0796, 22: 2.0739, 23: 2.0687, 24: 2.0639, 25: 2.0595,
    26: 2.0555, 27: 2.0518, 28: 2.0484, 29: 2.0452, 30: 2.0423,
}
T_CRITICAL_FALLBACK = 1.960

ALGORITHM_NAMES = ("miplgp", "miplgp-uniform", "miplgp-naive", "plknn-mean", "plknn-maxmin")


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise ValueError("empty prediction vector")
    return float(np.mean(predicted == truth))


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    critical: float
    significant: bool
    mean_diff: float


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-tailed paired t-test at the 0.05 level on matched score vectors.

    t = mean(d) * sqrt(n) / std(d, ddof=1) for d = a - b. A zero-variance
    difference vector gives t = +/-inf (significant) when the mean is
    nonzero, and t = 0 (not significant) when the scores are identical.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired test needs two equal-length vectors")
    n = a.shape[0]
    if n < 2:
        raise ValueError(f"paired test needs at least 2 runs, got {n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    critical = T_CRITICAL_95.get(df, T_CRITICAL_FALLBACK)
    if sd == 0.0:
        t = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        t = mean * math.sqrt(n) / sd
    return TTestResult(
        t=t, df=df, critical=critical, significant=abs(t) > critical, mean_diff=mean
    )


def split_hash(split: Split) -> str:
    """Stable identifier of a split's exact bag assignment."""
    text = "train:" + ",".join(split.train_bag_ids) + "|test:" + ",".join(split.test_bag_ids)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def make_algorithm(name: str, seed: int, **overrides):
    """Instantiate a registered algorithm, seeded for one run."""
    if name == "miplgp":
        return MiplGpClassifier(variant="full", random_state=seed, **overrides)
    if name == "miplgp-uniform":
        return MiplGpClassifier(variant="uniform", random_state=seed, **overrides)
    if name == "miplgp-naive":
        return MiplGpClassifier(variant="naive", random_state=seed, **overrides)
    if name == "plknn-mean":
        return PlKnnClassifier(embedding="mean", **overrides)
    if name == "plknn-maxmin":
        return PlKnnClassifier(embedding="maxmin", **overrides)
    raise ValueError(f"unknown algorithm {name!r}; known: {ALGORITHM_NAMES}")


@dataclass
class EvalReport:
    """Everything one experiment produced, JSON/CSV round-trippable."""

    config: dict
    rows: list[dict]
    summary: dict[str, dict]
    comparisons: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "rows": self.rows,
            "summary": self.summary,
            "comparisons": self.comparisons,
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        payload = json.loads(text)
        return cls(
            config=payload["config"],
            rows=payload["rows"],
            summary=payload["summary"],
            comparisons=payload.get("comparisons", []),
        )

    def algorithm_names(self) -> list[str]:
        return list(self.config["algorithms"])

    def accuracies(self, name: str) -> np.ndarray:
        return np.array([row["accuracies"][name] for row in self.rows])

    def write_csv(self, path) -> None:
        """Flat per-run table: run, seed, split hash, one accuracy column per algorithm."""
        names = self.algorithm_names()
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run", "seed", "split_hash"] + names)
            for row in self.rows:
                writer.writerow(
                    [row["run"], row["seed"], row["split_hash"]]
                    + [repr(row["accuracies"][n]) for n in names]
                )

    def format_summary(self) -> str:
        lines = []
        for name in self.algorithm_names():
            s = self.summary[name]
            lines.append(f"{name}: {s['mean']:.3f}±{s['std']:.3f}")
        for comp in self.comparisons:
            verdict = "significant" if comp["significant"] else "not significant"
            lines.append(
                f"{comp['baseline']} vs {comp['other']}: "
                f"t={comp['t']:.3f} (df={comp['df']}, crit={comp['critical']}) {verdict}"
            )
        return "\n".join(lines)


def run_experiment(
    dataset: MiplDataset,
    algorithms: Sequence[tuple[str, Callable[[int], object]]],
    runs: int,
    fraction: float,
    base_seed: int,
    progress: Callable[[str], None] | None = None,
) -> EvalReport:
    """Fit and score every algorithm over `runs` seeded splits.

    algorithms maps names to factories; factory(seed) must return an
    estimator with fit(bags, candidate_sets=None, n_classes=...) and
    predict(bags). Run i uses split seed base_seed + i for the split, the
    estimators, and the prediction stream alike.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    names = [name for name, _ in algorithms]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate algorithm names: {names}")
    if not names:
        raise ValueError("no algorithms given")
    dataset.true_labels()  # fail early when ground truth is missing

    rows: list[dict] = []
    for i in range(runs):
        seed = base_seed + i
        split = random_split(dataset, fraction, seed)
        train_bags = dataset.subset(split.train_bag_ids)
        test_bags = dataset.subset(split.test_bag_ids)
        truth = dataset.true_labels(test_bags)
        accs: dict[str, float] = {}
        for name, factory in algorithms:
            est = factory(seed)
            est.fit(train_bags, n_classes=dataset.label_space.num_classes)
            accs[name] = accuracy(est.predict(test_bags), truth)
            if progress is not None:
                progress(f"run {i} {name}: accuracy {accs[name]:.4f}")
        rows.append(
            {"run": i, "seed": seed, "split_hash": split_hash(split), "accuracies": accs}
        )

    summary: dict[str, dict] = {}
    for name in names:
        scores = np.array([row["accuracies"][name] for row in rows])
        if runs > 1:
            std = float(scores.std(ddof=1))
            std_defined = True
        else:
            std = 0.0
            std_defined = False
        summary[name] = {
            "mean": float(scores.mean()),
            "std": std,
            "std_defined": std_defined,
        }

    comparisons: list[dict] = []
    if runs > 1:
        baseline = names[0]
        base_scores = [row["accuracies"][baseline] for row in rows]
        for other in names[1:]:
            other_scores = [row["accuracies"][other] for row in rows]
            res = paired_t_test(base_scores, other_scores)
            comparisons.append(
                {
                    "baseline": baseline,
                    "other": other,
                    "t": res.t,
                    "df": res.df,
                    "critical": res.critical,
                    "significant": res.significant,
                    "mean_diff": res.mean_diff,
                }
            )

    config = {
        "runs": runs,
        "fraction": fraction,
        "base_seed": base_seed,
        "algorithms": names,
        "num_bags": dataset.num_bags,
        "num_classes": dataset.label_space.num_classes,
        "feature_dim": dataset.feature_dim,
    }
    return EvalReport(config=config, rows=rows, summary=summary, comparisons=comparisons)


def load_report(path) -> EvalReport:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return EvalReport.from_json(fh.read())
    except (json.JSONDecodeError, KeyError) as exc:
        raise DatasetFormatError(f"{path}: bad report file: {exc}") from exc
