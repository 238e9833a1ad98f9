"""Trainable attack detectors and the sliding-window alarm logic.

Three supervised detectors over per-sample signal frames (25 features):
a CART decision tree grown by Gini splits, a bootstrap random forest with
per-split feature subsets, and discrete AdaBoost over shallow CART learners.
Per-frame labels are smoothed by a sliding window; a threshold calibrated on
attack-free runs decides when the window fraction counts as an alarm.

Trees are stored as flat arrays so a whole trace classifies in a handful of
vectorized passes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .errors import CalibrationError, ContractError
from .plant import N_SIGNALS, PlantConfig, SimulationTrace, simulate
from .attacks import AttackDirective, AttackKind, AttackSchedule

NORMAL, ATTACK = 0, 1
DEFAULT_WINDOW = 100
FORMAT_VERSION = 1


# --- datasets -------------------------------------------------------------------

@dataclass
class LabeledDataset:
    """Per-frame feature rows with attack labels and run-level provenance."""

    X: np.ndarray                  # (n, 25)
    y: np.ndarray                  # (n,) 0 normal / 1 attack
    run_ids: np.ndarray            # (n,) which simulation each row came from
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[1] != N_SIGNALS:
            raise ContractError(f"features must be (n, {N_SIGNALS})")
        if len(self.y) != len(self.X) or len(self.run_ids) != len(self.X):
            raise ContractError("X, y, run_ids must align")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def class_counts(self) -> tuple[int, int]:
        return int((self.y == NORMAL).sum()), int((self.y == ATTACK).sum())

    def split_by_runs(self, test_frac: float = 0.3, seed: int = 0):
        """Run-level train/test split: whole simulations stay on one side.

        Attack-bearing and all-normal runs are split proportionally so both
        sides keep both classes.
        """
        rng = np.random.default_rng(seed)
        train_ids, test_ids = [], []
        runs = np.unique(self.run_ids)
        has_attack = np.array([
            bool(self.y[self.run_ids == r].any()) for r in runs])
        for group in (runs[has_attack], runs[~has_attack]):
            if len(group) == 0:
                continue
            perm = rng.permutation(group)
            n_test = max(1, int(round(test_frac * len(group)))) if len(group) > 1 else 0
            test_ids.extend(perm[:n_test])
            train_ids.extend(perm[n_test:])
        train_mask = np.isin(self.run_ids, train_ids)
        test_mask = np.isin(self.run_ids, test_ids)
        return (LabeledDataset(self.X[train_mask], self.y[train_mask],
                               self.run_ids[train_mask], dict(self.provenance)),
                LabeledDataset(self.X[test_mask], self.y[test_mask],
                               self.run_ids[test_mask], dict(self.provenance)))


def generate_training_data(config: PlantConfig, signal_ranges: np.ndarray,
                           channels=range(16), kinds=(AttackKind.INTEGRITY_MIN,
                                                      AttackKind.INTEGRITY_MAX),
                           duration_range: tuple[float, float] = (1.0 / 3.0, 3.0),
                           runs_per_cell: int = 4, n_normal_runs: int = 8,
                           stride: int = 1, seed: int = 1000) -> LabeledDataset:
    """Integrity attacks per sensor channel plus attack-free runs.

    runs_per_cell runs per (channel, kind), each with its own seed, start,
    and duration drawn from duration_range; frames inside the attack window
    are labeled attack. Attack runs end at the window's end so no ambiguous
    recovery-transient frames enter the dataset. Runs that trip a shutdown
    constraint are skipped (counted in provenance). stride keeps every
    stride-th frame.
    """
    from dataclasses import replace as _replace
    rng = np.random.default_rng(seed)
    rows_x, rows_y, rows_run = [], [], []
    run_id = 0
    skipped = 0
    attack_runs = 0
    for ch in channels:
        for kind in kinds:
            for _ in range(runs_per_cell):
                dur = float(rng.uniform(*duration_range))
                latest = config.horizon_hours - dur - 1.0
                t0 = float(rng.uniform(1.0, max(latest, 1.0 + 1e-6)))
                sched = AttackSchedule(
                    (AttackDirective(int(ch), kind, (t0, t0 + dur)),), signal_ranges)
                run_cfg = _replace(config, horizon_hours=t0 + dur,
                                   seed=seed + run_id)
                trace = simulate(sched, run_cfg)
                if trace.shutdown_time is not None:
                    skipped += 1
                    run_id += 1
                    continue
                feats = trace.features()[::stride]
                t = trace.t[::stride]
                labels = ((t >= t0) & (t < t0 + dur)).astype(np.int8)
                rows_x.append(feats)
                rows_y.append(labels)
                rows_run.append(np.full(len(feats), run_id, dtype=np.int32))
                attack_runs += 1
                run_id += 1
    for _ in range(n_normal_runs):
        trace = simulate(None, config.with_seed(seed + run_id))
        feats = trace.features()[::stride]
        rows_x.append(feats)
        rows_y.append(np.zeros(len(feats), dtype=np.int8))
        rows_run.append(np.full(len(feats), run_id, dtype=np.int32))
        run_id += 1
    X = np.vstack(rows_x) if rows_x else np.empty((0, N_SIGNALS))
    y = np.concatenate(rows_y) if rows_y else np.empty(0, dtype=np.int8)
    runs = np.concatenate(rows_run) if rows_run else np.empty(0, dtype=np.int32)
    return LabeledDataset(X, y, runs, provenance={
        "attack_runs": attack_runs, "normal_runs": n_normal_runs,
        "skipped_shutdown_runs": skipped, "stride": stride, "seed": seed,
        "horizon_hours": config.horizon_hours})


# --- CART -----------------------------------------------------------------------

@njit(cache=True)
def _tree_predict_kernel(feature, threshold, left, right, label, X, out):
    for i in range(X.shape[0]):
        node = 0
        f = feature[node]
        while f >= 0:
            if X[i, f] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        out[i] = label[node]


@dataclass
class _Tree:
    """Flat-array binary tree; leaves carry feature index -1."""

    feature: np.ndarray     # int32, -1 at leaves
    threshold: np.ndarray   # float64
    left: np.ndarray        # int32
    right: np.ndarray       # int32
    label: np.ndarray       # int8, majority class at the node
    depth: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X), dtype=np.int8)
        _tree_predict_kernel(self.feature, self.threshold, self.left,
                             self.right, self.label,
                             np.ascontiguousarray(X, dtype=np.float64), out)
        return out

    def to_lists(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "label": self.label.tolist(), "depth": self.depth}

    @classmethod
    def from_lists(cls, rec: dict) -> "_Tree":
        return cls(np.asarray(rec["feature"], dtype=np.int32),
                   np.asarray(rec["threshold"], dtype=float),
                   np.asarray(rec["left"], dtype=np.int32),
                   np.asarray(rec["right"], dtype=np.int32),
                   np.asarray(rec["label"], dtype=np.int8),
                   int(rec["depth"]))


def _best_split(X, y, w, feature_ids):
    """Weighted-Gini best (feature, threshold) or None; ties keep the first."""
    best = None
    total_w = w.sum()
    total_w1 = w[y == ATTACK].sum()
    parent_gini = 1.0 - ((total_w1 / total_w) ** 2 + ((total_w - total_w1) / total_w) ** 2)
    if parent_gini == 0.0:
        return None
    for f in feature_ids:
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        cs = col[order]
        valid = cs[:-1] < cs[1:]
        if not valid.any():
            continue
        wo = w[order]
        w1o = wo * (y[order] == ATTACK)
        cw = np.cumsum(wo)[:-1]
        cw1 = np.cumsum(w1o)[:-1]
        wl = cw[valid]
        w1l = cw1[valid]
        wr = total_w - wl
        w1r = total_w1 - w1l
        gini_l = 1.0 - (w1l ** 2 + (wl - w1l) ** 2) / wl ** 2
        gini_r = 1.0 - (w1r ** 2 + (wr - w1r) ** 2) / wr ** 2
        score = (wl * gini_l + wr * gini_r) / total_w
        i = int(np.argmin(score))
        if best is None or score[i] < best[0] - 1e-15:
            pos = np.flatnonzero(valid)[i]
            thr = 0.5 * (cs[pos] + cs[pos + 1])
            best = (float(score[i]), int(f), thr)
    if best is None or best[0] >= parent_gini - 1e-15:
        return None
    return best[1], best[2]


def _grow_tree(X, y, w, max_depth: int, rng: np.random.Generator | None,
               n_feature_subset: int | None) -> _Tree:
    feature, threshold, left, right, label = [], [], [], [], []
    deepest = 0

    def majority(idx):
        w1 = w[idx][y[idx] == ATTACK].sum()
        w0 = w[idx].sum() - w1
        return ATTACK if w1 > w0 else NORMAL

    def build(idx, depth):
        nonlocal deepest
        deepest = max(deepest, depth)
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(node)
        right.append(node)
        label.append(majority(idx))
        if depth >= max_depth or len(idx) < 2 or (y[idx] == y[idx][0]).all():
            return node
        if n_feature_subset is not None:
            cand = rng.choice(X.shape[1], size=n_feature_subset, replace=False)
            cand.sort()
        else:
            cand = np.arange(X.shape[1])
        split = _best_split(X[idx], y[idx], w[idx], cand)
        if split is None:
            return node
        f, thr = split
        go_left = X[idx, f] <= thr
        if not go_left.any() or go_left.all():
            return node
        feature[node] = f
        threshold[node] = thr
        left[node] = build(idx[go_left], depth + 1)
        right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.arange(len(X)), 0)
    return _Tree(np.asarray(feature, dtype=np.int32),
                 np.asarray(threshold, dtype=float),
                 np.asarray(left, dtype=np.int32),
                 np.asarray(right, dtype=np.int32),
                 np.asarray(label, dtype=np.int8),
                 max(deepest + 1, 1))


# --- detector models --------------------------------------------------------------

@dataclass(frozen=True)
class DetectorScore:
    f1: float
    fpr: float
    degenerate: bool = False


@dataclass(frozen=True)
class DetectorModel:
    """Immutable fitted detector; classify is a pure function of the frame."""

    kind: str                       # cart / random_forest / adaboost
    params: dict
    trees: tuple
    alphas: tuple = ()
    report: DetectorScore | None = None

    def with_report(self, report: DetectorScore) -> "DetectorModel":
        return replace(self, report=report)

    def to_json(self) -> str:
        return json.dumps({
            "format_version": FORMAT_VERSION, "kind": self.kind,
            "params": self.params, "alphas": list(self.alphas),
            "trees": [t.to_lists() for t in self.trees],
            "report": None if self.report is None else vars(self.report)})

    @classmethod
    def from_json(cls, text: str) -> "DetectorModel":
        rec = json.loads(text)
        if rec.get("format_version") != FORMAT_VERSION:
            raise ContractError("unsupported detector format version")
        report = rec.get("report")
        return cls(kind=rec["kind"], params=rec["params"],
                   trees=tuple(_Tree.from_lists(t) for t in rec["trees"]),
                   alphas=tuple(rec["alphas"]),
                   report=None if report is None else DetectorScore(**report))


def _check_training_data(data: LabeledDataset):
    n0, n1 = data.class_counts
    if n0 == 0 or n1 == 0:
        raise ContractError("training data must contain both classes")


def train_cart(data: LabeledDataset, max_depth: int = 50) -> DetectorModel:
    """Gini-grown binary decision tree with majority-class leaves."""
    _check_training_data(data)
    w = np.full(len(data), 1.0 / len(data))
    tree = _grow_tree(data.X, data.y, w, max_depth, None, None)
    return DetectorModel("cart", {"max_depth": max_depth}, (tree,))


def train_random_forest(data: LabeledDataset, n_trees: int = 25,
                        max_depth: int = 50, seed: int = 0,
                        bootstrap: bool = True) -> DetectorModel:
    """Bootstrap ensemble of CARTs with sqrt-width random feature subsets."""
    _check_training_data(data)
    rng = np.random.default_rng(seed)
    n_sub = max(1, int(round(np.sqrt(data.X.shape[1]))))
    trees = []
    for _ in range(n_trees):
        if bootstrap:
            idx = rng.integers(0, len(data), size=len(data))
        else:
            idx = np.arange(len(data))
        Xb, yb = data.X[idx], data.y[idx]
        w = np.full(len(idx), 1.0 / len(idx))
        trees.append(_grow_tree(Xb, yb, w, max_depth, rng, n_sub))
    return DetectorModel("random_forest",
                         {"n_trees": n_trees, "max_depth": max_depth,
                          "seed": seed, "bootstrap": bootstrap},
                         tuple(trees))


def train_adaboost(data: LabeledDataset, n_estimators: int = 100,
                   learner_depth: int = 3) -> DetectorModel:
    """Discrete AdaBoost over shallow CART learners.

    Halts early when a learner's weighted error reaches 0 (the learner is
    kept with a capped weight) or 0.5 or worse (the learner is dropped).
    Sample weights are renormalized to a probability distribution each round.
    """
    _check_training_data(data)
    X, y = data.X, data.y
    w = np.full(len(X), 1.0 / len(X))
    trees, alphas = [], []
    for _ in range(n_estimators):
        tree = _grow_tree(X, y, w, learner_depth, None, None)
        pred = tree.predict(X)
        miss = pred != y
        err = float(w[miss].sum())
        if err <= 0.0:
            trees.append(tree)
            alphas.append(0.5 * np.log((1.0 - 1e-10) / 1e-10))
            break
        if err >= 0.5:
            break
        alpha = 0.5 * np.log((1.0 - err) / err)
        trees.append(tree)
        alphas.append(alpha)
        w = w * np.exp(np.where(miss, alpha, -alpha))
        w /= w.sum()
    if not trees:
        # Degenerate data where no shallow learner beats chance: majority vote.
        tree = _grow_tree(X, y, np.full(len(X), 1.0 / len(X)), 0, None, None)
        trees, alphas = [tree], [1.0]
    return DetectorModel("adaboost",
                         {"n_estimators": n_estimators, "learner_depth": learner_depth},
                         tuple(trees), tuple(float(a) for a in alphas))


def classify_frames(model: DetectorModel, X: np.ndarray) -> np.ndarray:
    """Vectorized per-frame labels for a (n, 25) feature matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != N_SIGNALS:
        raise ContractError(f"expected (n, {N_SIGNALS}) features")
    if model.kind == "cart":
        return model.trees[0].predict(X).astype(np.int8)
    if model.kind == "random_forest":
        votes = np.zeros(len(X), dtype=np.int32)
        for tree in model.trees:
            votes += tree.predict(X)
        return (votes * 2 > len(model.trees)).astype(np.int8)
    score = np.zeros(len(X))
    for tree, alpha in zip(model.trees, model.alphas):
        score += alpha * (2.0 * tree.predict(X) - 1.0)
    return (score > 0).astype(np.int8)


def classify(model: DetectorModel, frame: np.ndarray) -> int:
    """Deterministic label for one 25-wide frame."""
    frame = np.asarray(frame, dtype=float)
    if frame.shape != (N_SIGNALS,):
        raise ContractError(f"expected a {N_SIGNALS}-wide frame")
    return int(classify_frames(model, frame[None, :])[0])


def evaluate_detector(model: DetectorModel, test: LabeledDataset) -> DetectorScore:
    """F1 and false-positive rate with attack as the positive class."""
    if len(test) == 0:
        raise ContractError("test set is empty")
    pred = classify_frames(model, test.X)
    truth = test.y
    tp = int(((pred == ATTACK) & (truth == ATTACK)).sum())
    fp = int(((pred == ATTACK) & (truth == NORMAL)).sum())
    fn = int(((pred == NORMAL) & (truth == ATTACK)).sum())
    tn = int(((pred == NORMAL) & (truth == NORMAL)).sum())
    if tp == 0 and fp == 0 and fn == 0:
        return DetectorScore(0.0, 0.0 if tn else 0.0, degenerate=True)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2 * precision * recall / (precision + recall)) if precision + recall else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return DetectorScore(float(f1), float(fpr))


# --- sliding-window alarm logic ----------------------------------------------------

@dataclass(frozen=True)
class AlarmPolicy:
    """Calibrated alarm rule: alarm when a window fraction strictly exceeds
    the threshold."""

    window: int
    threshold: float
    percentile: float
    n_calibration_runs: int

    def alarms(self, detection_prob: float) -> bool:
        return detection_prob > self.threshold

    def to_json(self, detector: str = "") -> str:
        return json.dumps({"detector": detector, "window": self.window,
                           "percentile": self.percentile, "threshold": self.threshold,
                           "runs": self.n_calibration_runs}, sort_keys=True)


def window_fractions(labels: np.ndarray, window: int = DEFAULT_WINDOW) -> np.ndarray:
    """Fraction of attack labels in every window position (stride 1).

    A trace shorter than the window is treated as a single window.
    """
    labels = np.asarray(labels, dtype=float)
    if len(labels) == 0:
        raise ContractError("empty label stream")
    if len(labels) < window:
        return np.array([labels.mean()])
    c = np.concatenate([[0.0], np.cumsum(labels)])
    return (c[window:] - c[:-window]) / window


def calibrate_threshold(normal_traces, model: DetectorModel,
                        percentile: float = 99.0,
                        window: int = DEFAULT_WINDOW) -> AlarmPolicy:
    """Threshold = percentile of per-run maximum window fractions.

    Needs at least 10 attack-free runs; fewer makes the percentile unstable.
    """
    traces = list(normal_traces)
    if len(traces) < 10:
        raise CalibrationError("calibration needs at least 10 attack-free runs")
    maxima = []
    for trace in traces:
        labels = classify_frames(model, trace.features())
        maxima.append(float(window_fractions(labels, window).max()))
    threshold = float(np.percentile(maxima, percentile))
    return AlarmPolicy(window, threshold, percentile, len(traces))


def detection_probability(trace: SimulationTrace, model: DetectorModel,
                          policy: AlarmPolicy) -> float:
    """Maximum window fraction of attack-classified frames over the trace.

    This is the quantity an evading attacker keeps below policy.threshold.
    """
    if trace.n_frames == 0:
        raise ContractError("empty trace")
    labels = classify_frames(model, trace.features())
    return float(window_fractions(labels, policy.window).max())
