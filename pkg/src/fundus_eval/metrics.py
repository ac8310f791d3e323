"""Statistical kernel: ROC curves, AUC, macro averaging, confusion matrices,
quadratic-weighted kappa, exact binomial intervals and a patient-level
cluster bootstrap.

Everything here is pure and reentrant. ROC construction merges tied scores
into a single step so the trapezoid area equals the Mann-Whitney statistic
P(s+ > s-) + 0.5 P(s+ = s-) exactly; several tests rely on that identity.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateClasses,
    DegenerateMarginals,
    DegenerateReplicates,
    EmptyClass,
    EmptyMatrix,
    FatalFormat,
    InvariantError,
    RangeError,
)

# ---------------------------------------------------------------------------
# Normal distribution helpers (shared with the synthetic-data generators)
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


# Acklam's rational approximation coefficients for the normal quantile.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def norm_ppf(p: float) -> float:
    """Standard normal quantile via rational approximation plus one Newton step.

    Accurate to well below 1e-9 in cdf terms over (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise RangeError(f"norm_ppf requires p in (0, 1), got {p}")
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        x = ((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q
               + _PPF_C[4]) * q + _PPF_C[5])
             / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1))
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = ((((((_PPF_A[0] * r + _PPF_A[1]) * r + _PPF_A[2]) * r + _PPF_A[3]) * r
               + _PPF_A[4]) * r + _PPF_A[5]) * q
             / (((((_PPF_B[0] * r + _PPF_B[1]) * r + _PPF_B[2]) * r + _PPF_B[3]) * r
                 + _PPF_B[4]) * r + 1))
    else:
        q = math.sqrt(-2 * math.log1p(-p))
        x = -((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q
                + _PPF_C[4]) * q + _PPF_C[5])
              / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1))
    # one Newton refinement on the cdf
    err = norm_cdf(x) - p
    x -= err / _norm_pdf(x)
    return x


# ---------------------------------------------------------------------------
# Regularized incomplete beta and its inverse (for Clopper-Pearson)
# ---------------------------------------------------------------------------

_BETA_CF_MAX_ITER = 400
_BETA_CF_EPS = 1e-15
_BETA_PPF_TOL = 1e-10


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_CF_EPS:
            break
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _beta_ppf(q: float, a: float, b: float) -> float:
    """Beta distribution quantile by bisection on I_x(a, b)."""
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > _BETA_PPF_TOL:
        mid = 0.5 * (lo + hi)
        if _betainc(a, b, mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Intervals
# ---------------------------------------------------------------------------

CI_CLOPPER_PEARSON = "clopper_pearson"
CI_CLUSTER_BOOTSTRAP = "cluster_bootstrap"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    level: float = 0.95
    method: str = CI_CLOPPER_PEARSON

    def __post_init__(self):
        if not 0.0 <= self.lo <= self.hi <= 1.0:
            raise InvariantError(f"interval bounds out of order: ({self.lo}, {self.hi})")

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def clopper_pearson(k: float, n: int, level: float = 0.95) -> Interval:
    """Exact binomial confidence interval via beta quantiles.

    k may be fractional (used when a rate like AUC is treated as a
    proportion of n items); the beta characterization extends naturally.
    """
    if n < 1:
        raise RangeError(f"n must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise RangeError(f"k must lie in [0, {n}], got {k}")
    if not 0.0 < level < 1.0:
        raise RangeError(f"level must lie in (0, 1), got {level}")
    alpha = 1.0 - level
    lo = 0.0 if k <= 0 else _beta_ppf(alpha / 2.0, k, n - k + 1.0)
    hi = 1.0 if k >= n else _beta_ppf(1.0 - alpha / 2.0, k + 1.0, n - k)
    return Interval(lo, hi, level, CI_CLOPPER_PEARSON)


# ---------------------------------------------------------------------------
# ROC curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RocCurve:
    """Operating points of a binary scorer, one step per distinct score.

    fpr and tpr are nondecreasing with endpoints (0,0) and (1,1).
    thresholds are strictly decreasing, starting at +inf for the
    predict-nothing point; they are None for derived (averaged) curves.
    """

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray | None
    n_pos: int
    n_neg: int

    def __post_init__(self):
        fpr = np.asarray(self.fpr, dtype=float)
        tpr = np.asarray(self.tpr, dtype=float)
        object.__setattr__(self, "fpr", fpr)
        object.__setattr__(self, "tpr", tpr)
        if fpr.shape != tpr.shape or fpr.ndim != 1 or fpr.size < 2:
            raise InvariantError("fpr/tpr must be equal-length 1-d arrays with >= 2 points")
        if np.any(np.diff(fpr) < 0) or np.any(np.diff(tpr) < 0):
            raise InvariantError("fpr and tpr must be nondecreasing")
        if self.thresholds is not None:
            thr = np.asarray(self.thresholds, dtype=float)
            object.__setattr__(self, "thresholds", thr)
            if thr.shape != fpr.shape:
                raise InvariantError("thresholds must align with fpr/tpr")
            if np.any(np.diff(thr) >= 0):
                raise InvariantError("thresholds must be strictly decreasing")
            if fpr[0] != 0.0 or tpr[0] != 0.0 or fpr[-1] != 1.0 or tpr[-1] != 1.0:
                raise InvariantError("curve must run from (0,0) to (1,1)")

    def __len__(self):
        return self.fpr.size


def roc_curve(labels: Sequence[int], scores: Sequence[float]) -> RocCurve:
    """Build a tie-merged ROC curve (predict positive when score >= threshold)."""
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape or y.ndim != 1:
        raise InvariantError("labels and scores must be equal-length 1-d sequences")
    if not np.isin(y, (0, 1)).all():
        raise RangeError("labels must be binary (0/1)")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClasses(
            f"need at least one positive and one negative (got {n_pos} pos, {n_neg} neg)")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # index of the last item in every tie block
    block_end = np.nonzero(np.diff(s_sorted))[0]
    block_end = np.r_[block_end, s_sorted.size - 1]
    tps = np.cumsum(y_sorted)[block_end]
    fps = (block_end + 1) - tps

    fpr = np.concatenate(([0.0], fps / n_neg))
    tpr = np.concatenate(([0.0], tps / n_pos))
    thresholds = np.concatenate(([np.inf], s_sorted[block_end]))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, n_pos=n_pos, n_neg=n_neg)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def _rank_auc(y: np.ndarray, s: np.ndarray, n_pos: int, n_neg: int) -> float:
    """Mann-Whitney AUC from tie-averaged ranks (fast path for resampling)."""
    order = np.argsort(s, kind="stable")
    s_sorted = s[order]
    new_block = np.r_[True, s_sorted[1:] != s_sorted[:-1]]
    block_id = np.cumsum(new_block) - 1
    block_sizes = np.bincount(block_id)
    block_ends = np.cumsum(block_sizes)
    block_avg_rank = block_ends - (block_sizes - 1) / 2.0
    ranks = np.empty(s.size, dtype=float)
    ranks[order] = block_avg_rank[block_id]
    pos_rank_sum = ranks[y == 1].sum()
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _curve_sides_on_grid(
    fpr: np.ndarray, tpr: np.ndarray, grid: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper values of a ROC polyline evaluated at each grid point.

    At a breakpoint of this curve the two values bracket its vertical
    segment; strictly between breakpoints both equal the linear
    interpolation between the surrounding corner points, i.e. the drawn
    polyline.
    """
    xs, inverse = np.unique(fpr, return_inverse=True)
    first = np.full(xs.size, np.inf)
    last = np.full(xs.size, -np.inf)
    np.minimum.at(first, inverse, tpr)
    np.maximum.at(last, inverse, tpr)

    j = np.searchsorted(xs, grid)
    j_clip = np.minimum(j, xs.size - 1)
    exact = xs[j_clip] == grid
    lower = np.empty(grid.size)
    upper = np.empty(grid.size)
    lower[exact] = first[j_clip[exact]]
    upper[exact] = last[j_clip[exact]]
    between = ~exact
    if between.any():
        x0 = xs[j[between] - 1]
        x1 = xs[j[between]]
        y0 = last[j[between] - 1]
        y1 = first[j[between]]
        v = y0 + (grid[between] - x0) * (y1 - y0) / (x1 - x0)
        lower[between] = v
        upper[between] = v
    return lower, upper


def _area_from_sides(lower: np.ndarray, upper: np.ndarray, grid: np.ndarray) -> float:
    widths = grid[1:] - grid[:-1]
    return float(np.sum(widths * (upper[:-1] + lower[1:]) * 0.5))


def macro_roc(
    per_class: Sequence[tuple[Sequence[int], Sequence[float]]]
) -> tuple[RocCurve, float]:
    """Vertically average one-vs-all ROC curves and integrate the average.

    Per-class TPR is resampled onto the union of all FPR breakpoints with
    separate lower/upper values at each curve's own breakpoints, so vertical
    segments average exactly and each curve's own area is preserved.
    Returns the averaged curve (no thresholds) and its area.
    """
    if len(per_class) < 2:
        raise RangeError("macro averaging needs at least two classes")
    curves = []
    for index, (labels, scores) in enumerate(per_class):
        try:
            curves.append(roc_curve(labels, scores))
        except DegenerateClasses as exc:
            raise DegenerateClasses(f"class {index}: {exc}") from None

    grid = np.unique(np.concatenate([c.fpr for c in curves]))
    lowers = []
    uppers = []
    for c in curves:
        lo, up = _curve_sides_on_grid(c.fpr, c.tpr, grid)
        lowers.append(lo)
        uppers.append(up)
    mean_lower = np.mean(lowers, axis=0)
    mean_upper = np.mean(uppers, axis=0)
    area = _area_from_sides(mean_lower, mean_upper, grid)

    # interleave (x, lower) (x, upper), dropping zero-height duplicates
    has_jump = mean_upper > mean_lower
    xs = np.repeat(grid, 1 + has_jump)
    ys = np.empty(xs.size)
    pos = 0
    for i in range(grid.size):
        ys[pos] = mean_lower[i]
        pos += 1
        if has_jump[i]:
            ys[pos] = mean_upper[i]
            pos += 1
    curve = RocCurve(fpr=xs, tpr=ys, thresholds=None,
                     n_pos=sum(c.n_pos for c in curves),
                     n_neg=sum(c.n_neg for c in curves))
    return curve, area


# ---------------------------------------------------------------------------
# Confusion matrices and agreement metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K integer counts; rows are ground truth, columns predictions."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise InvariantError("confusion matrix must be square")
        if counts.shape[0] < 1:
            raise InvariantError("confusion matrix must have at least one class")
        if (counts < 0).any():
            raise InvariantError("confusion matrix entries must be nonnegative")

    @property
    def k(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(labels: Sequence[int], predictions: Sequence[int], k: int) -> ConfusionMatrix:
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape or y.ndim != 1:
        raise InvariantError("labels and predictions must be equal-length 1-d sequences")
    if y.size and (y.min() < 0 or y.max() >= k or p.min() < 0 or p.max() >= k):
        raise RangeError(f"labels/predictions must lie in [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y, p), 1)
    return ConfusionMatrix(counts)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("cannot compute accuracy of an empty matrix")
    return float(np.trace(cm.counts) / cm.total)


def binary_rates(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """(sensitivity, specificity, accuracy) of a 2x2 matrix; class 1 is positive."""
    if cm.k != 2:
        raise RangeError(f"binary rates need a 2x2 matrix, got {cm.k}x{cm.k}")
    c = cm.counts
    tn, fp = int(c[0, 0]), int(c[0, 1])
    fn, tp = int(c[1, 0]), int(c[1, 1])
    if tp + fn == 0:
        raise EmptyClass("no positive ground-truth items")
    if tn + fp == 0:
        raise EmptyClass("no negative ground-truth items")
    sens = tp / (tp + fn)
    spec = tn / (tn + fp)
    acc = (tp + tn) / cm.total
    return sens, spec, acc


def quadratic_weighted_kappa(cm: ConfusionMatrix) -> float:
    """Chance-corrected ordinal agreement with (i-j)^2/(K-1)^2 penalties."""
    if cm.k < 2:
        raise RangeError("kappa needs at least two classes")
    if cm.total == 0:
        raise EmptyMatrix("cannot compute kappa of an empty matrix")
    counts = cm.counts.astype(float)
    k = cm.k
    idx = np.arange(k)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (k - 1) ** 2
    expected = np.outer(counts.sum(axis=1), counts.sum(axis=0)) / cm.total
    denom = float((weights * expected).sum())
    if denom == 0.0:
        if np.trace(cm.counts) == cm.total:
            return 1.0
        raise DegenerateMarginals("kappa undefined: zero expected disagreement "
                                  "with off-diagonal observations")
    return float(1.0 - (weights * counts).sum() / denom)


# ---------------------------------------------------------------------------
# Patient-level cluster bootstrap for the AUC
# ---------------------------------------------------------------------------


def cluster_bootstrap_auc(
    labels: Sequence[int],
    scores: Sequence[float],
    patient_ids: Sequence[str],
    n_boot: int = 2000,
    seed: int = 0,
    level: float = 0.95,
) -> Interval:
    """BCa interval over AUCs of patient-resampled replicates.

    Replicate r draws its patient sample from a generator seeded with
    (seed, r), so results are reproducible and independent of any batching.
    Replicates that lack one of the classes are discarded; if more than half
    are discarded the data are too degenerate to bootstrap.
    """
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=float)
    pid = np.asarray(patient_ids)
    if not (y.shape == s.shape == pid.shape) or y.ndim != 1:
        raise InvariantError("labels, scores and patient_ids must align")
    if not 0.0 < level < 1.0:
        raise RangeError(f"level must lie in (0, 1), got {level}")
    unique_patients, patient_index = np.unique(pid, return_inverse=True)
    n_patients = unique_patients.size
    if n_patients < 2:
        raise RangeError("cluster bootstrap needs at least two patients")

    groups = [np.nonzero(patient_index == i)[0] for i in range(n_patients)]
    theta_hat = _rank_auc(y, s, int(y.sum()), int(y.size - y.sum()))

    # flattened group layout for vectorized replicate gathering
    group_sizes = np.array([g.size for g in groups])
    flat = np.concatenate(groups)
    group_offsets = np.concatenate(([0], np.cumsum(group_sizes[:-1])))

    replicate_aucs = []
    invalid = 0
    for r in range(n_boot):
        rng = np.random.default_rng([seed, r])
        chosen = rng.integers(0, n_patients, n_patients)
        sizes = group_sizes[chosen]
        total = int(sizes.sum())
        ends = np.cumsum(sizes)
        within = np.arange(total) - np.repeat(ends - sizes, sizes)
        idx = flat[np.repeat(group_offsets[chosen], sizes) + within]
        yb = y[idx]
        n_pos = int(yb.sum())
        if n_pos == 0 or n_pos == yb.size:
            invalid += 1
            continue
        replicate_aucs.append(_rank_auc(yb, s[idx], n_pos, yb.size - n_pos))
    if invalid > n_boot // 2:
        raise DegenerateReplicates(
            f"{invalid} of {n_boot} replicates lacked both classes")
    reps = np.sort(np.asarray(replicate_aucs))

    if reps[0] == reps[-1]:
        return Interval(float(reps[0]), float(reps[0]), level, CI_CLUSTER_BOOTSTRAP)

    # bias correction
    frac_below = np.count_nonzero(reps < theta_hat) / reps.size
    frac_below = min(max(frac_below, 0.5 / reps.size), 1.0 - 0.5 / reps.size)
    z0 = norm_ppf(frac_below)

    # jackknife-over-patients acceleration
    jack = np.empty(n_patients)
    for i in range(n_patients):
        keep = np.ones(y.size, dtype=bool)
        keep[groups[i]] = False
        yj = y[keep]
        n_pos = int(yj.sum())
        if n_pos == 0 or n_pos == yj.size:
            jack[i] = theta_hat
            continue
        jack[i] = _rank_auc(yj, s[keep], n_pos, yj.size - n_pos)
    deltas = jack.mean() - jack
    denom = (deltas ** 2).sum() ** 1.5
    accel = float((deltas ** 3).sum() / (6.0 * denom)) if denom > 0 else 0.0

    alpha = 1.0 - level
    out = []
    for z_alpha in (norm_ppf(alpha / 2.0), norm_ppf(1.0 - alpha / 2.0)):
        adj = z0 + (z0 + z_alpha) / (1.0 - accel * (z0 + z_alpha))
        out.append(float(np.quantile(reps, min(max(norm_cdf(adj), 0.0), 1.0))))
    lo, hi = out
    # the interval must contain its point estimate
    lo = min(lo, theta_hat)
    hi = max(hi, theta_hat)
    return Interval(max(lo, 0.0), min(hi, 1.0), level, CI_CLUSTER_BOOTSTRAP)


# ---------------------------------------------------------------------------
# Score-set wire format
# ---------------------------------------------------------------------------

_SCORE_SUM_TOLERANCE = 1e-6


@dataclass(frozen=True)
class ScoreSet:
    """Per-image probability vectors over one grading system's classes."""

    image_ids: tuple[str, ...]
    probs: np.ndarray  # shape (n, k)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "image_ids", tuple(self.image_ids))
        if probs.ndim != 2 or probs.shape[0] != len(self.image_ids):
            raise InvariantError("probs must be (n_images, k)")
        if probs.shape[1] < 2:
            raise InvariantError("need at least two classes")
        if (probs < 0).any():
            raise InvariantError("probabilities must be nonnegative")
        bad = np.abs(probs.sum(axis=1) - 1.0) > _SCORE_SUM_TOLERANCE
        if bad.any():
            culprit = self.image_ids[int(np.argmax(bad))]
            raise InvariantError(
                f"probability vector for {culprit} does not sum to 1 "
                f"(sum={probs[np.argmax(bad)].sum():.8f})")
        object.__setattr__(self, "_index",
                           {iid: i for i, iid in enumerate(self.image_ids)})
        if len(self._index) != len(self.image_ids):
            raise InvariantError("duplicate image_id in score set")

    @property
    def k(self) -> int:
        return int(self.probs.shape[1])

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index

    def vector(self, image_id: str) -> np.ndarray:
        return self.probs[self._index[image_id]]

    def matrix_for(self, image_ids: Iterable[str]) -> np.ndarray:
        """Rows for the given ids, in the given order; KeyError if absent."""
        return self.probs[[self._index[i] for i in image_ids]]


def parse_scores(text: str, expected_k: int | None = None) -> ScoreSet:
    """Parse scores CSV: image_id,p0,...,p{k-1}."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise FatalFormat("scores file is empty") from None
    k = len(header) - 1
    if k < 2 or header[0] != "image_id" or header[1:] != [f"p{i}" for i in range(k)]:
        raise FatalFormat(f"invalid scores header {','.join(header)!r}; "
                          "expected image_id,p0,...,p{k-1}")
    if expected_k is not None and k != expected_k:
        raise FatalFormat(f"scores file has {k} classes, expected {expected_k}")
    ids: list[str] = []
    rows: list[list[float]] = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != k + 1:
            raise FatalFormat(f"line {line}: expected {k + 1} cells, got {len(row)}")
        try:
            rows.append([float(c) for c in row[1:]])
        except ValueError:
            raise FatalFormat(f"line {line}: probabilities must be decimal text") from None
        ids.append(row[0].strip())
    return ScoreSet(tuple(ids), np.asarray(rows, dtype=float).reshape(len(ids), k))


def serialize_scores(score_set: ScoreSet, decimals: int = 9) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image_id"] + [f"p{i}" for i in range(score_set.k)])
    for image_id, row in zip(score_set.image_ids, score_set.probs):
        writer.writerow([image_id] + [f"{v:.{decimals}f}" for v in row])
    return buf.getvalue()
