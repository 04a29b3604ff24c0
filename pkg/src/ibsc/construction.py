"""Source-class selection and feature splicing for unseen classes.

Continuous attributes drive class similarity (``phi``) and attribute
difference (``psi``); binary attributes decide which attributes differ, which
classes may donate, and how many source classes are needed.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import AttributeTable, Dataset, SplitSpec, load_dataset, load_scored_dataset, write_dataset
from .errors import (
    DegenerateError,
    InfeasibleAssignmentError,
    ParseError,
    SelfPairError,
    UncoverableAttributeError,
    ValidationError,
)
from .relation import RelationMatrix, environment_dims
from .sparse_linear import CalibratedModel, attribute_probabilities

log = logging.getLogger(__name__)

DEFAULT_K = 5
DEFAULT_SHORTLIST = 10
SIGMA_FLOOR = 1e-12
RETAINED = -1


@dataclass(frozen=True)
class PairwiseStats:
    mu1: float
    sigma1: float
    mu2: float
    sigma2: float


@dataclass(frozen=True)
class SourcePlan:
    """Ordered source classes per unseen class.

    ``ranking`` keeps the full similarity order of seen classes, used when no
    listed source class can donate an attribute.
    """

    sources: dict
    costs: dict
    hamming: dict
    ranking: dict = field(repr=False, default_factory=dict)

    @property
    def assignment_cost(self) -> float:
        return math.fsum(self.costs.values())

    def primary(self, u: int) -> int:
        return self.sources[u][0]


@dataclass(frozen=True)
class ConstructedSample:
    feature: np.ndarray
    target_class: int
    base_sample: int
    provenance: np.ndarray
    screen_score: float | None = None
    skipped_attributes: tuple = ()

    def with_score(self, score: float) -> "ConstructedSample":
        return replace(self, screen_score=float(score))


# --- class statistics ------------------------------------------------------

def _pair_distances(A):
    diff = A[:, None, :] - A[None, :, :]
    l2 = np.sqrt(np.sum(diff * diff, axis=-1))
    l1 = np.sum(np.abs(diff), axis=-1)
    return l2, l1


def pairwise_stats(attrs: AttributeTable) -> PairwiseStats:
    """Mean and population std of l2 and l1 distances over all unordered class pairs."""
    if attrs.K < 2:
        raise ValidationError("need at least two classes for pairwise statistics")
    l2, l1 = _pair_distances(attrs.continuous)
    iu = np.triu_indices(attrs.K, k=1)
    d2, d1 = l2[iu], l1[iu]
    stats = PairwiseStats(float(d2.mean()), float(d2.std()), float(d1.mean()), float(d1.std()))
    if stats.sigma1 < SIGMA_FLOOR or stats.sigma2 < SIGMA_FLOOR:
        raise DegenerateError("all pairwise attribute distances are identical")
    return stats


def similarity_matrices(attrs: AttributeTable, stats: PairwiseStats) -> tuple[np.ndarray, np.ndarray]:
    """Standardized ``phi`` (l2) and ``psi`` (l1) matrices over all K classes.

    Diagonal entries are meaningless and set to NaN.
    """
    l2, l1 = _pair_distances(attrs.continuous)
    phi = (l2 - stats.mu1) / stats.sigma1
    psi = (l1 - stats.mu2) / stats.sigma2
    np.fill_diagonal(phi, np.nan)
    np.fill_diagonal(psi, np.nan)
    return phi, psi


def class_similarity(attrs, stats, i: int, j: int) -> float:
    """Standardized l2 attribute distance; smaller means more similar."""
    if i == j:
        raise SelfPairError(f"similarity of class {i} with itself is undefined")
    return float(similarity_matrices(attrs, stats)[0][i, j])


def attribute_difference(attrs, stats, i: int, j: int) -> float:
    if i == j:
        raise SelfPairError(f"attribute difference of class {i} with itself is undefined")
    return float(similarity_matrices(attrs, stats)[1][i, j])


# --- source selection ------------------------------------------------------

def rank_source_candidates(attrs, stats, split: SplitSpec, u: int, phi=None) -> list[int]:
    """Seen classes by ascending ``phi`` to ``u``; ties go to the lower id."""
    if u not in split.unseen:
        raise ValidationError(f"class {u} is not unseen")
    if phi is None:
        phi = similarity_matrices(attrs, stats)[0]
    seen = split.seen_sorted
    return sorted(seen, key=lambda s: (phi[u, s], s))


def virtual_attribute_hamming(attrs: AttributeTable, source_set, u: int) -> int:
    """Attributes of ``u`` that no class in ``source_set`` carries.

    The virtual vector takes u's value wherever some source class shares it
    and falls back to the first source class elsewhere.
    """
    sources = list(source_set)
    if not sources:
        raise ValidationError("source set is empty")
    B = attrs.binary
    target = B[u]
    covered = np.any(B[sources] == target, axis=0)
    virtual = np.where(covered, target, B[sources[0]])
    return int(np.count_nonzero(virtual != target))


def assignment_cost_matrix(attrs, stats, split, phi=None, psi=None) -> np.ndarray:
    """Rows: unseen classes ascending; columns: seen classes ascending; entry phi + psi."""
    if phi is None or psi is None:
        phi, psi = similarity_matrices(attrs, stats)
    U, S = split.unseen_sorted, split.seen_sorted
    return phi[np.ix_(U, S)] + psi[np.ix_(U, S)]


def _integer_costs(cost: np.ndarray) -> list[list[int]]:
    # every finite double is n / 2**k, so one power-of-two scale makes all entries exact ints
    if not np.all(np.isfinite(cost)):
        raise ValidationError("assignment costs must be finite")
    pairs = [float(x).as_integer_ratio() for x in cost.ravel()]
    den = max(d for _, d in pairs)
    flat = [n * (den // d) for n, d in pairs]
    cols = cost.shape[1]
    return [flat[r * cols:(r + 1) * cols] for r in range(cost.shape[0])]


def _assign(cost: np.ndarray) -> np.ndarray:
    """Optimal injective row -> column assignment (rows <= columns).

    Shortest-augmenting-path Hungarian method run in exact integer
    arithmetic, so near-ties between assignments are resolved by the true
    sums rather than by floating-point rounding.
    """
    n_u, n_s = cost.shape
    if n_s < n_u:
        raise InfeasibleAssignmentError(f"{n_u} unseen classes but only {n_s} seen classes")
    C = _integer_costs(cost)
    # 1-based arrays; column 0 is the virtual start column
    u = [0] * (n_u + 1)
    v = [0] * (n_s + 1)
    owner = [0] * (n_s + 1)
    way = [0] * (n_s + 1)
    for i in range(1, n_u + 1):
        owner[0] = i
        j0 = 0
        minv = [None] * (n_s + 1)
        used = [False] * (n_s + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row, ui = C[i0 - 1], u[i0]
            delta, j1 = None, 0
            for j in range(1, n_s + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui - v[j]
                if minv[j] is None or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(n_s + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    out = np.empty(n_u, dtype=np.int64)
    for j in range(1, n_s + 1):
        if owner[j]:
            out[owner[j] - 1] = j - 1
    return out


def assign_primary_sources(attrs, stats, split, phi=None, psi=None) -> dict[int, int]:
    """Injective map unseen -> seen minimizing the summed ``phi + psi``."""
    cost = assignment_cost_matrix(attrs, stats, split, phi, psi)
    cols = _assign(cost)
    S = split.seen_sorted
    return {u: S[c] for u, c in zip(split.unseen_sorted, cols)}


def build_source_plan(
    attrs: AttributeTable,
    stats: PairwiseStats,
    split: SplitSpec,
    k: int = DEFAULT_K,
    auto_k: bool = False,
    k_max: int = DEFAULT_K,
) -> SourcePlan:
    if auto_k:
        if k_max < 2:
            raise ValidationError("auto k needs k_max >= 2")
    elif k < 1:
        raise ValidationError("k must be >= 1")
    phi, psi = similarity_matrices(attrs, stats)
    primary = assign_primary_sources(attrs, stats, split, phi, psi)
    n_seen = len(split.seen)
    sources, costs, hamming, ranking = {}, {}, {}, {}
    for u in split.unseen_sorted:
        s1 = primary[u]
        ranked = rank_source_candidates(attrs, stats, split, u, phi)
        ordered = [s1] + [s for s in ranked if s != s1]
        if auto_k:
            top = min(k_max, n_seen)
            chosen = top
            for kk in range(min(2, top), top + 1):
                if virtual_attribute_hamming(attrs, ordered[:kk], u) == 0:
                    chosen = kk
                    break
        else:
            chosen = min(k, n_seen)
        sources[u] = tuple(ordered[:chosen])
        costs[u] = float(phi[u, s1] + psi[u, s1])
        hamming[u] = virtual_attribute_hamming(attrs, sources[u], u)
        ranking[u] = tuple(ranked)
    return SourcePlan(sources=sources, costs=costs, hamming=hamming, ranking=ranking)


# --- splicing --------------------------------------------------------------

def donor_class(attrs: AttributeTable, plan: SourcePlan, u: int, attr_index: int) -> int:
    """Closest source class carrying u's value of the attribute.

    Looks in S2..Sk first, then in every seen class by similarity.
    """
    target = attrs.binary[u, attr_index]
    for c in plan.sources[u][1:]:
        if attrs.binary[c, attr_index] == target:
            return c
    for c in plan.ranking[u]:
        if attrs.binary[c, attr_index] == target:
            return c
    raise UncoverableAttributeError(u, attr_index, int(target))


def select_donor_sample(
    dataset: Dataset,
    attrs: AttributeTable,
    rel: RelationMatrix,
    plan: SourcePlan,
    calibrated_models: dict[int, CalibratedModel],
    u: int,
    base_sample_index: int,
    attr_index: int,
    m: int = DEFAULT_SHORTLIST,
    env=None,
) -> int:
    """Pick the sample whose attribute-relevant dims get spliced onto the base.

    Shortlist the ``m`` samples of the donor class closest to the base sample
    on the environment dims, then take the one the attribute classifier is
    most confident carries u's value. Ties go to the smaller sample index.
    """
    if m < 1:
        raise ValidationError("shortlist size m must be >= 1")
    target = int(attrs.binary[u, attr_index])
    c = donor_class(attrs, plan, u, attr_index)
    candidates = dataset.indices_of(c)
    if env is None:
        env = environment_dims(rel)
    base = dataset.features[base_sample_index, env]
    diff = dataset.features[np.ix_(candidates, env)] - base
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    order = np.lexsort((candidates, dist))
    shortlist = candidates[order[:m]]
    if shortlist.size == 1:
        return int(shortlist[0])
    model = calibrated_models.get(attr_index)
    if model is None:
        return int(shortlist.min())
    prob = attribute_probabilities(model, dataset.features[shortlist], target)
    best = np.flatnonzero(prob == prob.max())
    return int(shortlist[best].min())


def differing_attributes(attrs: AttributeTable, u: int, s1: int) -> np.ndarray:
    return np.flatnonzero(attrs.binary[u] != attrs.binary[s1])


def construct_class_samples(
    dataset: Dataset,
    attrs: AttributeTable,
    rel: RelationMatrix,
    plan: SourcePlan,
    calibrated_models: dict[int, CalibratedModel],
    u: int,
    m: int = DEFAULT_SHORTLIST,
) -> list[ConstructedSample]:
    """One constructed sample per sample of u's primary source class.

    Each differing attribute, in ascending index order, overwrites its
    relevant dims with a donor's values; later attributes win on overlaps.
    """
    s1 = plan.primary(u)
    bases = dataset.indices_of(s1)
    if bases.size == 0:
        raise ValidationError(f"primary source class {s1} of class {u} has no samples")
    env = environment_dims(rel)
    attrs_to_splice = []
    skipped = []
    for a in differing_attributes(attrs, u, s1):
        dims = rel.relevant_dims(a)
        if dims.size == 0:
            continue
        try:
            donor_class(attrs, plan, u, a)
        except UncoverableAttributeError as exc:
            log.warning("%s; skipped", exc)
            skipped.append(int(a))
            continue
        attrs_to_splice.append((int(a), dims))

    out = []
    for b in bases:
        feature = np.array(dataset.features[b])
        provenance = np.full(dataset.p, RETAINED, dtype=np.int64)
        for a, dims in attrs_to_splice:
            donor = select_donor_sample(dataset, attrs, rel, plan, calibrated_models, u, int(b), a, m, env)
            feature[dims] = dataset.features[donor, dims]
            provenance[dims] = donor
        feature.setflags(write=False)
        provenance.setflags(write=False)
        out.append(ConstructedSample(feature, u, int(b), provenance, None, tuple(skipped)))
    return out


def construct_all(dataset, attrs, rel, plan, calibrated_models, split, m=DEFAULT_SHORTLIST):
    """Constructed samples for every unseen class, in ascending class order."""
    out = []
    for u in split.unseen_sorted:
        out.extend(construct_class_samples(dataset, attrs, rel, plan, calibrated_models, u, m))
    return out


def replaced_dims(attrs: AttributeTable, rel: RelationMatrix, plan: SourcePlan, u: int) -> np.ndarray:
    """Union of the dims splicing overwrites for ``u`` (coverable differing attributes only)."""
    s1 = plan.primary(u)
    mask = np.zeros(rel.p, dtype=bool)
    for a in differing_attributes(attrs, u, s1):
        try:
            donor_class(attrs, plan, u, a)
        except UncoverableAttributeError:
            continue
        mask |= rel.R[a].astype(bool)
    return np.flatnonzero(mask)


# --- persistence -----------------------------------------------------------

def write_source_plan(plan: SourcePlan, path) -> None:
    width = max(len(s) for s in plan.sources.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unseen_id"] + [f"S{i + 1}" for i in range(width)] + ["cost", "hamming"])
        for u in sorted(plan.sources):
            src = list(plan.sources[u]) + [""] * (width - len(plan.sources[u]))
            w.writerow([u] + src + [repr(plan.costs[u]), plan.hamming[u]])


def samples_as_matrix(samples: list[ConstructedSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([s.feature for s in samples])
    y = np.array([s.target_class for s in samples], dtype=np.int64)
    return X, y


def write_constructed(samples: list[ConstructedSample], features_path, provenance_path, class_names,
                      with_scores: bool = False) -> None:
    """Feature CSV (optionally with ``screen_score``) plus per-dim provenance CSV."""
    X, y = samples_as_matrix(samples)
    ds = Dataset(features=X, labels=y, class_names=class_names)
    extra = {"screen_score": [s.screen_score for s in samples]} if with_scores else None
    write_dataset(ds, features_path, "csv", extra_columns=extra)
    with open(provenance_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "base_sample", "dim", "donor_sample_index"])
        for i, s in enumerate(samples):
            for dim, donor in enumerate(s.provenance):
                w.writerow([i, s.base_sample, dim, "retained" if donor == RETAINED else int(donor)])


def read_constructed(features_path, provenance_path, class_names, with_scores: bool = False):
    if with_scores:
        ds, scores = load_scored_dataset(features_path, class_names)
    else:
        ds, scores = load_dataset(features_path, "csv", class_names=class_names), None
    prov = np.full((ds.n, ds.p), RETAINED, dtype=np.int64)
    base = np.full(ds.n, -1, dtype=np.int64)
    with open(provenance_path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != ["id", "base_sample", "dim", "donor_sample_index"]:
            raise ParseError(f"{provenance_path}: bad header")
        for lineno, row in enumerate(reader, start=2):
            try:
                i, b, dim = int(row[0]), int(row[1]), int(row[2])
                prov[i, dim] = RETAINED if row[3] == "retained" else int(row[3])
            except (ValueError, IndexError):
                raise ParseError(f"{provenance_path}: row {lineno}: malformed") from None
            base[i] = b
    out = []
    for i in range(ds.n):
        f = np.array(ds.features[i])
        pr = prov[i].copy()
        f.setflags(write=False)
        pr.setflags(write=False)
        score = None if scores is None else float(scores[i])
        out.append(ConstructedSample(f, int(ds.labels[i]), int(base[i]), pr, score))
    return out
