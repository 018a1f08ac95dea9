"""Constrained variational EM for LDA with seeded topics.

Topics are point-estimated row-stochastic distributions over the vocabulary.
The E-step runs the classic mean-field inner loop per document
(phi ~ beta * exp(digamma(gamma)), gamma = alpha + sum phi), except that
tokens carrying a manual code are clamped to an even split over their coded
themes, and tokens under a deleted code get zero responsibility for the
deleted theme. The M-step re-estimates each topic from smoothed responsibility
counts: beta[k][w] = (eta + stats[k][w]) / sum_w'(eta + stats[k][w']).

The fit trace records the objective EM actually ascends: the per-document
variational bound plus eta * sum(log beta) over non-excluded entries (the
log-prior matching the smoothed M-step). That quantity is non-decreasing
across iterations by construction; the plain corpus bound (see elbo()) can
dip by O(eta) near the fixed point because the smoothing biases the M-step
away from the bound's own optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import gammaln, psi

from .annotation import AUTO, Annotation, ConstraintSet
from .corpus import Corpus, Document, Vocabulary
from .errors import AllForbidden, FreeTopicMerge, NonFinite, NoTopics

_ZERO_FLOOR = 1e-300  # guards exact-zero Dirichlet draws before logs/divisions

# Concentration for free-topic starting rows. Draws must be asymmetric enough
# to break topic symmetry but not so sparse that the first E-step
# hard-partitions the vocabulary into an inescapable fixed point; uniform
# simplex draws sit in that window, Dirichlet(eta) with small eta does not.
_FREE_INIT_CONCENTRATION = 1.0


@dataclass
class TrainConfig:
    k_free: int = 5
    alpha: float = 0.1
    eta: float = 0.01
    seed_mass: float = 0.9
    max_em_iters: int = 100
    conv_tol: float = 1e-5
    doc_inner_iters: int = 50
    doc_conv_tol: float = 1e-4
    rng_seed: int = 0
    global_exclusion: bool = False
    tau_token: float = 0.5
    tau_doc: float = 0.1

    def validate(self) -> None:
        if self.k_free < 0:
            raise ValueError("k_free must be >= 0")
        if not (self.alpha > 0 and self.eta > 0):
            raise ValueError("alpha and eta must be positive")
        if not (0 < self.seed_mass < 1):
            raise ValueError("seed_mass must lie in (0, 1)")
        for name in ("tau_token", "tau_doc"):
            v = getattr(self, name)
            if not (0 < v < 1):
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.max_em_iters < 1 or self.doc_inner_iters < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.conv_tol <= 0 or self.doc_conv_tol <= 0:
            raise ValueError("tolerances must be positive")

    def to_json(self) -> dict:
        return {
            "k_free": self.k_free,
            "alpha": self.alpha,
            "eta": self.eta,
            "seed_mass": self.seed_mass,
            "max_em_iters": self.max_em_iters,
            "conv_tol": self.conv_tol,
            "doc_inner_iters": self.doc_inner_iters,
            "doc_conv_tol": self.doc_conv_tol,
            "rng_seed": self.rng_seed,
            "global_exclusion": self.global_exclusion,
            "tau_token": self.tau_token,
            "tau_doc": self.tau_doc,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TrainConfig":
        cfg = cls(**{k: data[k] for k in cls().to_json() if k in data})
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class ThemeSeed:
    """What the engine needs to know about a theme: its id and coded words."""

    theme_id: int
    word_ids: frozenset[int] = frozenset()


@dataclass(frozen=True)
class TopicBinding:
    """Meta for a themed topic: owning theme and the words it was seeded with."""

    theme_id: int
    seed_words: tuple[int, ...] = ()


@dataclass
class TopicModel:
    beta: np.ndarray  # K x V, rows on the simplex
    alpha: float
    eta: float
    topic_meta: list[Optional[TopicBinding]]  # None marks a free topic
    version: int = 0
    row_mass: np.ndarray = field(default=None)  # per-topic pseudo-count total

    def __post_init__(self) -> None:
        if self.row_mass is None:
            self.row_mass = np.full(self.k, self.beta.shape[1] * self.eta)

    @property
    def k(self) -> int:
        return self.beta.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.beta.shape[1]

    def themed_indices(self) -> list[int]:
        return [i for i, b in enumerate(self.topic_meta) if b is not None]

    def free_indices(self) -> list[int]:
        return [i for i, b in enumerate(self.topic_meta) if b is None]

    def theme_topics(self) -> dict[int, int]:
        return {
            b.theme_id: i for i, b in enumerate(self.topic_meta) if b is not None
        }

    def topic_for_theme(self, theme_id: int) -> Optional[int]:
        return self.theme_topics().get(theme_id)

    def pseudo_counts(self) -> np.ndarray:
        return self.beta * self.row_mass[:, None]

    def top_words(self, topic: int, n: int, vocab: Vocabulary) -> list[tuple[str, float]]:
        """Top-n words of a topic, probability descending then word ascending."""
        row = self.beta[topic]
        order = sorted(range(len(row)), key=lambda w: (-row[w], vocab.words[w]))
        return [(vocab.words[w], float(row[w])) for w in order[:n]]

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "eta": self.eta,
            "version": self.version,
            "topic_meta": [
                None
                if b is None
                else {"theme_id": b.theme_id, "seed_words": list(b.seed_words)}
                for b in self.topic_meta
            ],
            "beta": [list(map(float, row)) for row in self.beta],
            "row_mass": [float(x) for x in self.row_mass],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TopicModel":
        meta = [
            None
            if b is None
            else TopicBinding(b["theme_id"], tuple(b["seed_words"]))
            for b in data["topic_meta"]
        ]
        return cls(
            beta=np.array(data["beta"], dtype=float),
            alpha=data["alpha"],
            eta=data["eta"],
            topic_meta=meta,
            version=data["version"],
            row_mass=np.array(data["row_mass"], dtype=float),
        )


@dataclass
class DocTopicState:
    gamma: np.ndarray  # length K, each entry >= alpha
    theta_hat: np.ndarray  # length K, on the simplex
    phi: Optional[np.ndarray] = None  # N x K responsibilities; dropped on persist

    def to_json(self) -> dict:
        return {
            "gamma": [float(x) for x in self.gamma],
            "theta_hat": [float(x) for x in self.theta_hat],
        }

    @classmethod
    def from_json(cls, data: dict) -> "DocTopicState":
        return cls(
            gamma=np.array(data["gamma"], dtype=float),
            theta_hat=np.array(data["theta_hat"], dtype=float),
        )


@dataclass
class FitTrace:
    elbos: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    degenerate_rows: int = 0


def compute_theta_hat(gamma: np.ndarray, alpha: float) -> np.ndarray:
    """Normalized topic proportions (gamma - alpha), negatives floored at 0."""
    num = np.maximum(gamma - alpha, 0.0)
    total = num.sum()
    if total <= 0:
        return np.full(len(gamma), 1.0 / len(gamma))
    return num / total


def _seeded_row(word_ids: frozenset[int], v: int, seed_mass: float) -> np.ndarray:
    """High probability spread over the coded words, low over the rest."""
    ids = sorted(w for w in word_ids if 0 <= w < v)
    if not ids or len(ids) == v:
        return np.full(v, 1.0 / v)
    row = np.full(v, (1.0 - seed_mass) / (v - len(ids)))
    row[ids] = seed_mass / len(ids)
    return row


def _free_rows(n: int, v: int, rng: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.zeros((0, v))
    rows = rng.dirichlet(np.full(v, _FREE_INIT_CONCENTRATION), size=n)
    rows = np.maximum(rows, _ZERO_FLOOR)
    return rows / rows.sum(axis=1, keepdims=True)


def initialize_model(
    themes: Sequence[ThemeSeed],
    constraints: ConstraintSet,
    vocab: Vocabulary,
    config: TrainConfig,
    prev: Optional[TopicModel] = None,
) -> TopicModel:
    """Build the EM starting point: seeded themed topics plus free topics.

    Cold start: each themed topic puts seed_mass uniformly on its coded word
    types and the remainder uniformly elsewhere; free topics are symmetric
    Dirichlet draws from rng_seed. Warm start: surviving topics copy
    their previous rows, re-blended with newly coded words at seed_mass.
    Forbidden (word, theme topic) pairs are zeroed and rows renormalized.
    """
    config.validate()
    v = vocab.V
    ordered = sorted(themes, key=lambda t: t.theme_id)
    k = len(ordered) + config.k_free
    if k == 0:
        raise NoTopics("no themes and k_free = 0")

    rng = np.random.default_rng(config.rng_seed)
    prev_topics = prev.theme_topics() if prev is not None else {}
    prev_free = prev.free_indices() if prev is not None else []

    beta = np.empty((k, v))
    mass = np.empty(k)
    meta: list[Optional[TopicBinding]] = []
    for i, theme in enumerate(ordered):
        if prev is not None and theme.theme_id in prev_topics:
            pidx = prev_topics[theme.theme_id]
            row = prev.beta[pidx].copy()
            mass[i] = prev.row_mass[pidx]
            recorded = set(prev.topic_meta[pidx].seed_words)
            new_words = frozenset(theme.word_ids) - recorded
            if new_words:
                row = (1.0 - config.seed_mass) * row
                extra = np.zeros(v)
                ids = sorted(w for w in new_words if 0 <= w < v)
                if ids:
                    extra[ids] = config.seed_mass / len(ids)
                row = row + extra
        else:
            row = _seeded_row(theme.word_ids, v, config.seed_mass)
            mass[i] = v * config.eta
        beta[i] = row
        meta.append(TopicBinding(theme.theme_id, tuple(sorted(theme.word_ids))))

    n_free = config.k_free
    fresh_needed = max(0, n_free - len(prev_free))
    fresh = _free_rows(fresh_needed, v, rng)
    for j in range(n_free):
        i = len(ordered) + j
        if j < len(prev_free):
            beta[i] = prev.beta[prev_free[j]].copy()
            mass[i] = prev.row_mass[prev_free[j]]
        else:
            beta[i] = fresh[j - len(prev_free)]
            mass[i] = v * config.eta
        meta.append(None)

    theme_index = {b.theme_id: i for i, b in enumerate(meta) if b is not None}
    for word_id, theme_id in sorted(constraints.forbidden_pairs()):
        i = theme_index.get(theme_id)
        if i is not None and 0 <= word_id < v:
            beta[i, word_id] = 0.0

    sums = beta.sum(axis=1)
    dead = np.flatnonzero(sums <= 0)
    if dead.size:
        raise AllForbidden(int(dead[0]))
    beta /= sums[:, None]

    return TopicModel(
        beta=beta,
        alpha=config.alpha,
        eta=config.eta,
        topic_meta=meta,
        version=prev.version if prev is not None else 0,
        row_mass=mass,
    )


def _constraint_arrays(
    doc: Document,
    wids: np.ndarray,
    model: TopicModel,
    constraints: ConstraintSet,
):
    """Per-token clamp rows and forbid masks for one document."""
    k = model.k
    theme_index = model.theme_topics()
    clamp_spec = constraints.clamp_for(doc.doc_id)
    forbid_spec = constraints.forbid_for(doc.doc_id)

    clamp_rows: dict[int, np.ndarray] = {}
    for word_id, theme_ids in clamp_spec.items():
        cols = sorted(theme_index[t] for t in theme_ids if t in theme_index)
        if cols:
            row = np.zeros(k)
            row[cols] = 1.0 / len(cols)
            clamp_rows[word_id] = row

    n = len(wids)
    clamped = np.zeros(n, dtype=bool)
    fixed = np.zeros((n, k))
    allow = np.ones((n, k), dtype=bool)
    for idx, w in enumerate(wids):
        w = int(w)
        if w in clamp_rows:
            clamped[idx] = True
            fixed[idx] = clamp_rows[w]
        elif w in forbid_spec:
            cols = [theme_index[t] for t in forbid_spec[w] if t in theme_index]
            allow[idx, cols] = False
    return clamped, fixed, allow


def e_step_document(
    doc: Document,
    model: TopicModel,
    constraints: ConstraintSet,
    config: TrainConfig,
    init_gamma: Optional[np.ndarray] = None,
    trace: Optional[FitTrace] = None,
) -> DocTopicState:
    """Variational inner loop for one document under clamp/forbid constraints.

    Tokens whose word type was forbidden for every reachable topic never
    crash the step: they fall back to a uniform split over the free topics
    (or the non-forbidden themed topics when there are none), counted in
    trace.degenerate_rows.
    """
    k = model.k
    alpha = model.alpha
    wids = np.asarray(doc.word_ids(), dtype=int)
    n = len(wids)
    if n == 0:
        gamma = np.full(k, alpha)
        return DocTopicState(
            gamma=gamma, theta_hat=compute_theta_hat(gamma, alpha), phi=np.zeros((0, k))
        )

    clamped, fixed, allow = _constraint_arrays(doc, wids, model, constraints)
    beta_doc = model.beta[:, wids].T  # n x k
    free = model.free_indices()

    def fallback_row(idx: int) -> np.ndarray:
        if trace is not None:
            trace.degenerate_rows += 1
        cols = free or [j for j in range(k) if allow[idx, j]] or list(range(k))
        row = np.zeros(k)
        row[cols] = 1.0 / len(cols)
        return row

    gamma = (
        init_gamma.astype(float).copy()
        if init_gamma is not None
        else np.full(k, alpha + n / k)
    )
    phi = np.zeros((n, k))
    for _ in range(config.doc_inner_iters):
        weights = np.exp(psi(gamma))
        phi = beta_doc * weights[None, :]
        phi[~allow] = 0.0
        sums = phi.sum(axis=1)
        sums[clamped] = 1.0  # rows overwritten below
        bad = np.flatnonzero((sums <= 0) & ~clamped)
        for idx in bad:
            phi[idx] = fallback_row(int(idx))
            sums[idx] = 1.0
        phi /= sums[:, None]
        phi[clamped] = fixed[clamped]
        new_gamma = alpha + phi.sum(axis=0)
        delta = float(np.abs(new_gamma - gamma).mean())
        gamma = new_gamma
        if delta < config.doc_conv_tol:
            break

    return DocTopicState(gamma=gamma, theta_hat=compute_theta_hat(gamma, alpha), phi=phi)


def _smoothed_counts(
    phi_stats: np.ndarray,
    eta: float,
    constraints: ConstraintSet,
    config: TrainConfig,
    topic_meta: Sequence[Optional[TopicBinding]],
) -> np.ndarray:
    counts = phi_stats + eta
    if config.global_exclusion:
        theme_index = {
            b.theme_id: i for i, b in enumerate(topic_meta) if b is not None
        }
        for word_id, theme_id in constraints.forbidden_pairs():
            i = theme_index.get(theme_id)
            if i is not None and 0 <= word_id < counts.shape[1]:
                counts[i, word_id] = 0.0
    return counts


def m_step(
    phi_stats: np.ndarray,
    eta: float,
    constraints: ConstraintSet,
    config: TrainConfig,
    topic_meta: Sequence[Optional[TopicBinding]] = (),
) -> np.ndarray:
    """Re-estimate topics from accumulated responsibilities, eta-smoothed.

    Under global_exclusion, (word, topic) pairs carrying any forbid record
    are zeroed before normalization, so excluded words get exactly zero
    probability everywhere, not just in the documents they were deleted from.
    """
    counts = _smoothed_counts(phi_stats, eta, constraints, config, topic_meta)
    sums = counts.sum(axis=1)
    dead = np.flatnonzero(sums <= 0)
    if dead.size:
        raise AllForbidden(int(dead[0]))
    return counts / sums[:, None]


def _doc_bound(doc: Document, state: DocTopicState, model: TopicModel) -> float:
    """Per-document variational bound with phi treated as fixed constants."""
    theta = _doc_theta_terms(state.gamma, state.phi, model.alpha)
    wids = np.asarray(doc.word_ids(), dtype=int)
    if len(wids) == 0:
        return theta
    beta_doc = model.beta[:, wids].T
    phi = state.phi
    active = phi > 0
    if np.any(active & (beta_doc <= 0)):
        raise NonFinite("positive responsibility on a zero-probability word")
    word_term = float(np.sum(phi[active] * np.log(beta_doc[active])))
    return theta + word_term


def _doc_theta_terms(gamma: np.ndarray, phi: np.ndarray, alpha: float) -> float:
    """Bound pieces that do not involve beta: theta prior, z terms, entropies."""
    k = len(gamma)
    elog_theta = psi(gamma) - psi(gamma.sum())
    out = float(gammaln(k * alpha) - k * gammaln(alpha) + ((alpha - 1.0) * elog_theta).sum())
    out += float((phi.sum(axis=0) * elog_theta).sum())
    out -= float(
        gammaln(gamma.sum()) - gammaln(gamma).sum() + ((gamma - 1.0) * elog_theta).sum()
    )
    if phi.size:
        active = phi > 0
        out -= float(np.sum(phi[active] * np.log(phi[active])))
    return out


def _beta_log_prior(beta: np.ndarray, eta: float) -> float:
    """eta * sum(log beta) over non-excluded entries, matching the M-step."""
    positive = beta > 0
    return float(eta * np.log(beta[positive]).sum())


def elbo(
    corpus: Corpus,
    model: TopicModel,
    doc_states: Mapping[str, DocTopicState],
) -> float:
    """Corpus variational bound, summed over documents.

    Clamped and forbidden phi entries enter as the fixed constants they are;
    0 * log 0 counts as 0. Raises NonFinite if a positive responsibility
    meets a zero topic probability.
    """
    total = 0.0
    for doc in corpus.documents:
        state = doc_states.get(doc.doc_id)
        if state is None or state.phi is None:
            raise ValueError(f"no responsibilities for document {doc.doc_id}")
        total += _doc_bound(doc, state, model)
    if not np.isfinite(total):
        raise NonFinite("corpus bound is not finite")
    return total


def fit(
    corpus: Corpus,
    themes: Sequence[ThemeSeed],
    constraints: ConstraintSet,
    config: TrainConfig,
    prev: Optional[TopicModel] = None,
    prev_states: Optional[Mapping[str, DocTopicState]] = None,
    iter_callback=None,
) -> tuple[TopicModel, dict[str, DocTopicState], FitTrace]:
    """Alternate constrained E-steps and smoothed M-steps until the objective
    stabilizes (relative change < conv_tol) or max_em_iters is reached.

    With no themes and no constraints this is standard unsupervised LDA over
    k_free topics. Document inner loops warm-start from the previous
    iteration's gamma, so each recorded objective value is >= the last;
    prev_states (the gammas of the snapshot prev came from) extend that
    warm start across fits, making a refit with unchanged inputs an
    immediate fixed point. iter_callback(model, states, trace) fires after
    every completed iteration.
    """
    config.validate()
    model = initialize_model(themes, constraints, corpus.vocabulary, config, prev)
    k, v = model.k, model.vocab_size
    trace = FitTrace()
    states: dict[str, DocTopicState] = {}
    if prev_states:
        states = {
            doc_id: st
            for doc_id, st in prev_states.items()
            if len(st.gamma) == k
        }
    previous_objective: Optional[float] = None

    for _ in range(config.max_em_iters):
        stats_t = np.zeros((v, k))  # transposed for fancy-index accumulation
        theta_terms = 0.0
        for doc in corpus.documents:
            prior = states.get(doc.doc_id)
            state = e_step_document(
                doc,
                model,
                constraints,
                config,
                init_gamma=None if prior is None else prior.gamma,
                trace=trace,
            )
            states[doc.doc_id] = state
            wids = np.asarray(doc.word_ids(), dtype=int)
            if len(wids):
                np.add.at(stats_t, wids, state.phi)
            theta_terms += _doc_theta_terms(state.gamma, state.phi, model.alpha)

        stats = stats_t.T
        counts = _smoothed_counts(stats, model.eta, constraints, config, model.topic_meta)
        sums = counts.sum(axis=1)
        dead = np.flatnonzero(sums <= 0)
        if dead.size:
            raise AllForbidden(int(dead[0]))
        model.beta = counts / sums[:, None]
        model.row_mass = sums

        positive = model.beta > 0
        if np.any((stats > 0) & ~positive):
            raise NonFinite("responsibility mass on an excluded word")
        word_term = float(np.sum(stats[positive] * np.log(model.beta[positive])))
        objective = theta_terms + word_term + _beta_log_prior(model.beta, model.eta)
        if not np.isfinite(objective):
            raise NonFinite("EM objective is not finite")

        trace.elbos.append(objective)
        trace.iterations += 1
        if iter_callback is not None:
            iter_callback(model, states, trace)
        if previous_objective is not None:
            denom = abs(previous_objective)
            change = abs(objective - previous_objective)
            if change < config.conv_tol * (denom if denom > 0 else 1.0):
                trace.converged = True
                break
        previous_objective = objective

    model.version = (prev.version if prev is not None else 0) + 1
    return model, states, trace


def merge_topics(
    model: TopicModel,
    topic_a: int,
    topic_b: int,
    doc_states: Mapping[str, DocTopicState],
) -> tuple[TopicModel, dict[str, DocTopicState]]:
    """Fuse two themed topics: pseudo-counts add, gammas add, topic_b drops.

    The merged model is the warm-start input to the next fit; indices above
    topic_b shift down by one, everything else is untouched.
    """
    if topic_a == topic_b:
        raise ValueError("cannot merge a topic with itself")
    if model.topic_meta[topic_a] is None or model.topic_meta[topic_b] is None:
        raise FreeTopicMerge("both topics must be themed")

    counts = model.pseudo_counts()
    merged_counts = counts[topic_a] + counts[topic_b]
    merged_mass = model.row_mass[topic_a] + model.row_mass[topic_b]

    keep = [i for i in range(model.k) if i != topic_b]
    beta = model.beta[keep].copy()
    mass = model.row_mass[keep].copy()
    meta = [model.topic_meta[i] for i in keep]
    new_a = keep.index(topic_a)
    beta[new_a] = merged_counts / merged_mass
    mass[new_a] = merged_mass
    binding_a = model.topic_meta[topic_a]
    binding_b = model.topic_meta[topic_b]
    meta[new_a] = TopicBinding(
        binding_a.theme_id,
        tuple(sorted(set(binding_a.seed_words) | set(binding_b.seed_words))),
    )
    merged_model = TopicModel(
        beta=beta,
        alpha=model.alpha,
        eta=model.eta,
        topic_meta=meta,
        version=model.version,
        row_mass=mass,
    )

    merged_states: dict[str, DocTopicState] = {}
    for doc_id, state in doc_states.items():
        gamma = state.gamma[keep].copy()
        gamma[new_a] = state.gamma[topic_a] + state.gamma[topic_b]
        # proportions stay exactly additive: the merged entry is the sum of
        # the two prior entries, the others are carried over and renormalized
        # only through the dropped dimension.
        theta = state.theta_hat[keep].copy()
        theta[new_a] = state.theta_hat[topic_a] + state.theta_hat[topic_b]
        phi = None
        if state.phi is not None:
            phi = state.phi[:, keep].copy()
            phi[:, new_a] = state.phi[:, topic_a] + state.phi[:, topic_b]
        merged_states[doc_id] = DocTopicState(gamma=gamma, theta_hat=theta, phi=phi)
    return merged_model, merged_states


def split_topic(
    model: TopicModel,
    theme_topic: int,
    new_theme_id: int,
    departing_words: frozenset[int],
    constraints: ConstraintSet,
    config: TrainConfig,
) -> TopicModel:
    """Seed a fresh topic for a code departing a theme; the rest is untouched.

    The new topic is inserted after the existing themed block; refinement of
    both topics is deferred to the next fit.
    """
    if model.topic_meta[theme_topic] is None:
        raise FreeTopicMerge("can only split a themed topic")
    v = model.vocab_size
    row = _seeded_row(departing_words, v, config.seed_mass)
    for word_id, theme_id in constraints.forbidden_pairs():
        if theme_id == new_theme_id and 0 <= word_id < v:
            row[word_id] = 0.0
    total = row.sum()
    if total <= 0:
        raise AllForbidden(theme_topic)
    row = row / total

    insert_at = len(model.themed_indices())
    beta = np.insert(model.beta, insert_at, row, axis=0)
    mass = np.insert(model.row_mass, insert_at, v * model.eta)
    meta = list(model.topic_meta)
    meta.insert(
        insert_at, TopicBinding(new_theme_id, tuple(sorted(departing_words)))
    )
    return TopicModel(
        beta=beta,
        alpha=model.alpha,
        eta=model.eta,
        topic_meta=meta,
        version=model.version,
        row_mass=mass,
    )


def suggest_annotations(
    doc: Document,
    state: DocTopicState,
    model: TopicModel,
    config: TrainConfig,
    code_for_theme: Optional[Mapping[int, int]] = None,
    manual_theme_spans: Optional[Mapping[int, Sequence[tuple[int, int]]]] = None,
    deleted_theme_ids: frozenset[int] = frozenset(),
) -> list[Annotation]:
    """Auto-code a document from its responsibilities.

    Emits a token-level annotation wherever a token's strongest topic is
    themed with responsibility >= tau_token, and a document-level one for
    each themed topic with theta_hat >= tau_doc. Tokens already manually
    coded with a theme are skipped for that theme, and themes deleted from
    this document are suppressed entirely. Ties pick the lowest topic index.

    code_for_theme maps themes to the code id that labels their chips;
    without it the theme_id doubles as code_id.
    """
    if state.phi is None:
        raise ValueError("doc state has no responsibilities")
    manual_theme_spans = manual_theme_spans or {}
    tokens = [t for t in doc.tokens if t.word_id >= 0]
    out: list[Annotation] = []

    def code_id(theme_id: int) -> int:
        return code_for_theme[theme_id] if code_for_theme else theme_id

    for idx, token in enumerate(tokens):
        row = state.phi[idx]
        best = int(np.argmax(row))
        binding = model.topic_meta[best]
        if binding is None or row[best] < config.tau_token:
            continue
        theme_id = binding.theme_id
        if theme_id in deleted_theme_ids:
            continue
        covered = any(
            token.start < e and token.end > s
            for s, e in manual_theme_spans.get(theme_id, ())
        )
        if covered:
            continue
        out.append(
            Annotation(
                ann_id=0,
                doc_id=doc.doc_id,
                span=token.span,
                code_id=code_id(theme_id),
                origin=AUTO,
                version=model.version,
            )
        )

    for i, binding in enumerate(model.topic_meta):
        if binding is None or binding.theme_id in deleted_theme_ids:
            continue
        if state.theta_hat[i] >= config.tau_doc:
            out.append(
                Annotation(
                    ann_id=0,
                    doc_id=doc.doc_id,
                    span=(0, len(doc.text)),
                    code_id=code_id(binding.theme_id),
                    origin=AUTO,
                    version=model.version,
                    doc_level=True,
                )
            )
    return out
