"""Synthetic-corpus generation oracle, independent of the engine under test."""

from itertools import permutations

import numpy as np

from qualda.corpus import Corpus, Document, Vocabulary, tokenize


def make_corpus(word_seqs: list[list[int]], v: int) -> Corpus:
    """Materialize integer word sequences as real tokenized documents."""
    vocab = Vocabulary([f"w{i:02d}" for i in range(v)], [1] * v)
    docs = []
    for d, seq in enumerate(word_seqs):
        text = " ".join(vocab.words[w] for w in seq)
        tokens = tokenize(text)
        for t in tokens:
            t.word_id = vocab.word_to_id[t.surface]
        docs.append(Document(doc_id=f"d{d:04d}", text=text, tokens=tokens))
    return Corpus(docs, vocab)


def planted_topics(v: int = 20) -> np.ndarray:
    """Two disjoint-support topics with linearly decaying word probabilities."""
    half = v // 2
    a = np.zeros(v)
    a[:half] = np.arange(half, 0, -1.0)
    b = np.zeros(v)
    b[half:] = np.arange(half, 0, -1.0)
    return np.stack([a / a.sum(), b / b.sum()])


def generate(
    n_docs: int,
    doc_len: int,
    topics: np.ndarray,
    doc_alpha: float,
    rng: np.random.Generator,
) -> list[list[int]]:
    """Draw documents from the generative model: theta ~ Dir(doc_alpha),
    z ~ Cat(theta), w ~ Cat(topics[z])."""
    k, v = topics.shape
    seqs = []
    thetas = rng.dirichlet(np.full(k, doc_alpha), size=n_docs)
    for d in range(n_docs):
        z = rng.choice(k, size=doc_len, p=thetas[d])
        seqs.append([int(rng.choice(v, p=topics[zi])) for zi in z])
    return seqs


def best_permutation_l1(beta: np.ndarray, topics: np.ndarray) -> float:
    """Mean per-topic L1 distance under the best topic alignment."""
    k = topics.shape[0]
    return min(
        float(np.abs(beta[list(p)] - topics).sum(axis=1).mean())
        for p in permutations(range(k))
    )


def identity_l1(beta: np.ndarray, topics: np.ndarray) -> float:
    """Mean per-topic L1 distance without permutation search."""
    return float(np.abs(beta - topics).sum(axis=1).mean())
