"""Post texts to fixed-dimension vectors.

Tokenizer, frequency-thresholded vocabulary, and a PV-DBOW paragraph
vector trainer with negative sampling: each post is a document whose
vector is trained to predict its own tokens against noise drawn from
the unigram^(3/4) distribution. Unseen posts are embedded at inference
time by freezing the word vectors and optimizing a fresh document
vector with the same objective; empty posts embed as the zero vector.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAD = "<pad>"
UNK = "<unk>"
URL_TOKEN = "<url>"
MENTION_TOKEN = "<mention>"

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")
# CJK ideographs and kana are split one token per character.
_CJK = "぀-ヿ㐀-䶿一-鿿豈-﫿"
_TOKEN_RE = re.compile(
    rf"<url>|<mention>|[{_CJK}]|(?:(?![{_CJK}])[^\W\s])+|[^\w\s]"
)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation boundaries.

    URLs collapse to <url>, @-mentions to <mention>, and CJK runs are
    split per character. Total and deterministic; empty text gives [].
    """
    t = text.lower()
    t = _URL_RE.sub(f" {URL_TOKEN} ", t)
    t = _MENTION_RE.sub(f" {MENTION_TOKEN} ", t)
    return _TOKEN_RE.findall(t)


class Vocabulary:
    """Dense token ids with <pad>=0 and <unk>=1.

    Tokens below ``min_count`` map to <unk>. Id order is deterministic:
    by descending frequency, ties alphabetical.
    """

    def __init__(self, counts: dict[str, int], min_count: int = 2):
        self.counts = dict(counts)
        self.min_count = min_count
        kept = sorted(
            (t for t, c in counts.items() if c >= min_count),
            key=lambda t: (-counts[t], t),
        )
        self.id_to_token = [PAD, UNK] + kept
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}

    @classmethod
    def from_corpus(cls, token_lists, min_count: int = 2) -> "Vocabulary":
        counts: dict[str, int] = {}
        for tokens in token_lists:
            for tok in tokens:
                counts[tok] = counts.get(tok, 0) + 1
        return cls(counts, min_count=min_count)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, 1)

    def ids(self, tokens) -> np.ndarray:
        return np.array([self.id_of(t) for t in tokens], dtype=np.int64)


@dataclass
class PostEmbeddingStore:
    """post_id -> vector map of one fixed dimension."""

    dimension: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, post_id: str) -> bool:
        return post_id in self.vectors

    def get(self, post_id: str) -> np.ndarray:
        return self.vectors[post_id]

    def equals(self, other: "PostEmbeddingStore") -> bool:
        if self.dimension != other.dimension or self.vectors.keys() != other.vectors.keys():
            return False
        return all(np.array_equal(v, other.vectors[k]) for k, v in self.vectors.items())


def save_embeddings(path: str | Path, store: PostEmbeddingStore) -> None:
    """Text format: header ``dim=<d>``, then one ``post_id v1 .. vd`` line each."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"dim={store.dimension}\n")
        for post_id, vec in store.vectors.items():
            nums = " ".join(repr(float(v)) for v in vec)
            fh.write(f"{post_id} {nums}\n")


def load_embeddings(path: str | Path) -> PostEmbeddingStore:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dim="):
            raise ValueError(f"{path}:1: expected 'dim=<d>' header, got {header!r}")
        dimension = int(header[4:])
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(" ")
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            if vec.shape[0] != dimension:
                raise ValueError(
                    f"{path}:{lineno}: vector of dimension {vec.shape[0]}, expected {dimension}"
                )
            vectors[parts[0]] = vec
    return PostEmbeddingStore(dimension=dimension, vectors=vectors)


def _doc_seed(base_seed: int, doc_id: str) -> int:
    """Stable per-document RNG seed, independent of process hash seeds."""
    return (base_seed * 0x9E3779B1 + zlib.crc32(doc_id.encode("utf-8"))) % (2**32)


class PvDbow:
    """PV-DBOW with negative sampling, deterministic per seed.

    For each document d and each observed token w the objective pushes
    up log sigma(v_d . w) and down the same score for ``negatives``
    noise tokens sampled from unigram^0.75. Learning rate decays
    linearly over all updates. ``fit`` keeps the word vectors so fresh
    documents can be embedded later with :meth:`infer`.
    """

    def __init__(
        self,
        dimension: int,
        epochs: int = 20,
        negatives: int = 5,
        lr: float = 0.025,
        min_count: int = 2,
        seed: int = 0,
    ):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        if negatives < 1:
            raise ValueError(f"negatives must be >= 1, got {negatives}")
        self.dimension = dimension
        self.epochs = epochs
        self.negatives = negatives
        self.lr = lr
        self.min_count = min_count
        self.seed = seed
        self.vocab: Vocabulary | None = None
        self.word_vectors: np.ndarray | None = None
        self.doc_ids: list[str] = []
        self.doc_vectors: np.ndarray | None = None
        self.epoch_losses: list[float] = []
        self._noise_cdf: np.ndarray | None = None

    def fit(self, corpus: list[tuple[str, list[str]]]) -> PostEmbeddingStore:
        if not corpus:
            raise ValueError("PV-DBOW: empty corpus")
        rng = np.random.default_rng(self.seed)
        self.vocab = Vocabulary.from_corpus((tokens for _, tokens in corpus), self.min_count)
        self.doc_ids = [doc_id for doc_id, _ in corpus]
        docs = [self.vocab.ids(tokens) for _, tokens in corpus]

        vocab_size = len(self.vocab)
        d = self.dimension
        self.doc_vectors = rng.uniform(-0.5 / d, 0.5 / d, size=(len(docs), d))
        self.word_vectors = np.zeros((vocab_size, d))

        # Noise distribution over real ids (PAD excluded): unigram^0.75.
        freqs = np.zeros(vocab_size)
        for ids in docs:
            np.add.at(freqs, ids, 1.0)
        freqs[0] = 0.0
        weights = freqs**0.75
        total = weights.sum()
        if total == 0:
            raise ValueError("PV-DBOW: corpus has no tokens")
        self._noise_cdf = np.cumsum(weights / total)

        total_tokens = sum(len(ids) for ids in docs)
        total_steps = max(1, self.epochs * total_tokens)
        step = 0
        self.epoch_losses = []
        for _ in range(self.epochs):
            order = rng.permutation(len(docs))
            loss_sum = 0.0
            loss_n = 0
            for di in order:
                ids = docs[di]
                for w in ids:
                    alpha = self.lr * max(1e-4, 1.0 - step / total_steps)
                    step += 1
                    loss_sum += self._sgns_update(self.doc_vectors, di, int(w), alpha, rng)
                    loss_n += 1
            self.epoch_losses.append(loss_sum / max(1, loss_n))
        # Documents with no tokens never train; they embed as zero.
        for i, ids in enumerate(docs):
            if len(ids) == 0:
                self.doc_vectors[i] = 0.0
        return self.store()

    def _sgns_update(
        self, doc_matrix: np.ndarray, row: int, target: int, alpha: float, rng: np.random.Generator
    ) -> float:
        """One negative-sampling step on doc_matrix[row]; returns the loss."""
        negs = np.searchsorted(self._noise_cdf, rng.random(self.negatives))
        negs = negs[negs != target]
        targets = np.concatenate([[target], negs])
        labels = np.zeros(len(targets))
        labels[0] = 1.0
        v = doc_matrix[row]
        w = self.word_vectors[targets]
        scores = w @ v
        probs = _sigmoid(scores)
        errs = probs - labels
        grad_v = errs @ w
        np.add.at(self.word_vectors, targets, np.outer(errs, v) * -alpha)
        doc_matrix[row] -= alpha * grad_v
        eps = 1e-12
        return float(-np.log(probs[0] + eps) - np.log(1.0 - probs[1:] + eps).sum())

    def store(self) -> PostEmbeddingStore:
        vectors = {}
        for i, doc_id in enumerate(self.doc_ids):
            vectors[doc_id] = self.doc_vectors[i].copy()
        return PostEmbeddingStore(dimension=self.dimension, vectors=vectors)

    def infer(self, tokens: list[str], doc_key: str = "") -> np.ndarray:
        """Embed an unseen document with frozen word vectors.

        Runs ``epochs`` passes of the training objective on a fresh
        document vector. Deterministic: the RNG is seeded from the
        model seed and ``doc_key``. Empty documents (or documents with
        no trainable signal) return the zero vector.
        """
        if self.word_vectors is None:
            raise RuntimeError("PV-DBOW: fit() must run before infer()")
        if not tokens:
            return np.zeros(self.dimension)
        rng = np.random.default_rng(_doc_seed(self.seed, doc_key))
        ids = self.vocab.ids(tokens)
        vec = rng.uniform(-0.5 / self.dimension, 0.5 / self.dimension, size=(1, self.dimension))
        frozen = self.word_vectors.copy()
        total_steps = max(1, self.epochs * len(ids))
        step = 0
        for _ in range(self.epochs):
            for w in ids:
                alpha = self.lr * max(1e-4, 1.0 - step / total_steps)
                step += 1
                self._infer_update(frozen, vec, int(w), alpha, rng)
        return vec[0]

    def _infer_update(
        self, frozen: np.ndarray, vec: np.ndarray, target: int, alpha: float,
        rng: np.random.Generator,
    ) -> None:
        negs = np.searchsorted(self._noise_cdf, rng.random(self.negatives))
        negs = negs[negs != target]
        targets = np.concatenate([[target], negs])
        labels = np.zeros(len(targets))
        labels[0] = 1.0
        w = frozen[targets]
        errs = _sigmoid(w @ vec[0]) - labels
        vec[0] -= alpha * (errs @ w)

    def embed_posts(self, post_ids_tokens: list[tuple[str, list[str]]]) -> dict[str, np.ndarray]:
        """Vectors for a mix of trained and unseen posts."""
        trained = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        out = {}
        for post_id, tokens in post_ids_tokens:
            if post_id in trained:
                out[post_id] = self.doc_vectors[trained[post_id]].copy()
            else:
                out[post_id] = self.infer(tokens, doc_key=post_id)
        return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def train_pv_dbow(
    corpus: list[tuple[str, list[str]]],
    dimension: int,
    epochs: int = 20,
    negatives: int = 5,
    lr: float = 0.025,
    seed: int = 0,
    min_count: int = 2,
) -> PostEmbeddingStore:
    """Train paragraph vectors and return the per-document store.

    Documents that are empty after tokenization get the zero vector
    (missing or deleted post texts carry no content signal).
    """
    model = PvDbow(
        dimension, epochs=epochs, negatives=negatives, lr=lr, min_count=min_count, seed=seed
    )
    return model.fit(corpus)
