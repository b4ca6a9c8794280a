"""Subword skip-gram embeddings trained with negative sampling.

Words are represented as the mean of one row for the word itself plus one
row per character n-gram, so unseen words still get vectors from their
n-grams. N-grams are hashed (FNV-1a) into a fixed bucket table instead of
an exact n-gram vocabulary: with n-grams up to length 20 an exact
vocabulary explodes, and hashing is the standard answer.

Training minimizes, for each (center, context) pair inside the window,

    -log sigmoid(u_ctx . v_c) - sum_j log sigmoid(-u_neg_j . v_c)

by SGD, with negatives drawn from the unigram^(3/4) distribution. The
default single-threaded mode is bitwise deterministic under a fixed seed;
``threads > 1`` enables lock-free asynchronous updates for throughput at
the cost of determinism.

Binary model format (version ``TKSG1``): magic line, a 4-byte little-endian
header length, a UTF-8 JSON header (config, vocabulary, counts), then the
input and output matrices as raw little-endian float32. The text format is
``<word_count> <dim>`` followed by one ``word v1 .. vdim`` line per word,
written with 6 significant digits.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass
from typing import Iterable

import numpy as np

_MAGIC = b"TKSG1\n"


@dataclass(frozen=True)
class EmbedConfig:
    dim: int = 300
    nmin: int = 3
    nmax: int = 20
    epochs: int = 300
    window: int = 5
    negatives: int = 5
    learning_rate: float = 0.05
    min_count: int = 1
    seed: int = 42
    bucket_count: int = 1 << 21
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.nmin <= self.nmax:
            raise ValueError("need 0 < nmin <= nmax")
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.negatives < 1:
            raise ValueError("need at least one negative sample")


#: Settings that finish in seconds on a workstation-sized corpus. The bucket
#: table is shrunk along with the dimension to keep the matrices small.
DESK_PROFILE = EmbedConfig(dim=100, epochs=25, bucket_count=1 << 15)

#: Full-scale settings: 300-dimensional vectors, 300 epochs.
PAPER_PROFILE = EmbedConfig(dim=300, epochs=300, bucket_count=1 << 17)

PROFILES = {"desk": DESK_PROFILE, "paper": PAPER_PROFILE}


def extract_subwords(word: str, nmin: int, nmax: int) -> list[str]:
    """Character n-grams of the boundary-wrapped word, ordered by length
    then position; the full wrapped word itself is excluded (it is the word
    unit, not an n-gram)."""
    if not word:
        raise ValueError("word must be nonempty")
    wrapped = f"<{word}>"
    grams = []
    for n in range(nmin, min(nmax, len(wrapped)) + 1):
        for start in range(len(wrapped) - n + 1):
            gram = wrapped[start : start + n]
            if gram != wrapped:
                grams.append(gram)
    return grams


def fnv1a(data: str) -> int:
    """32-bit FNV-1a over the UTF-8 bytes."""
    h = 0x811C9DC5
    for byte in data.encode("utf-8"):
        h ^= byte
        h = (h * 0x01000193) & 0xFFFFFFFF
    return h


def _sigmoid(x):
    # tanh form is stable at both tails.
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x)))


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -np.asarray(x))


def pair_loss(center_rows: np.ndarray, output_rows: np.ndarray) -> float:
    """Negative-sampling loss for one pair.

    ``center_rows`` are the rows composing the center word (word row plus
    n-gram rows); ``output_rows`` stacks the context vector first, then the
    k negatives.
    """
    v = center_rows.mean(axis=0)
    scores = output_rows @ v
    return float(-_log_sigmoid(scores[0]) - np.sum(_log_sigmoid(-scores[1:])))


def pair_loss_and_grad(center_rows: np.ndarray, output_rows: np.ndarray):
    """Loss plus gradients w.r.t. every composing row and output row."""
    v = center_rows.mean(axis=0)
    scores = output_rows @ v
    sig = _sigmoid(scores)
    loss = float(-_log_sigmoid(scores[0]) - np.sum(_log_sigmoid(-scores[1:])))
    g = sig.copy()
    g[0] -= 1.0
    grad_v = g @ output_rows
    grad_center = np.repeat(grad_v[None, :] / len(center_rows), len(center_rows), axis=0)
    grad_output = np.outer(g, v)
    return loss, grad_center, grad_output


class SubwordEmbeddingModel:
    """A trained model: vocabulary plus input and output matrices.

    ``input_vectors`` has one row per vocabulary word followed by
    ``bucket_count`` n-gram bucket rows; ``output_vectors`` covers the
    vocabulary only. Immutable after training; safe for concurrent reads.
    """

    def __init__(self, config: EmbedConfig, vocab: dict, counts: np.ndarray,
                 input_vectors: np.ndarray, output_vectors: np.ndarray):
        self.config = config
        self.vocab = vocab
        self.words = sorted(vocab, key=vocab.get)
        self.counts = counts
        self.input_vectors = input_vectors
        self.output_vectors = output_vectors
        self.epoch_losses: list[float] = []
        self._rows = {}

    @property
    def dim(self) -> int:
        return self.config.dim

    def composing_rows(self, word: str) -> list[int]:
        """Row indices whose mean is the word vector; empty when the word is
        out of vocabulary and too short for any n-gram."""
        cached = self._rows.get(word)
        if cached is not None:
            return cached
        offset = len(self.vocab)
        rows = []
        if word in self.vocab:
            rows.append(self.vocab[word])
        for gram in extract_subwords(word, self.config.nmin, self.config.nmax):
            rows.append(offset + fnv1a(gram) % self.config.bucket_count)
        self._rows[word] = rows
        return rows

    def embed_word(self, word: str) -> np.ndarray:
        """Composed vector; OOV words use n-gram rows alone, never an error."""
        rows = self.composing_rows(word) if word else []
        if not rows:
            return np.zeros(self.dim, dtype=self.input_vectors.dtype)
        return self.input_vectors[rows].mean(axis=0)

    def embed_sentence(self, tokens: Iterable[str]) -> np.ndarray:
        """Mean of L2-normalized word vectors; zero vectors are skipped and
        an empty or all-zero sentence embeds to zero."""
        acc = np.zeros(self.dim, dtype=np.float64)
        n = 0
        for token in tokens:
            vec = self.embed_word(token).astype(np.float64)
            norm = np.linalg.norm(vec)
            if norm == 0.0:
                continue
            acc += vec / norm
            n += 1
        if n == 0:
            return np.zeros(self.dim, dtype=self.input_vectors.dtype)
        return (acc / n).astype(self.input_vectors.dtype)


def _build_vocab(sentences, min_count: int):
    counts: dict[str, int] = {}
    for sentence in sentences:
        for token in sentence:
            counts[token] = counts.get(token, 0) + 1
    items = sorted((w, c) for w, c in counts.items() if c >= min_count)
    vocab = {w: i for i, (w, c) in enumerate(items)}
    return vocab, np.array([c for _, c in items], dtype=np.int64)


def _pairs(ids: list[int], window: int):
    for center in range(len(ids)):
        lo = max(0, center - window)
        hi = min(len(ids), center + window + 1)
        for ctx in range(lo, hi):
            if ctx != center:
                yield ids[center], ids[ctx]


def train_skipgram(corpus, config: EmbedConfig) -> SubwordEmbeddingModel:
    """Train on an iterable of token sequences.

    Returns the model with per-epoch mean pair losses recorded on
    ``model.epoch_losses``. Deterministic for ``threads == 1``.
    """
    sentences = [list(s) for s in corpus]
    if not any(sentences):
        raise ValueError("empty training corpus")
    vocab, counts = _build_vocab(sentences, config.min_count)
    if not vocab:
        raise ValueError("no vocabulary survives min_count")

    rng = np.random.default_rng(config.seed)
    n_rows = len(vocab) + config.bucket_count
    input_vectors = rng.uniform(-1.0 / config.dim, 1.0 / config.dim,
                                size=(n_rows, config.dim)).astype(np.float32)
    output_vectors = np.zeros((len(vocab), config.dim), dtype=np.float32)
    model = SubwordEmbeddingModel(config, vocab, counts, input_vectors, output_vectors)

    sentence_ids = [[vocab[t] for t in s if t in vocab] for s in sentences]
    sentence_ids = [ids for ids in sentence_ids if len(ids) > 1]
    epoch_pairs = [list(_pairs(ids, config.window)) for ids in sentence_ids]
    flat_pairs = [p for pairs in epoch_pairs for p in pairs]
    if not flat_pairs:
        raise ValueError("corpus yields no training pairs")

    noise = counts.astype(np.float64) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    word_rows = [model.composing_rows(w) for w in model.words]
    total_updates = config.epochs * len(flat_pairs)
    lr0 = config.learning_rate

    state = {"processed": 0}
    losses_per_epoch = []
    lock = threading.Lock() if config.threads > 1 else None

    def run_pairs(pairs, negatives, loss_acc):
        for (center, ctx), negs in zip(pairs, negatives):
            if lock is None:
                processed = state["processed"]
                state["processed"] = processed + 1
            else:
                with lock:
                    processed = state["processed"]
                    state["processed"] = processed + 1
            lr = lr0 * max(1.0 - processed / total_updates, 1e-4)
            rows = word_rows[center]
            out_ids = np.empty(1 + config.negatives, dtype=np.int64)
            out_ids[0] = ctx
            out_ids[1:] = negs
            loss, grad_center, grad_output = pair_loss_and_grad(
                input_vectors[rows], output_vectors[out_ids]
            )
            np.add.at(input_vectors, rows, (-lr * grad_center).astype(np.float32))
            np.add.at(output_vectors, out_ids, (-lr * grad_output).astype(np.float32))
            loss_acc.append(loss)

    for _ in range(config.epochs):
        draws = rng.random((len(flat_pairs), config.negatives))
        negatives = np.searchsorted(noise_cdf, draws)
        losses: list[float] = []
        if config.threads <= 1:
            run_pairs(flat_pairs, negatives, losses)
        else:
            shards = np.array_split(np.arange(len(flat_pairs)), config.threads)
            workers = []
            for shard in shards:
                pairs = [flat_pairs[i] for i in shard]
                worker = threading.Thread(
                    target=run_pairs, args=(pairs, negatives[shard], losses)
                )
                workers.append(worker)
                worker.start()
            for worker in workers:
                worker.join()
        losses_per_epoch.append(float(np.mean(losses)))

    model.epoch_losses = losses_per_epoch
    return model


def save_text_vectors(model: SubwordEmbeddingModel, path) -> None:
    """Write composed word vectors in the text format (6 significant digits)."""
    from .chatlog import atomic_write

    with atomic_write(path) as handle:
        handle.write(f"{len(model.words)} {model.dim}\n")
        for word in model.words:
            vec = model.embed_word(word)
            handle.write(word + " " + " ".join(f"{x:.6g}" for x in vec) + "\n")


def load_text_vectors(path) -> dict:
    """Read a text vector file into a word -> vector mapping."""
    vectors = {}
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        count, dim = int(header[0]), int(header[1])
        for line in handle:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ValueError(f"bad vector line for {parts[0]!r}")
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
    if len(vectors) != count:
        raise ValueError(f"expected {count} vectors, found {len(vectors)}")
    return vectors


def save_binary(model: SubwordEmbeddingModel, path) -> None:
    from .chatlog import atomic_write

    header = {
        "config": {
            "dim": model.config.dim,
            "nmin": model.config.nmin,
            "nmax": model.config.nmax,
            "epochs": model.config.epochs,
            "window": model.config.window,
            "negatives": model.config.negatives,
            "learning_rate": model.config.learning_rate,
            "min_count": model.config.min_count,
            "seed": model.config.seed,
            "bucket_count": model.config.bucket_count,
            "threads": model.config.threads,
        },
        "words": model.words,
        "counts": model.counts.tolist(),
    }
    blob = json.dumps(header).encode("utf-8")
    with atomic_write(path, "wb") as handle:
        handle.write(_MAGIC)
        handle.write(struct.pack("<I", len(blob)))
        handle.write(blob)
        handle.write(np.ascontiguousarray(model.input_vectors, dtype="<f4").tobytes())
        handle.write(np.ascontiguousarray(model.output_vectors, dtype="<f4").tobytes())


def load_binary(path) -> SubwordEmbeddingModel:
    with open(path, "rb") as handle:
        magic = handle.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a subword embedding model: {path}")
        (header_len,) = struct.unpack("<I", handle.read(4))
        header = json.loads(handle.read(header_len).decode("utf-8"))
        config = EmbedConfig(**header["config"])
        words = header["words"]
        vocab = {w: i for i, w in enumerate(words)}
        counts = np.array(header["counts"], dtype=np.int64)
        n_rows = len(words) + config.bucket_count
        input_raw = handle.read(n_rows * config.dim * 4)
        input_vectors = np.frombuffer(input_raw, dtype="<f4").reshape(n_rows, config.dim).copy()
        output_raw = handle.read(len(words) * config.dim * 4)
        output_vectors = np.frombuffer(output_raw, dtype="<f4").reshape(len(words), config.dim).copy()
    return SubwordEmbeddingModel(config, vocab, counts, input_vectors, output_vectors)
