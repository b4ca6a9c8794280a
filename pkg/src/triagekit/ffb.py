"""Supervised fusion classifier.

A contextual encoder turns an utterance into a sentence-level hidden state
(the hidden row of a prepended start marker); that state is concatenated
with the subword sentence embedding and passed through a trained softmax
head. The fusion operator is concatenation, so the two representations may
have different widths.

The encoder is a pluggable contract. The built-in one is a small
transformer: a learned token embedding table over the subword model's
vocabulary, fixed sinusoidal positions, and residual multi-head
self-attention layers, all trained from scratch here with plain mini-batch
SGD. Everything runs in float64 single-threaded, so training is
deterministic under a fixed seed and gradients can be checked directly
against finite differences.

Checkpoint format (version ``TKFFB1``): magic line, 4-byte little-endian
header length, UTF-8 JSON header (architecture, vocabulary, class order,
training metadata), the parameter tensors as raw little-endian float64 in
a fixed order, and a trailing SHA-256 hash of everything before it.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from .model import CLASS_ORDER, Prediction

_MAGIC = b"TKFFB1\n"

UNK, START, END = 0, 1, 2
_SPECIALS = ("<unk>", "<s>", "</s>")


@dataclass(frozen=True)
class FFBConfig:
    d_enc: int = 128
    layers: int = 2
    heads: int = 4
    max_len: int = 128
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.05
    seed: int = 42

    def __post_init__(self):
        if self.d_enc % self.heads != 0:
            raise ValueError("d_enc must be divisible by heads")


def _sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    positions = np.arange(max_len, dtype=np.float64)[:, None]
    half = np.arange(0, dim, 2, dtype=np.float64)
    rates = np.exp(-np.log(10000.0) * half / dim)
    table = np.zeros((max_len, dim), dtype=np.float64)
    table[:, 0::2] = np.sin(positions * rates)
    table[:, 1::2] = np.cos(positions * rates[: table[:, 1::2].shape[1]])
    return table


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


class ContextualEncoder:
    """Contract: ``encode(tokens)`` returns the hidden sequence for the
    marker-wrapped input; row 0 is the sentence-level representation and is
    defined even for empty input. ``width`` is constant per instance."""

    width: int

    def encode(self, tokens) -> np.ndarray:
        raise NotImplementedError


class BuiltinEncoder(ContextualEncoder):
    """Residual multi-head self-attention encoder, trained from scratch."""

    def __init__(self, vocabulary, config: FFBConfig, seed: int | None = None):
        self.config = config
        self.width = config.d_enc
        self.vocab = {w: i + len(_SPECIALS) for i, w in enumerate(vocabulary)}
        rng = np.random.default_rng(config.seed if seed is None else seed)
        n_tokens = len(self.vocab) + len(_SPECIALS)
        d = config.d_enc
        self.embeddings = rng.normal(0.0, 0.02, size=(n_tokens, d))
        self.layer_params = []
        for _ in range(config.layers):
            self.layer_params.append(
                {name: rng.normal(0.0, 0.02, size=(d, d)) for name in ("wq", "wk", "wv", "wo")}
            )
        # +2 marker positions beyond the truncation limit.
        self._positions = _sinusoidal_positions(config.max_len + 2, d)

    def parameters(self) -> dict:
        params = {"embeddings": self.embeddings}
        for i, layer in enumerate(self.layer_params):
            for name, value in layer.items():
                params[f"layer{i}.{name}"] = value
        return params

    def token_ids(self, tokens) -> np.ndarray:
        ids = [START]
        for token in tokens[: self.config.max_len]:
            ids.append(self.vocab.get(token, UNK))
        ids.append(END)
        return np.array(ids, dtype=np.int64)

    def _attention_forward(self, hidden: np.ndarray, layer: dict):
        t, d = hidden.shape
        heads = self.config.heads
        dh = d // heads
        q = (hidden @ layer["wq"]).reshape(t, heads, dh).transpose(1, 0, 2)
        k = (hidden @ layer["wk"]).reshape(t, heads, dh).transpose(1, 0, 2)
        v = (hidden @ layer["wv"]).reshape(t, heads, dh).transpose(1, 0, 2)
        scores = q @ k.transpose(0, 2, 1) / np.sqrt(dh)
        attn = _softmax_rows(scores)
        context = (attn @ v).transpose(1, 0, 2).reshape(t, d)
        out = context @ layer["wo"]
        cache = (hidden, q, k, v, attn, context)
        return hidden + out, cache

    def _attention_backward(self, d_out: np.ndarray, layer: dict, cache):
        hidden, q, k, v, attn, context = cache
        t, d = hidden.shape
        heads = self.config.heads
        dh = d // heads
        grads = {"wo": context.T @ d_out}
        d_context = (d_out @ layer["wo"].T).reshape(t, heads, dh).transpose(1, 0, 2)
        d_attn = d_context @ v.transpose(0, 2, 1)
        d_v = attn.transpose(0, 2, 1) @ d_context
        d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
        d_q = d_scores @ k / np.sqrt(dh)
        d_k = d_scores.transpose(0, 2, 1) @ q / np.sqrt(dh)
        d_q = d_q.transpose(1, 0, 2).reshape(t, d)
        d_k = d_k.transpose(1, 0, 2).reshape(t, d)
        d_v = d_v.transpose(1, 0, 2).reshape(t, d)
        grads["wq"] = hidden.T @ d_q
        grads["wk"] = hidden.T @ d_k
        grads["wv"] = hidden.T @ d_v
        d_hidden = d_out + d_q @ layer["wq"].T + d_k @ layer["wk"].T + d_v @ layer["wv"].T
        return d_hidden, grads

    def forward(self, tokens):
        """Full forward pass; returns (H, cache) for training."""
        ids = self.token_ids(tokens)
        hidden = self.embeddings[ids] + self._positions[: len(ids)]
        caches = []
        for layer in self.layer_params:
            hidden, cache = self._attention_forward(hidden, layer)
            caches.append(cache)
        return hidden, (ids, caches)

    def backward(self, d_hidden: np.ndarray, cache) -> dict:
        ids, caches = cache
        grads = {}
        for i in reversed(range(len(self.layer_params))):
            d_hidden, layer_grads = self._attention_backward(
                d_hidden, self.layer_params[i], caches[i]
            )
            for name, value in layer_grads.items():
                grads[f"layer{i}.{name}"] = value
        d_embeddings = np.zeros_like(self.embeddings)
        np.add.at(d_embeddings, ids, d_hidden)
        grads["embeddings"] = d_embeddings
        return grads

    def encode(self, tokens) -> np.ndarray:
        hidden, _ = self.forward(tokens)
        return hidden

    def attention_maps(self, tokens) -> list:
        """Per-layer attention tensors (heads, T, T); rows sum to 1."""
        ids = self.token_ids(tokens)
        hidden = self.embeddings[ids] + self._positions[: len(ids)]
        maps = []
        for layer in self.layer_params:
            hidden, cache = self._attention_forward(hidden, layer)
            maps.append(cache[4])
        return maps


def encode_utterance(encoder: ContextualEncoder, tokens) -> np.ndarray:
    """Sentence-level hidden state h1 for an utterance, truncated to the
    encoder's maximum length."""
    max_len = getattr(getattr(encoder, "config", None), "max_len", 128)
    hidden = encoder.encode(list(tokens)[:max_len])
    return hidden[0]


class FusionHead:
    """Linear softmax head over the fused representation. Zero-initialized,
    so an untrained model is exactly uniform."""

    def __init__(self, in_width: int, n_classes: int = len(CLASS_ORDER)):
        self.W = np.zeros((n_classes, in_width))
        self.b = np.zeros(n_classes)

    def probabilities(self, fused: np.ndarray) -> np.ndarray:
        return _softmax_rows(self.W @ fused + self.b)


class FFBModel:
    """Encoder + subword model + fusion head, with training metadata."""

    def __init__(self, encoder, subword_model, head: FusionHead, config: FFBConfig,
                 metadata: dict | None = None):
        if head.W.shape[1] != encoder.width + subword_model.dim:
            raise ValueError("fusion head width does not match encoder + embedding dims")
        self.encoder = encoder
        self.subword = subword_model
        self.head = head
        self.config = config
        self.metadata = metadata or {}

    def parameters(self) -> dict:
        params = {"head.W": self.head.W, "head.b": self.head.b}
        if isinstance(self.encoder, BuiltinEncoder):
            for name, value in self.encoder.parameters().items():
                params[f"encoder.{name}"] = value
        return params

    def fuse_and_classify(self, tokens) -> np.ndarray:
        h1 = encode_utterance(self.encoder, tokens)
        e = np.asarray(self.subword.embed_sentence(tokens), dtype=np.float64)
        return self.head.probabilities(np.concatenate([h1, e]))

    def loss_and_grads(self, examples):
        """Mean cross-entropy over (tokens, label) examples plus gradients
        for every trainable parameter."""
        grads = {name: np.zeros_like(value) for name, value in self.parameters().items()}
        total = 0.0
        n = len(examples)
        builtin = isinstance(self.encoder, BuiltinEncoder)
        for tokens, label in examples:
            tokens = list(tokens)[: self.config.max_len]
            if builtin:
                hidden, cache = self.encoder.forward(tokens)
            else:
                hidden, cache = self.encoder.encode(tokens), None
            h1 = hidden[0]
            e = np.asarray(self.subword.embed_sentence(tokens), dtype=np.float64)
            fused = np.concatenate([h1, e])
            probs = self.head.probabilities(fused)
            gold = CLASS_ORDER.index(label)
            total += -np.log(probs[gold])
            d_logits = probs.copy()
            d_logits[gold] -= 1.0
            grads["head.W"] += np.outer(d_logits, fused) / n
            grads["head.b"] += d_logits / n
            if builtin:
                d_fused = self.head.W.T @ d_logits
                d_hidden = np.zeros_like(hidden)
                d_hidden[0] = d_fused[: self.encoder.width]
                for name, value in self.encoder.backward(d_hidden, cache).items():
                    grads[f"encoder.{name}"] += value / n
        return total / n, grads

    def loss(self, examples) -> float:
        total = 0.0
        for tokens, label in examples:
            probs = self.fuse_and_classify(tokens)
            total += -np.log(probs[CLASS_ORDER.index(label)])
        return total / len(examples)


def fuse_and_classify(model: FFBModel, tokens) -> np.ndarray:
    return model.fuse_and_classify(tokens)


def train_ffb(labelled, subword_model, config: FFBConfig | None = None) -> FFBModel:
    """Train encoder and head jointly with mini-batch SGD.

    ``labelled`` holds (tokens, ArtefactLabel) pairs; at least two distinct
    classes are required. Deterministic under a fixed seed.
    """
    config = config or FFBConfig()
    examples = [(list(tokens), label) for tokens, label in labelled]
    if len({label for _, label in examples}) < 2:
        raise ValueError("training data must contain at least two classes")
    encoder = BuiltinEncoder(subword_model.words, config)
    head = FusionHead(config.d_enc + subword_model.dim)
    model = FFBModel(encoder, subword_model, head, config)

    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    final_loss = float("nan")
    for _ in range(config.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[start : start + config.batch_size]]
            loss, grads = model.loss_and_grads(batch)
            epoch_loss += loss * len(batch)
            for name, grad in grads.items():
                params[name] -= config.learning_rate * grad
        final_loss = epoch_loss / len(examples)
    model.metadata = {"epochs": config.epochs, "final_loss": final_loss, "seed": config.seed}
    return model


def predict_ffb(model: FFBModel, tokens) -> Prediction:
    """Argmax class with the label-priority tie-break; confidence is the max
    softmax probability."""
    probs = model.fuse_and_classify(tokens)
    best = max(range(len(CLASS_ORDER)), key=lambda i: (probs[i], CLASS_ORDER[i].priority))
    return Prediction(label=CLASS_ORDER[best], confidence=float(probs[best]), source="ffb")


def training_accuracy(model: FFBModel, labelled) -> float:
    examples = list(labelled)
    hits = sum(1 for tokens, label in examples if predict_ffb(model, tokens).label == label)
    return hits / len(examples)


def save_ffb(model: FFBModel, path) -> None:
    from .chatlog import atomic_write

    if not isinstance(model.encoder, BuiltinEncoder):
        raise ValueError("only models with the builtin encoder can be checkpointed")
    order = sorted(model.parameters())
    header = {
        "config": {
            "d_enc": model.config.d_enc,
            "layers": model.config.layers,
            "heads": model.config.heads,
            "max_len": model.config.max_len,
            "epochs": model.config.epochs,
            "batch_size": model.config.batch_size,
            "learning_rate": model.config.learning_rate,
            "seed": model.config.seed,
        },
        "classes": [label.value for label in CLASS_ORDER],
        "vocabulary": sorted(model.encoder.vocab, key=model.encoder.vocab.get),
        "embedding_dim": model.subword.dim,
        "metadata": model.metadata,
        "tensors": order,
    }
    blob = json.dumps(header).encode("utf-8")
    payload = [_MAGIC, struct.pack("<I", len(blob)), blob]
    params = model.parameters()
    for name in order:
        payload.append(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    body = b"".join(payload)
    digest = hashlib.sha256(body).digest()
    with atomic_write(path, "wb") as handle:
        handle.write(body)
        handle.write(digest)


def load_ffb(path, subword_model) -> FFBModel:
    with open(path, "rb") as handle:
        body = handle.read()
    digest, body = body[-32:], body[:-32]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError(f"checkpoint hash mismatch: {path}")
    if not body.startswith(_MAGIC):
        raise ValueError(f"not an FFB checkpoint: {path}")
    offset = len(_MAGIC)
    (header_len,) = struct.unpack_from("<I", body, offset)
    offset += 4
    header = json.loads(body[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    config = FFBConfig(**header["config"])
    if header["embedding_dim"] != subword_model.dim:
        raise ValueError("subword model dimension does not match checkpoint")
    encoder = BuiltinEncoder(header["vocabulary"], config)
    head = FusionHead(config.d_enc + subword_model.dim)
    model = FFBModel(encoder, subword_model, head, config, metadata=header["metadata"])
    params = model.parameters()
    for name in header["tensors"]:
        target = params[name]
        size = target.size * 8
        flat = np.frombuffer(body[offset : offset + size], dtype="<f8")
        target[...] = flat.reshape(target.shape)
        offset += size
    if offset != len(body):
        raise ValueError("checkpoint has trailing bytes")
    return model
