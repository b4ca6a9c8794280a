"""Command-line entry point wiring the pipeline end to end.

Each stage reads and writes the documented line-delimited files, so stages
can be run one at a time or chained with ``pipeline``. All outputs are
written atomically; a failed stage exits nonzero naming the stage.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import annotation as annotation_mod
from . import dkg as dkg_mod
from . import embeddings as emb_mod
from . import ffb as ffb_mod
from .chatlog import IngestConfig, atomic_write, load_chat_log, read_labels, write_labels
from .disentangle import disentangle, read_conversations, write_conversations
from .ensemble import EnsembleConfig, ensemble_predict, evaluate_artefacts, kmeans_baseline
from .lexicon import load_lexicon
from .shallowparse import tokenize
from .tree import build_tree, write_tree

_DATA = Path(__file__).parent / "data"

HOUR_MS = 60 * 60 * 1000


def _fail(stage: str, message: str):
    click.echo(f"error in stage {stage}: {message}", err=True)
    sys.exit(1)


def _require(stage: str, *paths) -> None:
    for path in paths:
        if path is not None and not Path(path).exists():
            _fail(stage, f"missing path: {path}")


def _dkg_config(action, symptom, question, query_corpus, alpha=1.0):
    return dkg_mod.DkgConfig(
        action_lexicon=load_lexicon(action or _DATA / "action_verbs.txt", "action_verb"),
        symptom_lexicon=load_lexicon(symptom or _DATA / "symptom_terms.txt", "symptom_term"),
        question_lexicon=load_lexicon(question or _DATA / "question_words.txt", "question_word"),
        nb_model=dkg_mod.train_query_nb(
            dkg_mod.load_query_corpus(query_corpus or _DATA / "query_corpus.jsonl"), alpha
        ),
    )


def _lexicon_options(command):
    for option in (
        click.option("--action-lexicon", type=click.Path(), default=None,
                     help="Action-verb lexicon (default: bundled starter)."),
        click.option("--symptom-lexicon", type=click.Path(), default=None,
                     help="Symptom-term lexicon (default: bundled starter)."),
        click.option("--question-lexicon", type=click.Path(), default=None,
                     help="Question-word lexicon (default: bundled starter)."),
        click.option("--query-corpus", type=click.Path(), default=None,
                     help="Query/non-query training corpus (default: bundled)."),
    ):
        command = option(command)
    return command


@click.group()
def main():
    """Issue-conversation labelling and triaging toolkit."""


@main.command("disentangle")
@click.option("--log", "log_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--window-hours", default=2.0, show_default=True)
@click.option("--max-per-side", default=50, show_default=True)
@click.option("--min-gap-hours", default=0.0, show_default=True)
@click.option("--allow-empty-text", is_flag=True, default=False)
def disentangle_cmd(log_path, out_path, window_hours, max_per_side, min_gap_hours,
                    allow_empty_text):
    """Split a chat log into conversations."""
    _require("disentangle", log_path)
    try:
        messages = load_chat_log(log_path, IngestConfig(allow_empty_text=allow_empty_text))
        conversations = disentangle(
            messages,
            window_ms=int(window_hours * HOUR_MS),
            max_per_side=max_per_side,
            min_gap_ms=int(min_gap_hours * HOUR_MS),
        )
    except ValueError as exc:
        _fail("disentangle", str(exc))
    write_conversations(out_path, conversations)
    click.echo(f"wrote {len(conversations)} conversations to {out_path}")


@main.command("dkg-label")
@click.option("--conversations", "conv_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--phrases-out", type=click.Path(), default=None,
              help="Also write extracted phrases per utterance.")
@_lexicon_options
def dkg_label_cmd(conv_path, out_path, phrases_out, action_lexicon, symptom_lexicon,
                  question_lexicon, query_corpus):
    """Label conversations with the unsupervised detectors."""
    _require("dkg-label", conv_path, action_lexicon, symptom_lexicon,
             question_lexicon, query_corpus)
    try:
        config = _dkg_config(action_lexicon, symptom_lexicon, question_lexicon, query_corpus)
    except ValueError as exc:
        _fail("dkg-label", str(exc))
    labelled = []
    phrases = []
    for conversation in read_conversations(conv_path):
        for utterance in conversation.utterances:
            evidence = dkg_mod.analyze(utterance.text, config)
            labelled.append((utterance, dkg_mod.label_evidence(evidence)))
            phrases.append(
                {"utterance_id": utterance.utterance_id,
                 "phrase": dkg_mod.evidence_phrase(evidence, utterance.text)}
            )
    write_labels(out_path, labelled)
    if phrases_out:
        with atomic_write(phrases_out) as handle:
            for row in phrases:
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    click.echo(f"labelled {len(labelled)} utterances to {out_path}")


def _read_corpus_sentences(path, corpus_format):
    if corpus_format == "chatlog":
        return [[t.lower for t in tokenize(m.text)] for m in load_chat_log(path)]
    if corpus_format == "conversations":
        return [
            [t.lower for t in tokenize(u.text)]
            for c in read_conversations(path)
            for u in c.utterances
        ]
    with open(path, encoding="utf-8") as handle:
        return [[t.lower for t in tokenize(line)] for line in handle if line.strip()]


def _embed_config(profile, dim, epochs, seed):
    config = emb_mod.PROFILES[profile]
    overrides = {"seed": seed}
    if dim is not None:
        overrides["dim"] = dim
    if epochs is not None:
        overrides["epochs"] = epochs
    from dataclasses import replace

    return replace(config, **overrides)


@main.command("train-embeddings")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--format", "corpus_format",
              type=click.Choice(["text", "chatlog", "conversations"]), default="text",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--profile", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.option("--dim", type=int, default=None, help="Override profile dimension.")
@click.option("--epochs", type=int, default=None, help="Override profile epochs.")
@click.option("--seed", default=42, show_default=True)
def train_embeddings_cmd(corpus_path, corpus_format, out_path, profile, dim, epochs, seed):
    """Train subword skip-gram embeddings."""
    _require("train-embeddings", corpus_path)
    sentences = _read_corpus_sentences(corpus_path, corpus_format)
    try:
        model = emb_mod.train_skipgram(sentences, _embed_config(profile, dim, epochs, seed))
    except ValueError as exc:
        _fail("train-embeddings", str(exc))
    emb_mod.save_binary(model, out_path)
    click.echo(f"trained {len(model.words)} word vectors (dim {model.dim}) to {out_path}")


def _labelled_examples(conv_path, labels_path):
    texts = {}
    for conversation in read_conversations(conv_path):
        for utterance in conversation.utterances:
            texts[utterance.utterance_id] = utterance.text
    examples = []
    for _, utterance_id, prediction in read_labels(labels_path):
        if utterance_id not in texts:
            raise ValueError(f"label for unknown utterance {utterance_id!r}")
        tokens = [t.lower for t in tokenize(texts[utterance_id])]
        examples.append((tokens, prediction.label))
    return examples


@main.command("train-ffb")
@click.option("--conversations", "conv_path", required=True, type=click.Path())
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("--embeddings", "emb_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--epochs", default=50, show_default=True)
@click.option("--seed", default=42, show_default=True)
def train_ffb_cmd(conv_path, labels_path, emb_path, out_path, epochs, seed):
    """Train the fusion classifier on labelled utterances."""
    _require("train-ffb", conv_path, labels_path, emb_path)
    subword = emb_mod.load_binary(emb_path)
    try:
        examples = _labelled_examples(conv_path, labels_path)
        model = ffb_mod.train_ffb(
            examples, subword, ffb_mod.FFBConfig(epochs=epochs, seed=seed)
        )
    except ValueError as exc:
        _fail("train-ffb", str(exc))
    ffb_mod.save_ffb(model, out_path)
    click.echo(f"trained fusion classifier on {len(examples)} examples to {out_path}")


@main.command("predict")
@click.option("--conversations", "conv_path", required=True, type=click.Path())
@click.option("--ffb", "ffb_path", required=True, type=click.Path())
@click.option("--embeddings", "emb_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
def predict_cmd(conv_path, ffb_path, emb_path, out_path):
    """Label conversations with a trained fusion classifier."""
    _require("predict", conv_path, ffb_path, emb_path)
    subword = emb_mod.load_binary(emb_path)
    model = ffb_mod.load_ffb(ffb_path, subword)
    labelled = []
    for conversation in read_conversations(conv_path):
        for utterance in conversation.utterances:
            tokens = [t.lower for t in tokenize(utterance.text)]
            labelled.append((utterance, ffb_mod.predict_ffb(model, tokens)))
    write_labels(out_path, labelled)
    click.echo(f"predicted {len(labelled)} utterances to {out_path}")


@main.command("ensemble")
@click.option("--sup", "sup_path", required=True, type=click.Path(),
              help="Supervised (ffb) label file.")
@click.option("--unsup", "unsup_path", required=True, type=click.Path(),
              help="Unsupervised (dkg) label file.")
@click.option("--conversations", "conv_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--delta", default=0.9, show_default=True)
def ensemble_cmd(sup_path, unsup_path, conv_path, out_path, delta):
    """Combine supervised and unsupervised labels by confidence threshold.

    The output file preserves the winning side's record verbatim, so at
    delta=1 it is byte-identical to the unsupervised input.
    """
    _require("ensemble", sup_path, unsup_path, conv_path)
    sup = {uid: p for _, uid, p in read_labels(sup_path)}
    unsup = {uid: p for _, uid, p in read_labels(unsup_path)}
    if set(sup) != set(unsup):
        _fail("ensemble", "supervised and unsupervised files cover different utterances")
    config = EnsembleConfig(delta=delta)
    labelled = []
    for conversation in read_conversations(conv_path):
        for utterance in conversation.utterances:
            uid = utterance.utterance_id
            if uid not in sup:
                _fail("ensemble", f"no labels for utterance {uid!r}")
            ensemble_predict(sup[uid], unsup[uid], config)  # validates sources
            winner = sup[uid] if sup[uid].confidence > config.delta else unsup[uid]
            labelled.append((utterance, winner))
    write_labels(out_path, labelled)
    click.echo(f"ensembled {len(labelled)} utterances to {out_path}")


@main.command("tree")
@click.option("--conversations", "conv_path", required=True, type=click.Path())
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("--phrases", "phrases_path", type=click.Path(), default=None)
@click.option("--out-dir", "out_dir", required=True, type=click.Path())
def tree_cmd(conv_path, labels_path, phrases_path, out_dir):
    """Build one triaging-tree document per conversation."""
    _require("tree", conv_path, labels_path, phrases_path)
    labels = {uid: p for _, uid, p in read_labels(labels_path)}
    phrases = {}
    if phrases_path:
        with open(phrases_path, encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    obj = json.loads(line)
                    phrases[obj["utterance_id"]] = obj["phrase"]
    count = 0
    for conversation in read_conversations(conv_path):
        try:
            per_utterance = [labels[u.utterance_id] for u in conversation.utterances]
        except KeyError as exc:
            _fail("tree", f"no label for utterance {exc}")
        phrase_list = [phrases.get(u.utterance_id) for u in conversation.utterances]
        tree = build_tree(conversation, per_utterance, phrase_list)
        write_tree(out_dir, tree)
        count += 1
    click.echo(f"wrote {count} tree documents to {out_dir}")


@main.command("evaluate")
@click.option("--pred", "pred_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--report-out", type=click.Path(), default=None)
def evaluate_cmd(pred_path, gold_path, report_out):
    """Per-class precision/recall/F1 of predicted labels against gold."""
    _require("evaluate", pred_path, gold_path)
    predicted = {uid: p.label for _, uid, p in read_labels(pred_path)}
    gold = {uid: p.label for _, uid, p in read_labels(gold_path)}
    if set(predicted) != set(gold):
        _fail("evaluate", "prediction and gold files cover different utterances")
    order = sorted(gold)
    report = evaluate_artefacts([predicted[u] for u in order], [gold[u] for u in order])
    click.echo(report.as_table())
    click.echo(json.dumps(report.as_record()))
    if report_out:
        with atomic_write(report_out) as handle:
            handle.write(report.as_table() + "\n")
            handle.write(json.dumps(report.as_record()) + "\n")


@main.command("baseline-kmeans")
@click.option("--conversations", "conv_path", required=True, type=click.Path())
@click.option("--gold", "gold_path", required=True, type=click.Path())
@click.option("--k", default=4, show_default=True)
@click.option("--seed", default=42, show_default=True)
def baseline_kmeans_cmd(conv_path, gold_path, k, seed):
    """TF-IDF + k-means clustering baseline with majority-vote labels."""
    _require("baseline-kmeans", conv_path, gold_path)
    gold = {uid: p.label for _, uid, p in read_labels(gold_path)}
    token_lists = []
    gold_list = []
    for conversation in read_conversations(conv_path):
        for utterance in conversation.utterances:
            if utterance.utterance_id not in gold:
                _fail("baseline-kmeans", f"no gold label for {utterance.utterance_id!r}")
            token_lists.append([t.lower for t in tokenize(utterance.text)])
            gold_list.append(gold[utterance.utterance_id])
    try:
        _, report = kmeans_baseline(token_lists, gold_list, k=k, seed=seed)
    except ValueError as exc:
        _fail("baseline-kmeans", str(exc))
    click.echo(report.as_table())
    click.echo(json.dumps(report.as_record()))


@main.command("serve")
@click.option("--store", "store_dir", type=click.Path(), default=None,
              help="Store directory (default: TRIAGE_STORE_DIR).")
@click.option("--port", default=8080, show_default=True)
@click.option("--conversations", "conv_path", type=click.Path(), default=None,
              help="Seed the store from a conversations file.")
@click.option("--labels", "labels_path", type=click.Path(), default=None,
              help="Machine pre-labels for seeding (with --conversations).")
def serve_cmd(store_dir, port, conv_path, labels_path):
    """Run the annotation review HTTP API."""
    from .server import make_server

    _require("serve", conv_path, labels_path)
    try:
        if conv_path and labels_path:
            seed_store(store_dir, conv_path, labels_path)
        server = make_server(store_dir, port)
    except ValueError as exc:
        _fail("serve", str(exc))
    click.echo(f"serving annotation API on port {server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def seed_store(store_dir, conv_path, labels_path) -> annotation_mod.AnnotationStore:
    from .server import _store_dir

    store = annotation_mod.AnnotationStore.open(_store_dir(store_dir))
    labels = {uid: p for _, uid, p in read_labels(labels_path)}
    rows = []
    for conversation in read_conversations(conv_path):
        for utterance in conversation.utterances:
            if utterance.utterance_id not in labels:
                raise ValueError(f"no pre-label for utterance {utterance.utterance_id!r}")
            rows.append((utterance, labels[utterance.utterance_id]))
    store.seed(rows)
    return store


@main.command("pipeline")
@click.option("--log", "log_path", required=True, type=click.Path())
@click.option("--workdir", required=True, type=click.Path())
@click.option("--delta", default=0.9, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--profile", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True)
@click.option("--with-ffb", is_flag=True, default=False,
              help="Train and apply the fusion classifier (uses DKG labels as training data).")
@click.option("--window-hours", default=2.0, show_default=True)
@click.option("--max-per-side", default=50, show_default=True)
@click.option("--min-gap-hours", default=0.0, show_default=True)
@_lexicon_options
def pipeline_cmd(log_path, workdir, delta, seed, profile, with_ffb, window_hours,
                 max_per_side, min_gap_hours, action_lexicon, symptom_lexicon,
                 question_lexicon, query_corpus):
    """Run disentangle, labelling, optional fusion training, and trees."""
    _require("pipeline", log_path, action_lexicon, symptom_lexicon, question_lexicon,
             query_corpus)
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    conv_path = workdir / "conversations.jsonl"
    dkg_path = workdir / "dkg_labels.jsonl"
    phrases_path = workdir / "phrases.jsonl"
    final_path = workdir / "labels.jsonl"
    trees_dir = workdir / "trees"

    stage = "disentangle"
    try:
        messages = load_chat_log(log_path)
        conversations = disentangle(
            messages,
            window_ms=int(window_hours * HOUR_MS),
            max_per_side=max_per_side,
            min_gap_ms=int(min_gap_hours * HOUR_MS),
        )
        write_conversations(conv_path, conversations)

        stage = "dkg-label"
        config = _dkg_config(action_lexicon, symptom_lexicon, question_lexicon, query_corpus)
        labelled = []
        phrase_rows = []
        for conversation in conversations:
            for utterance in conversation.utterances:
                evidence = dkg_mod.analyze(utterance.text, config)
                labelled.append((utterance, dkg_mod.label_evidence(evidence)))
                phrase_rows.append(
                    {"utterance_id": utterance.utterance_id,
                     "phrase": dkg_mod.evidence_phrase(evidence, utterance.text)}
                )
        write_labels(dkg_path, labelled)
        with atomic_write(phrases_path) as handle:
            for row in phrase_rows:
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")

        final_labels = {u.utterance_id: p for u, p in labelled}
        if with_ffb:
            stage = "train-embeddings"
            sentences = [
                [t.lower for t in tokenize(u.text)]
                for c in conversations for u in c.utterances
            ]
            subword = emb_mod.train_skipgram(sentences, _embed_config(profile, None, None, seed))
            emb_mod.save_binary(subword, workdir / "embeddings.bin")

            stage = "train-ffb"
            examples = [
                ([t.lower for t in tokenize(u.text)], p.label) for u, p in labelled
            ]
            model = ffb_mod.train_ffb(examples, subword, ffb_mod.FFBConfig(seed=seed))
            ffb_mod.save_ffb(model, workdir / "ffb.bin")

            stage = "ensemble"
            config_e = EnsembleConfig(delta=delta)
            merged = []
            for (utterance, unsup_pred), (tokens, _) in zip(labelled, examples):
                sup_pred = ffb_mod.predict_ffb(model, tokens)
                winner = sup_pred if sup_pred.confidence > config_e.delta else unsup_pred
                merged.append((utterance, winner))
            write_labels(final_path, merged)
            final_labels = {u.utterance_id: p for u, p in merged}
        else:
            write_labels(final_path, labelled)

        stage = "tree"
        phrase_map = {row["utterance_id"]: row["phrase"] for row in phrase_rows}
        for conversation in conversations:
            tree = build_tree(
                conversation,
                [final_labels[u.utterance_id] for u in conversation.utterances],
                [phrase_map.get(u.utterance_id) for u in conversation.utterances],
            )
            write_tree(trees_dir, tree)
    except ValueError as exc:
        _fail(stage, str(exc))
    click.echo(f"pipeline complete: {len(conversations)} conversations in {workdir}")


if __name__ == "__main__":
    main()
