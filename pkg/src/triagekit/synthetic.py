"""Deterministic synthetic corpus of labelled operations-chat utterances.

Sentences are assembled from the starter lexicons with planted artefact
patterns, so detector behaviour on them is known by construction. A small
slice of compound utterances (a symptom statement that also contains an
action verb) reproduces the known failure mode of priority resolution on
multi-artefact utterances; everything else is clean.
"""

from __future__ import annotations

import random

from .model import ArtefactLabel, Utterance

_ACTION_VERBS = [
    "scale", "restart", "reboot", "increase", "rollback", "patch",
    "redeploy", "flush", "resize", "throttle",
]
_ENTITIES = [
    "pods", "nodes", "cache", "gateway", "database", "replicas",
    "ingress", "firewall", "certificates", "volume",
]
_SYMPTOMS = [
    "timeouts", "500x errors", "latency", "outage", "crashloop",
    "packet loss", "degradation", "failures", "slowness", "exceptions",
]
_SERVICES = [
    "checkout", "billing", "search", "auth", "payments",
    "inventory", "notifications", "reporting",
]
_TIMES = ["9am", "noon", "midnight", "4pm", "friday", "yesterday evening"]
_CHITCHAT = [
    "thanks everyone",
    "good morning team",
    "ok sounds fine",
    "nice work all",
    "brb grabbing coffee",
    "agreed",
    "joining the bridge now",
    "hello folks",
    "have a good weekend",
    "that was fun",
]

# No question-word tokens in the first three slots: "please restart ..."
# would legitimately read as a query and resolve to Diagnostic.
_ACTION_TEMPLATES = [
    "we will {verb} the {entity}",
    "i will {verb} the {entity} for {service}",
    "we will {verb} the {entity} shortly",
    "they will {verb} the {entity} tonight",
]
_SYMPTOM_TEMPLATES = [
    "we see {symptom} since {time}",
    "{service} is showing {symptom} again",
    "users report {symptom} in {service}",
    "dashboards show {symptom} since {time}",
    "still seeing {symptom} in {service}",
]
_DIAGNOSTIC_TEMPLATES = [
    "which {entity} are affected ?",
    "could you {verb} the {entity} ?",
    "why are we seeing {symptom} on {service} ?",
    "what is causing the {symptom} ?",
    "can someone {verb} the {entity} ?",
]
# Compound utterances: gold symptom, but the leading action verb wins the
# priority resolution, mirroring real compound-utterance confusion.
_COMPOUND_TEMPLATES = [
    "we will {verb} the {entity} because of the {symptom}",
]

_WEIGHTS = {
    ArtefactLabel.SYMPTOM: 0.25,
    ArtefactLabel.ACTION: 0.22,
    ArtefactLabel.DIAGNOSTIC: 0.23,
    ArtefactLabel.CHITCHAT: 0.30,
}
_COMPOUND_SHARE = 0.04  # of symptom utterances


def _fill(template: str, rng: random.Random) -> str:
    return template.format(
        verb=rng.choice(_ACTION_VERBS),
        entity=rng.choice(_ENTITIES),
        symptom=rng.choice(_SYMPTOMS),
        service=rng.choice(_SERVICES),
        time=rng.choice(_TIMES),
    )


def generate_labelled_utterances(n: int, seed: int = 42,
                                 conversation_id: str = "synthetic") -> list:
    """n (Utterance, gold ArtefactLabel) pairs, deterministic in the seed."""
    rng = random.Random(seed)
    labels = list(_WEIGHTS)
    weights = [_WEIGHTS[l] for l in labels]
    rows = []
    base_ts = 1_700_000_000_000
    for i in range(n):
        gold = rng.choices(labels, weights=weights)[0]
        if gold == ArtefactLabel.SYMPTOM:
            if rng.random() < _COMPOUND_SHARE:
                text = _fill(rng.choice(_COMPOUND_TEMPLATES), rng)
            else:
                text = _fill(rng.choice(_SYMPTOM_TEMPLATES), rng)
        elif gold == ArtefactLabel.ACTION:
            text = _fill(rng.choice(_ACTION_TEMPLATES), rng)
        elif gold == ArtefactLabel.DIAGNOSTIC:
            text = _fill(rng.choice(_DIAGNOSTIC_TEMPLATES), rng)
        else:
            text = rng.choice(_CHITCHAT)
        rows.append(
            (
                Utterance(
                    conversation_id=conversation_id,
                    utterance_id=f"u{i:04d}",
                    ts=base_ts + i * 30_000,
                    user=f"sre{rng.randrange(6)}",
                    text=text,
                ),
                gold,
            )
        )
    return rows
