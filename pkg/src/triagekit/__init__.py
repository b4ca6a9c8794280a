"""triagekit: labelled issue conversations and triaging trees from chat logs."""

from .model import ArtefactLabel, CLASS_ORDER, Message, Prediction, Utterance

__version__ = "0.1.0"

__all__ = [
    "ArtefactLabel",
    "CLASS_ORDER",
    "Message",
    "Prediction",
    "Utterance",
    "__version__",
]
