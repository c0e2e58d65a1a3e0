"""
meshseq Commands

This module exports the command functions registered on the main app.
"""

from .data import decode, encode, evaluate, synth
from .experiment import experiment
from .model import complete, generate, train

__all__ = ["complete", "decode", "encode", "evaluate", "experiment", "generate", "synth", "train"]
