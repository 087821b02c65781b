"""Speech-based depression screening toolkit.

Subpackages cover the full pipeline: WAV I/O, acoustic feature extraction
(178-dim frame features), audio augmentation, psychometric survey scoring,
corpus management with a synthetic-corpus generator, a from-scratch 1D CNN
trainer, and evaluation/report export.  Everything is seeded and
deterministic; the CLI entry point is ``depscreen``.
"""

__version__ = "0.1.0"
