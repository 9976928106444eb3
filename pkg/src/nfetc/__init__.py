"""Fine-grained entity type classification with noise-tolerant training.

A from-scratch implementation: reverse-mode autodiff core, BiLSTM-attention
mention/context encoder, hierarchy-aware losses, and a training CLI.
"""

__version__ = "0.1.0"
