"""Cluster-guided diffusion synthesis of minority-class tabular records.

Modules: ``numeric`` (autodiff, Adam, PRNG), ``embedding``, ``denoiser``,
``diffusion``, ``dataset``, ``clustering``, ``baselines`` (SMOTE),
``classifier`` (boosted trees), ``evaluation``, ``pipeline`` and ``cli``.
"""
__version__ = "0.1.0"
