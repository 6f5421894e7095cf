"""Learning-bound calculus, kernels, wide nets and synthetic multi-task experiments."""

__version__ = "0.1.0"
