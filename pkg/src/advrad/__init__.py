"""Adversarial Rademacher complexity toolkit: norms, perturbations, estimators and bounds."""
__version__ = "0.1.0"
