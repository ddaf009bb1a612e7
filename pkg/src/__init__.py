"""Droplet BO - closed-loop Bayesian optimization of droplet generation."""

__version__ = "1.0.0"
__author__ = "Droplet BO Team"
__description__ = "Bayesian optimization of droplet devices scored by computer vision"
