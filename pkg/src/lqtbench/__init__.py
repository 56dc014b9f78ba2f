"""Discrete-time linear quadratic tracking: observer-based and fully
data-driven controllers, probing-data generation, value-function learning
and Bayesian weight tuning, with a CLI front end."""

__version__ = "0.1.0"
