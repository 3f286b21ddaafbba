"""
FairForge
=========
Laboratory for node-injection fairness attacks on graph neural networks:
biased synthetic graphs, uncertainty-guided injection, victim retraining,
fairness metrics, defenses and structural audits.
"""

__version__ = "0.1.0"
