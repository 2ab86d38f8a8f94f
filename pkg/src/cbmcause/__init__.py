"""Causal discovery and interpretable production models for well data.

Submodules
----------
dataset       tabular data with variable roles
graph         mixed graphs (DAG / MAG / PAG), d-separation, edge-list format
citest        Fisher z conditional-independence tests
iicd          iterative PAG discovery
regress       linear, random-forest, MLP and linear SVR regressors
causal2stage  two-stage treatment/confounder model
shapx         Shapley attributions and trend labels
physics       fracturing formulas and structural causal model presets
evaluate      metrics, graph scores, comparison protocol
cli           command line and pipeline
"""

__version__ = "0.1.0"
