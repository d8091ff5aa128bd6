"""Social explorative attention network: content recommendation that scores
documents with user-conditioned hierarchical attention, picks higher-order
friends by UCB1-guided beam search over the social graph, and evaluates both
consumer satisfaction (AUC/F1) and creator equality (Gini, C&C) on a
day-by-day stream."""

__version__ = "0.1.0"
