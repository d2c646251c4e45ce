# Structural tuple, induced dynamics, evaluator regimes and memory.
