"""Expert-regularized TD3 robot navigation with a fuzzy safety supervisor."""

__version__ = "0.1.0"
