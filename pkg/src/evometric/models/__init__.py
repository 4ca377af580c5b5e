"""Built-in case-study models and the model registry."""

from .registry import build_model, model_ids, model_manifest, model_penalty

__all__ = ["build_model", "model_ids", "model_manifest", "model_penalty"]
