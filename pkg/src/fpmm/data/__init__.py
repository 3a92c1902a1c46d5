"""Synthetic scenes with ground-truth landmarks, preprocessing and the training dataset."""

from fpmm.data.dataset import ClipDataset, build_synthetic_dataset
from fpmm.data.preprocess import preprocess
from fpmm.data.scene import RenderedScene, random_script, render_scene

__all__ = ["ClipDataset", "RenderedScene", "build_synthetic_dataset", "preprocess", "random_script", "render_scene"]
