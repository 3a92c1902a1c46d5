"""Video generation and evaluation."""

from fpmm.pipeline.animate import generate_video, run_job
from fpmm.pipeline.evaluate import evaluate, write_metrics_csv

__all__ = ["evaluate", "generate_video", "run_job", "write_metrics_csv"]
