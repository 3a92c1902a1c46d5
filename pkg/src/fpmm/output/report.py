"""Static HTML evaluation report: renders an EvaluationReport next to its difference images."""

from __future__ import annotations

from pathlib import Path

from jinja2 import Environment, FileSystemLoader

from fpmm.schemas.reports import EvaluationReport

_TEMPLATE_DIR = Path(__file__).parent / "templates"


def render_report(report: EvaluationReport, *, title: str = "Motion transfer evaluation") -> str:
    """Render ``report`` to a self-contained HTML page.

    Difference images are referenced by file name, so the page is meant to
    sit in the directory they were written to.
    """
    env = Environment(loader=FileSystemLoader(str(_TEMPLATE_DIR)), autoescape=True)
    template = env.get_template("evaluation.html")
    return template.render(
        title=title,
        generated_at=report.generated_at,
        generated_dir=report.generated_dir,
        reference_dir=report.reference_dir,
        frames=[f.model_dump() for f in report.frames],
        peak_frame=report.peak_frame,
        mean_l1=report.mean_l1,
        mean_psnr=report.mean_psnr,
        difference_images=report.difference_images,
    )


def write_report(report: EvaluationReport, path: str | Path, **kwargs: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report(report, **kwargs), encoding="utf-8")
    return path
