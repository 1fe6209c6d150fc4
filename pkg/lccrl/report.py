"""Report

Renders a metrics report as a Markdown table (accuracy followed by the per-label F-measures in label-set order)
and converts it to HTML.
"""
import codecs

import markdown

from lccrl.label_set import SCENE_DESCRIPTIONS
from lccrl.metrics import MetricsReport


def render_markdown(report: MetricsReport, title: str = "Scene labelling results") -> str:
    """
    :param report: The metrics to render
    :param title: Heading placed above the table
    :return: Markdown text
    """
    header = "| Accuracy (%) | " + " | ".join(score.label for score in report.labels) + " | Macro F (%) |"
    rule = "|---:|" + "---:|" * len(report.labels) + "---:|"
    row = "| {0:.1f} | ".format(report.accuracy) + " | ".join(
        "-" if score.absent else "{0:.1f}".format(score.f_measure) for score in report.labels) + \
        " | {0:.1f} |".format(report.macro_f)
    lines = ["## " + title, "", header, rule, row, ""]
    described = [score.label for score in report.labels if score.label in SCENE_DESCRIPTIONS]
    if described:
        lines.append("Scenes: " + ", ".join("{0}: {1}".format(label, SCENE_DESCRIPTIONS[label])
                                            for label in described) + ".")
    return "\n".join(lines) + "\n"


def render_html(report: MetricsReport, title: str = "Scene labelling results") -> str:
    return markdown.markdown(render_markdown(report, title), extensions=['markdown.extensions.tables'])


def write_html(report: MetricsReport, path: str) -> None:
    with codecs.open(path, 'w', 'utf-8') as html_file:
        html_file.write(render_html(report))
