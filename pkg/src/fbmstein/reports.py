"""CSV and SVG emission. All numeric CSV fields carry 17 significant digits
so byte-identical reruns are meaningful; the SVG is generated directly (no
plotting dependency)."""

from __future__ import annotations

import os

RISK_HEADER = ["estimator", "drift", "d", "H", "T", "n", "n_reps", "seed", "mean", "std_error"]
DOMINANCE_HEADER = RISK_HEADER + [
    "delta_mean",
    "delta_std_error",
    "ci95_upper",
    "stein_form_mean",
    "certified",
]


def format_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_csv(directory, filename, header, rows) -> int:
    """Write a CSV under `directory`; returns the data row count."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, filename), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(header, rows))
    return len(rows)


def risk_row(config, estimate):
    return [
        estimate.estimator_label,
        estimate.drift_label,
        config.d,
        config.hurst,
        config.T,
        config.n,
        estimate.n_reps,
        estimate.seed,
        estimate.mean,
        estimate.std_error,
    ]


def dominance_row(config, report):
    return [
        report.estimator_label,
        report.drift_label,
        config.d,
        config.hurst,
        config.T,
        config.n,
        report.n_reps,
        report.seed,
        report.risk_mean,
        report.risk_std_error,
        report.delta_mean,
        report.delta_std_error,
        report.ci95_upper,
        report.stein_form_mean,
        report.certified_conditions,
    ]


# ---------------------------------------------------------------------------
# dominance SVG: risk difference vs shrinkage constant, CI whiskers, zero line
# ---------------------------------------------------------------------------

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 75, 25, 25, 55


def _ticks(lo, hi, count=5):
    import numpy as np

    return [float(v) for v in np.linspace(lo, hi, count)]


def render_dominance_svg(a_values, delta_means, ci_halfwidths, title="risk difference vs a") -> str:
    if not (len(a_values) == len(delta_means) == len(ci_halfwidths)):
        raise ValueError("mismatched series lengths")
    xs = list(map(float, a_values))
    ys = list(map(float, delta_means))
    hw = list(map(float, ci_halfwidths))
    x_lo, x_hi = min(xs), max(xs)
    pad = 0.1 * (x_hi - x_lo or 1.0)
    x_lo, x_hi = x_lo - pad, x_hi + pad
    y_candidates = [y - h for y, h in zip(ys, hw)] + [y + h for y, h in zip(ys, hw)] + [0.0]
    y_lo, y_hi = min(y_candidates), max(y_candidates)
    ypad = 0.1 * (y_hi - y_lo or 1.0)
    y_lo, y_hi = y_lo - ypad, y_hi + ypad

    def sx(x):
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def sy(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
        # axes
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
    ]
    if y_lo < 0.0 < y_hi:
        zy = sy(0.0)
        out.append(
            f'<line x1="{_ML}" y1="{zy:.2f}" x2="{_W - _MR}" y2="{zy:.2f}" '
            f'stroke="gray" stroke-dasharray="5,4"/>'
        )
    for tv in _ticks(y_lo, y_hi):
        y = sy(tv)
        out.append(f'<line x1="{_ML - 4}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{_ML - 8}" y="{y + 4:.2f}" text-anchor="end" font-size="11">{tv:.4g}</text>'
        )
    for xv in sorted(set(xs)):
        x = sx(xv)
        out.append(
            f'<line x1="{x:.2f}" y1="{_H - _MB}" x2="{x:.2f}" y2="{_H - _MB + 4}" stroke="black"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{_H - _MB + 18}" text-anchor="middle" font-size="11">{xv:.4g}</text>'
        )
    out.append(
        f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 12}" text-anchor="middle" '
        f'font-size="12">shrinkage constant a</text>'
    )
    out.append(
        f'<text x="18" y="{(_MT + _H - _MB) / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {(_MT + _H - _MB) / 2:.1f})">risk difference</text>'
    )
    for xv, yv, h in zip(xs, ys, hw):
        x = sx(xv)
        out.append(
            f'<line x1="{x:.2f}" y1="{sy(yv - h):.2f}" x2="{x:.2f}" y2="{sy(yv + h):.2f}" '
            f'stroke="steelblue" stroke-width="1.5"/>'
        )
        for yy in (yv - h, yv + h):
            out.append(
                f'<line x1="{x - 5:.2f}" y1="{sy(yy):.2f}" x2="{x + 5:.2f}" y2="{sy(yy):.2f}" '
                f'stroke="steelblue" stroke-width="1.5"/>'
            )
        out.append(f'<circle cx="{x:.2f}" cy="{sy(yv):.2f}" r="4" fill="crimson"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(directory, filename, text) -> None:
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, filename), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
