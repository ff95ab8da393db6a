""" Minimal SVG rendering of accuracy curves: main task dotted, backdoor task solid,
    cumulative backdoor mean as a thick overlay."""

from xml.sax.saxutils import escape

__all__ = ["render_curves"]

_WIDTH, _HEIGHT = 640, 400
_LEFT, _RIGHT, _TOP, _BOTTOM = 56, 150, 36, 44

_SERIES = (
    ("main_acc", "main task", "#1f77b4", 'stroke-dasharray="2,3"', 1.5),
    ("backdoor_acc", "backdoor task", "#d62728", "", 1.5),
    ("backdoor_cummean", "backdoor cum. mean", "#2ca02c", "", 3.0),
)


def _fmt(value):
    return "{:.2f}".format(value)


def render_curves(reports, title=""):
    """Render per-round accuracies as an SVG document.

    Parameters
    ----------
    reports : Sequence[fedsim.metrics.RoundReport]
    title : str, optional

    Returns
    -------
    str"""
    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM
    last = max(1, reports[-1].round if reports else 1)

    def x(t):
        return _LEFT + plot_w * t / float(last)

    def y(v):
        return _TOP + plot_h * (1.0 - v)

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" '
        'font-family="sans-serif" font-size="11">'.format(_WIDTH, _HEIGHT),
        '<rect width="100%" height="100%" fill="white"/>',
        '<text x="{}" y="20" font-size="13">{}</text>'.format(_LEFT, escape(title)),
    ]

    # axes and grid
    parts.append(
        '<polyline fill="none" stroke="black" points="{},{} {},{} {},{}"/>'.format(
            _fmt(x(0)), _fmt(y(1)), _fmt(x(0)), _fmt(y(0)), _fmt(x(last)), _fmt(y(0))
        )
    )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            '<line x1="{0}" x2="{1}" y1="{2}" y2="{2}" stroke="#ddd"/>'
            '<text x="{3}" y="{4}" text-anchor="end">{5:.2f}</text>'.format(
                _fmt(x(0)), _fmt(x(last)), _fmt(y(tick)), _LEFT - 6, _fmt(y(tick) + 4), tick
            )
        )
    for k in range(5):
        t = int(round(last * k / 4.0))
        parts.append(
            '<text x="{}" y="{}" text-anchor="middle">{}</text>'.format(
                _fmt(x(t)), _HEIGHT - _BOTTOM + 16, t
            )
        )
    parts.append(
        '<text x="{}" y="{}" text-anchor="middle">round</text>'.format(
            _fmt(_LEFT + plot_w / 2.0), _HEIGHT - 8
        )
    )

    for row, (attr, label, color, dash, width) in enumerate(_SERIES):
        points = " ".join(
            "{},{}".format(_fmt(x(r.round)), _fmt(y(getattr(r, attr)))) for r in reports
        )
        parts.append(
            '<polyline fill="none" stroke="{}" stroke-width="{}" {} points="{}"/>'.format(
                color, width, dash, points
            )
        )
        ly = _TOP + 14 + 18 * row
        lx = _WIDTH - _RIGHT + 12
        parts.append(
            '<line x1="{}" x2="{}" y1="{}" y2="{}" stroke="{}" stroke-width="{}" {}/>'
            '<text x="{}" y="{}">{}</text>'.format(
                lx, lx + 24, ly, ly, color, width, dash, lx + 30, ly + 4, escape(label)
            )
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
