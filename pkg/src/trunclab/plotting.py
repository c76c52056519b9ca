"""Self-contained SVG convergence plots, no plotting dependency.

One figure: estimated error versus truncation dimension on log-log axes,
one polyline per error table, each with a dashed reference line of the
theoretical slope anchored at its last measured point.
"""

import math
import xml.etree.ElementTree as ET

from .theory import ErrorTable, expected_rate

WIDTH = 640
HEIGHT = 460
MARGIN = {"left": 72, "right": 24, "top": 34, "bottom": 52}

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _positive_rows(table: ErrorTable):
    return [(s, e) for s, e in table.rows if e > 0.0]


def _series_label(table: ErrorTable, index: int) -> str:
    meta = table.metadata
    if "theta" in meta:
        label = f"theta={meta['theta']}"
        if "quantity" in meta and meta["quantity"] != "full_solution":
            label += f" ({meta['quantity']})"
        return label
    return f"series {index + 1}"


def _reference_slope(table: ErrorTable, rows) -> float:
    if "theta" in table.metadata:
        return expected_rate(float(table.metadata["theta"]))
    (s0, e0), (s1, e1) = rows[-2], rows[-1]
    return (math.log(e1) - math.log(e0)) / (math.log(s1) - math.log(s0))


def render_convergence_svg(tables, out_path, title: str = "Truncation error vs dimension"):
    """Render error tables into one log-log SVG figure at out_path.

    Every table must contain at least one positive-error row (zero rows are
    legal in tables but cannot appear on a log axis, so they are skipped);
    a table with none is rejected.  Reference slopes come from the table's
    theta metadata when present, otherwise from its last two points.
    """
    tables = list(tables)
    if not tables:
        raise ValueError("no tables to plot")
    series = []
    for idx, table in enumerate(tables):
        rows = _positive_rows(table)
        if not rows:
            raise ValueError(f"table {idx} has no positive errors, nothing to plot")
        series.append((table, rows))

    xs = [math.log2(s) for _, rows in series for s, _ in rows]
    ys = [math.log10(e) for _, rows in series for _, e in rows]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    if xmax - xmin < 1e-9:
        xmin, xmax = xmin - 0.5, xmax + 0.5
    if ymax - ymin < 1e-9:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    ymin -= 0.05 * (ymax - ymin)
    ymax += 0.05 * (ymax - ymin)

    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(log2s: float) -> float:
        return MARGIN["left"] + (log2s - xmin) / (xmax - xmin) * plot_w

    def py(log10e: float) -> float:
        return MARGIN["top"] + (ymax - log10e) / (ymax - ymin) * plot_h

    def fmt(value: float) -> str:
        return f"{value:.2f}"

    root = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "width": str(WIDTH),
            "height": str(HEIGHT),
            "viewBox": f"0 0 {WIDTH} {HEIGHT}",
        },
    )
    ET.SubElement(root, "rect", {"width": str(WIDTH), "height": str(HEIGHT), "fill": "white"})
    style = ET.SubElement(root, "style")
    style.text = (
        "text { font-family: sans-serif; font-size: 12px; fill: #222; }"
        " .title { font-size: 14px; }"
        " .data { fill: none; stroke-width: 1.6; }"
        " .ref { fill: none; stroke-width: 1.2; }"
        " .grid { stroke: #ddd; stroke-width: 1; }"
        " .frame { fill: none; stroke: #222; stroke-width: 1; }"
    )

    title_el = ET.SubElement(
        root,
        "text",
        {"x": str(WIDTH / 2), "y": "20", "text-anchor": "middle", "class": "title"},
    )
    title_el.text = title

    # gridlines and ticks: powers of two on x, powers of ten on y
    for k in range(math.ceil(xmin - 1e-9), math.floor(xmax + 1e-9) + 1):
        x = px(float(k))
        ET.SubElement(
            root,
            "line",
            {
                "x1": fmt(x),
                "y1": fmt(MARGIN["top"]),
                "x2": fmt(x),
                "y2": fmt(MARGIN["top"] + plot_h),
                "class": "grid",
            },
        )
        label = ET.SubElement(
            root,
            "text",
            {
                "x": fmt(x),
                "y": fmt(MARGIN["top"] + plot_h + 16),
                "text-anchor": "middle",
            },
        )
        label.text = str(2 ** k) if k >= 0 else f"2^{k}"
    for k in range(math.ceil(ymin - 1e-9), math.floor(ymax + 1e-9) + 1):
        y = py(float(k))
        ET.SubElement(
            root,
            "line",
            {
                "x1": fmt(MARGIN["left"]),
                "y1": fmt(y),
                "x2": fmt(MARGIN["left"] + plot_w),
                "y2": fmt(y),
                "class": "grid",
            },
        )
        label = ET.SubElement(
            root,
            "text",
            {"x": fmt(MARGIN["left"] - 6), "y": fmt(y + 4), "text-anchor": "end"},
        )
        label.text = f"1e{k}"

    ET.SubElement(
        root,
        "rect",
        {
            "x": fmt(MARGIN["left"]),
            "y": fmt(MARGIN["top"]),
            "width": fmt(plot_w),
            "height": fmt(plot_h),
            "class": "frame",
        },
    )
    xlabel = ET.SubElement(
        root,
        "text",
        {
            "x": fmt(MARGIN["left"] + plot_w / 2),
            "y": fmt(HEIGHT - 14),
            "text-anchor": "middle",
        },
    )
    xlabel.text = "truncation dimension s"
    ylabel = ET.SubElement(
        root,
        "text",
        {
            "x": "18",
            "y": fmt(MARGIN["top"] + plot_h / 2),
            "text-anchor": "middle",
            "transform": f"rotate(-90 18 {fmt(MARGIN['top'] + plot_h / 2)})",
        },
    )
    ylabel.text = "estimated error"

    for idx, (table, rows) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(
            f"{fmt(px(math.log2(s)))},{fmt(py(math.log10(e)))}" for s, e in rows
        )
        ET.SubElement(
            root, "polyline", {"points": points, "class": "data", "stroke": color}
        )
        for s, e in rows:
            ET.SubElement(
                root,
                "circle",
                {
                    "cx": fmt(px(math.log2(s))),
                    "cy": fmt(py(math.log10(e))),
                    "r": "3",
                    "fill": color,
                },
            )
        if len(rows) >= 2:
            slope = _reference_slope(table, rows)
            s_last, e_last = rows[-1]
            s_first = rows[0][0]
            # anchored at the last measured point, extended back to the first s
            ref_pts = []
            for s in (s_first, s_last):
                e_ref = e_last * (s / s_last) ** slope
                ref_pts.append(f"{fmt(px(math.log2(s)))},{fmt(py(math.log10(e_ref)))}")
            ET.SubElement(
                root,
                "polyline",
                {
                    "points": " ".join(ref_pts),
                    "class": "ref",
                    "stroke": color,
                    "stroke-dasharray": "6,4",
                },
            )
        legend_y = MARGIN["top"] + 14 + 16 * idx
        legend_x = MARGIN["left"] + plot_w - 10
        ET.SubElement(
            root,
            "line",
            {
                "x1": fmt(legend_x - 120),
                "y1": fmt(legend_y - 4),
                "x2": fmt(legend_x - 96),
                "y2": fmt(legend_y - 4),
                "stroke": color,
                "stroke-width": "2",
            },
        )
        legend = ET.SubElement(
            root,
            "text",
            {"x": fmt(legend_x - 90), "y": fmt(legend_y), "text-anchor": "start"},
        )
        legend.text = _series_label(table, idx)

    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(out_path, encoding="unicode", xml_declaration=False)
    with open(out_path, "a", encoding="utf-8") as fh:
        fh.write("\n")
    return out_path
