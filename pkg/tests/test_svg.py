import xml.etree.ElementTree as ET

import numpy as np

from hyperderm.svg import line_chart

NS = {"s": "http://www.w3.org/2000/svg"}


def parse(svg):
    return ET.fromstring(svg)


def test_one_polyline_per_group_and_legend():
    lam = np.arange(450.0, 951.0, 10.0)
    svg = line_chart({"Skin": (lam, 0.5 + 0 * lam), "Lesion & co": (lam, 0.2 + lam / 5000)})
    root = parse(svg)
    lines = root.findall(".//s:polyline", NS)
    assert len(lines) == 2
    assert [p.get("data-group") for p in lines] == ["Skin", "Lesion & co"]
    legend = [t.text for t in root.findall(".//s:g[@class='legend-entry']/s:text", NS)]
    assert legend == ["Skin", "Lesion & co"]
    assert len(lines[0].get("points").split()) == lam.size


def test_x_axis_spans_450_to_950():
    lam = np.arange(450.0, 951.0, 10.0)
    root = parse(line_chart({"a": (lam, lam)}))
    ticks = [t.text for t in root.findall(".//s:g[@class='x-ticks']/s:text", NS)]
    assert ticks[0] == "450" and ticks[-1] == "950"
    xs = [float(p.split(",")[0]) for p in root.find(".//s:polyline", NS).get("points").split()]
    assert min(xs) == 70.0 and max(xs) == 70.0 + 720 - 70 - 200


def test_deterministic_and_flat_series():
    lam = np.arange(450.0, 951.0, 50.0)
    a = line_chart({"flat": (lam, np.ones_like(lam))})
    assert a == line_chart({"flat": (lam, np.ones_like(lam))})
    parse(a)


def test_empty_chart_is_valid():
    root = parse(line_chart({}))
    assert root.findall(".//s:polyline", NS) == []
