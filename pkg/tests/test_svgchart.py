import xml.etree.ElementTree as ET

import pytest

from udgnn.svgchart import ChartError, line_chart

ROWS = [
    {"variant": "gcn", "depth": "2", "test_acc": "0.9"},
    {"variant": "gcn", "depth": "8", "test_acc": "0.5"},
    {"variant": "drive", "depth": "2", "test_acc": "0.85"},
    {"variant": "drive", "depth": "8", "test_acc": "0.88"},
]


def chart(rows=ROWS, **kw):
    return line_chart(rows, "depth", "test_acc", "variant", **kw)


class TestLineChart:
    def test_valid_xml(self):
        root = ET.fromstring(chart())
        assert root.tag.endswith("svg")

    def test_byte_deterministic(self):
        assert chart() == chart()

    def test_one_polyline_per_group(self):
        svg = chart()
        assert svg.count("<polyline") == 2

    def test_repeats_averaged(self):
        rows = ROWS + [{"variant": "gcn", "depth": "2", "test_acc": "0.7"}]
        svg = line_chart(rows, "depth", "test_acc", "variant")
        # 2 groups x 2 distinct x values: still 4 markers after averaging
        assert svg.count("<circle") == 4

    def test_axis_labels_and_legend(self):
        svg = chart()
        assert ">depth</text>" in svg
        assert ">test_acc</text>" in svg
        assert ">gcn</text>" in svg and ">drive</text>" in svg

    def test_title(self):
        assert ">Depth curves</text>" in chart(title="Depth curves")

    def test_single_point_padding(self):
        svg = line_chart([{"g": "a", "x": "1", "y": "2"}], "x", "y", "g")
        assert "<circle" in svg  # degenerate ranges must not divide by zero

    def test_empty_rows_rejected(self):
        with pytest.raises(ChartError, match="no data"):
            line_chart([], "x", "y", "g")

    def test_missing_column_rejected(self):
        with pytest.raises(ChartError, match="missing column"):
            line_chart(ROWS, "epoch", "test_acc", "variant")

    def test_non_numeric_rejected(self):
        rows = [{"variant": "gcn", "depth": "two", "test_acc": "0.9"}]
        with pytest.raises(ChartError, match="non-numeric"):
            line_chart(rows, "depth", "test_acc", "variant")
