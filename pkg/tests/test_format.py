from decimal import Decimal as dec

import numpy as np

from colormapgan.format import format_audit, format_csv, format_percentage, format_table
from colormapgan.rounding import floor_to_uint8, to_places, to_uint8


class TestRounding:
    def test_half_to_even(self):
        assert to_uint8(np.array([0.5, 1.5, 2.5, 253.5])).tolist() == [0, 2, 2, 254]

    def test_clamp(self):
        out = to_uint8(np.array([-3.2, 255.4, 300.0]))
        assert out.dtype == np.uint8
        assert out.tolist() == [0, 255, 255]

    def test_floor_with_guard(self):
        assert floor_to_uint8(np.array([0.9999999, 254.2, -1.0]), guard=1e-6).tolist() == [1, 254, 0]

    def test_to_places(self):
        assert to_places(0.125) == dec("0.12")
        assert to_places(87.3456, 2) == dec("87.35")


class TestFormat:
    def test_percentage(self):
        assert format_percentage(0.8734) == "87.34"
        assert format_percentage(1.0) == "100.00"

    def test_table(self):
        table = format_table(["", "a", "b"], [["row", "1.00", "2.00"]])
        lines = table.splitlines()
        assert lines[0] == "   " + "a".rjust(10) + "b".rjust(10)
        assert lines[1] == "-" * 23
        assert lines[2] == "row" + "1.00".rjust(10) + "2.00".rjust(10)

    def test_csv(self):
        assert format_csv(["x", "y"], [[1, 2], [3, 4]]) == "x,y\n1,2\n3,4\n"

    def test_audit(self):
        assert format_audit("adapt", {"method": "none", "seed": 2}) == "adapt method=none seed=2"
