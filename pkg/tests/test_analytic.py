import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab.analytic import DescriptorError, parse_descriptor, sample_analytic
from fraclab.grid import GridSpec

GRID = GridSpec(2, 8.0, 32)
coord = st.floats(-2, 2, allow_nan=False).map(lambda v: round(v, 6))
width = st.floats(0.1, 1.0).map(lambda v: round(v, 6))
center = st.tuples(coord, coord).map(list)

gauss = st.builds(lambda c, a, amp: f"gaussian({c}, {a}, amp={amp})", center, width, coord)
bump = st.builds(lambda c, r: f"bump({c}, {r + 0.5})", center, width)
shell = st.builds(lambda c, r, w: f"shell({c}, {r + 1.5}, {w})", center, width, width)
leaf = st.one_of(gauss, bump, shell)
desc = st.one_of(leaf, st.builds(lambda a, b: f"sum({a}, {b})", leaf, leaf),
                 st.builds(lambda f, a: f"scale({f}, {a})", coord, leaf))


@settings(max_examples=60, deadline=None)
@given(desc)
def test_descriptor_round_trip(text):
    d = parse_descriptor(text)
    again = parse_descriptor(d.describe())
    assert again == d
    c = GRID.coords()
    assert np.array_equal(again.evaluate(c), d.evaluate(c))


@pytest.mark.parametrize("text", ["gaussian([0.0], -1.0)", "nosuch([0.0], 1.0)", "gaussian(", "1 + 2",
                                  "polygauss([0.0], 1.0, [1.5])"])
def test_bad_descriptors(text):
    with pytest.raises(DescriptorError):
        parse_descriptor(text)


def test_envelope_dominates_samples():
    g = GridSpec(2, 10.0, 64)
    for text in ["gaussian([1.0, -1.0], 0.5)", "polygauss([0.5, 0.0], 0.4, [2, 1])", "shell([0.0, 0.0], 3.0, 0.4)",
                 "bump([1.0, 1.0], 2.0)"]:
        u = sample_analytic(g, text)
        r = g.radius()
        assert np.all(np.abs(u.values) <= u.decay.bound(r) * (1 + 1e-12) + 1e-300), text
