"""Regenerate the golden serialization fixtures.

Inputs are written by hand here; expected outputs come from the independent
Decimal-based formatter in ``tests/oracles.py``, never from the package.

    python3 tests/data/make_goldens.py
"""

import json
import math
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402

R2 = math.sqrt(2.0) / 2.0


def patch(p00, p10, p01, p11, **extra):
    face = {"type": "nurbs", "u_degree": 1, "v_degree": 1,
            "u_knots": [0, 1], "u_mults": [2, 2], "v_knots": [0, 1], "v_mults": [2, 2],
            "poles": [[p00, p01], [p10, p11]]}
    face.update(extra)
    return face


def cube():
    c = [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    v = {(x, y, z): c[4 * x + 2 * y + z] for x in (0, 1) for y in (0, 1) for z in (0, 1)}
    faces = [
        patch(v[0, 0, 0], v[0, 1, 0], v[1, 0, 0], v[1, 1, 0]),
        patch(v[0, 0, 1], v[1, 0, 1], v[0, 1, 1], v[1, 1, 1]),
        patch(v[0, 0, 0], v[1, 0, 0], v[0, 0, 1], v[1, 0, 1]),
        patch(v[0, 1, 0], v[0, 1, 1], v[1, 1, 0], v[1, 1, 1]),
        patch(v[0, 0, 0], v[0, 0, 1], v[0, 1, 0], v[0, 1, 1]),
        patch(v[1, 0, 0], v[1, 1, 0], v[1, 0, 1], v[1, 1, 1]),
    ]
    return {"name": "cube", "faces": faces}


CIRCLE_XY = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0)]
CIRCLE_W = [1, R2, 1, R2, 1, R2, 1, R2, 1]


def cylinder():
    poles = [[[x, y, 0.0], [x, y, 2.0]] for x, y in CIRCLE_XY]
    weights = [[w, w] for w in CIRCLE_W]
    lateral = {"type": "nurbs", "u_degree": 2, "v_degree": 1,
               "u_periodic": False, "v_periodic": False,
               "u_knots": [0, 0.25, 0.5, 0.75, 1], "u_mults": [3, 2, 2, 2, 3],
               "v_knots": [0, 1], "v_mults": [2, 2], "poles": poles, "weights": weights}
    cap = {"type": "circle", "center": [0.0, 0.0, 0.0], "normal": [0.0, 0.0, -1.0], "radius": 1.0}
    top = {"type": "circle", "center": [0.0, 0.0, 2.0], "normal": [0.0, 0.0, 1.0], "radius": 1.0}
    return {"name": "cylinder", "faces": [lateral, cap, top]}


def periodic_torus():
    R, r = 1.0, 0.25
    poles, weights = [], []
    for (cu, su), wu in zip(CIRCLE_XY[:-1], CIRCLE_W[:-1]):
        row, wrow = [], []
        for (cv, sv), wv in zip(CIRCLE_XY[:-1], CIRCLE_W[:-1]):
            row.append([(R + r * cv) * cu, (R + r * cv) * su, r * sv])
            wrow.append(wu * wv)
        poles.append(row)
        weights.append(wrow)
    face = {"type": "nurbs", "u_degree": 2, "v_degree": 2, "u_periodic": True, "v_periodic": True,
            "u_knots": [0, 1, 2, 3, 4], "u_mults": [2, 2, 2, 2, 2],
            "v_knots": [0, 1, 2, 3, 4], "v_mults": [2, 2, 2, 2, 2],
            "poles": poles, "weights": weights}
    return {"name": "torus", "faces": [face]}


def line(a, b):
    return {"type": "line", "start": a, "end": b}


SQUARE = [line([0, 0, 0], [1, 0, 0]), line([1, 0, 0], [1, 1, 0]),
          line([1, 1, 0], [0, 1, 0]), line([0, 1, 0], [0, 0, 0])]


def square():
    return {"name": "square", "faces": [{"type": "primitive", "loops": [SQUARE]}]}


def circle_shorthand():
    return {"faces": [{"type": "circle", "center": [1.5, -2, 0.25], "normal": [0, 0, 1],
                       "radius": 0.75, "first": 0, "last": 2 * math.pi}]}


def square_hole():
    hole = {"type": "circle", "center": [0.5, 0.5, 0], "normal": [0, 0, -1], "radius": 0.25}
    return {"name": "plate with hole", "faces": [{"type": "primitive", "loops": [SQUARE, [hole]]}]}


def ellipse_line():
    arc = {"type": "ellipse", "center": [0, 0, 0], "normal": [0, 0, 1],
           "major_radius": 2, "minor_radius": 1, "first": 0, "last": math.pi}
    return {"name": "half ellipse",
            "faces": [{"type": "primitive", "loops": [[arc, line([-2, 0, 0], [2, 0, 0])]]}]}


def bezier_line():
    bez = {"type": "bezier", "degree": 3,
           "poles": [[0, 0, 0], [0.5, 1, 0], [1.5, 1, 0], [2, 0, 0]]}
    return {"name": "arch", "faces": [{"type": "primitive",
                                       "loops": [[bez, line([2, 0, 0], [0, 0, 0])]]}]}


def bspline_loop():
    spline = {"type": "bspline", "degree": 2, "is_periodic": False,
              "knots": [0, 0.5, 1], "mults": [3, 1, 3],
              "poles": [[0, 0, 0], [0.5, 1, 0], [1.5, 1, 0], [2, 0, 0]],
              "weights": [1, 1, 1, 1]}
    return {"name": "bspline", "faces": [{"type": "primitive",
                                          "loops": [[spline, line([2, 0, 0], [0, 0, 0])]]}]}


def rounding_patch():
    face = patch([0.12345678, -0.00000012, 0.0], [1.00000049999, 0.0, 0.3333333333],
                 [-0.0, 0.9999995, 1e-7], [1.23456789, 1.0000005, 2.5e-7],
                 weights=[[1.0, 1.0000004], [0.99999951, 1.0]])
    face["color"] = "red"
    return {"name": "rounding", "faces": [face]}


FIXTURES = {
    "01_cube": cube,
    "02_cylinder": cylinder,
    "03_periodic_torus": periodic_torus,
    "04_square_lines": square,
    "05_circle_shorthand": circle_shorthand,
    "06_square_hole": square_hole,
    "07_ellipse_line": ellipse_line,
    "08_bezier_line": bezier_line,
    "09_bspline_loop": bspline_loop,
    "10_rounding_patch": rounding_patch,
}


def main():
    out = HERE / "golden"
    out.mkdir(exist_ok=True)
    for name, build in FIXTURES.items():
        doc = build()
        (out / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        (out / f"{name}.expected.json").write_bytes(oracles.canonical_text(doc))


if __name__ == "__main__":
    main()
