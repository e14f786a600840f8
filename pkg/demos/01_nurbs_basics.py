"""Evaluating NURBS curves and surfaces.

Builds a rational quarter circle by hand, checks that every evaluated point
sits on the unit circle, then converts a full analytic circle to its NURBS
form and evaluates a bilinear surface patch.
"""

import math

import numpy as np

from hybridcad.nurbs import (KnotVector, NurbsCurve, basis_matrix, curve_derivative,
                             curve_points, surface_point)
from hybridcad.primitives import CircleArc
from hybridcad.shapes import bilinear_patch

# A quadratic rational Bezier arc: the middle weight cos(45 deg) makes it exact.
quarter = NurbsCurve([[1, 0, 0], [1, 1, 0], [0, 1, 0]], [1, math.sqrt(0.5), 1], 2,
                     KnotVector([0, 1], [3, 3]))
pts = curve_points(quarter, np.linspace(0, 1, 9))
print("quarter circle radii:", np.round(np.linalg.norm(pts, axis=1), 15))
print("tangent at u=0.5:", curve_derivative(quarter, 0.5))

# Basis functions of a clamped cubic sum to one everywhere in the domain.
kv = KnotVector([0, 0.3, 0.6, 1], [4, 1, 1, 4])
N = basis_matrix(kv, 3, np.linspace(0, 1, 5))
print("basis rows:\n", np.round(N, 4))
print("row sums:", N.sum(axis=1))

# Analytic primitives convert to NURBS; a full circle uses nine poles.
circle = CircleArc(center=[0, 0, 1], normal=[0, 1, 1], radius=2.0)
nc = circle.to_nurbs()
samples = curve_points(nc, np.linspace(nc.first, nc.last, 1000))
err = np.abs(np.linalg.norm(samples - circle.center, axis=1) - circle.radius).max()
print(f"circle: {len(nc.poles)} poles, max radius error {err:.2e}")

patch = bilinear_patch([0, 0, 0], [2, 0, 0], [0, 1, 0], [2, 1, 1])
print("twisted patch centre:", surface_point(patch, 0.5, 0.5))
