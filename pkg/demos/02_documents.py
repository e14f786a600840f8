"""Reading, validating and canonicalizing solid documents.

A document is JSON with a list of faces.  This script writes a hand-made
document with too many decimals and a flat weight list, shows what the
canonical form changes, then validates a broken variant.
"""

import json

from hybridcad.cad_json import parse_document, roundtrip, serialize_document, validate_document
from hybridcad.shapes import cylinder_document

raw = {
    "name": "bent sheet",
    "faces": [{
        "type": "nurbs", "u_degree": 1, "v_degree": 1,
        "u_knots": [0, 1], "u_mults": [2, 2], "v_knots": [0, 1], "v_mults": [2, 2],
        "poles": [[[0.12345678, 0, 0], [0, 1, -0.0000001]], [[1, 0, 0], [1, 1, 0.25]]],
        "weights": [1, 1, 1, 1],
    }],
}
canonical, changes = roundtrip(json.dumps(raw))
print(canonical.decode())
print("changes:")
for c in changes:
    print("  ", c)

# Canonical text is a fixed point.
assert serialize_document(parse_document(canonical)) == canonical

# Weights compress into (value, count) runs.
text = serialize_document(cylinder_document())
print("cylinder side weights:", json.loads(text)["faces"][0]["weights"])

broken = dict(raw, faces=[dict(raw["faces"][0], weights=[1, 1, 1])])
for v in validate_document(json.dumps(broken)):
    print("violation:", v.to_dict())
