#!/usr/bin/env python3
"""Generate golden brush-rasterization bitmaps for the editor's raster tests.

Independent reference implementation of the documented brush contract:
stroke points snap to integer pixel centers via floor(v + 0.5); each
polyline segment is walked in max(|dx|, |dy|) steps with every interpolated
center re-snapped; a round brush of radius r covers every pixel whose
integer center satisfies (px - cx)^2 + (py - cy)^2 <= r^2.

Regenerate the fixture from frontend/ with:

    python3 tools/make_brush_goldens.py > tests/golden/brush-goldens.json
"""

import json
import math
import sys


def snap(v: float) -> int:
    return math.floor(v + 0.5)


def stamp(bits: list[int], w: int, h: int, cx: int, cy: int, r: float) -> None:
    r2 = r * r
    for py in range(max(0, math.ceil(cy - r)), min(h - 1, math.floor(cy + r)) + 1):
        for px in range(max(0, math.ceil(cx - r)), min(w - 1, math.floor(cx + r)) + 1):
            if (px - cx) ** 2 + (py - cy) ** 2 <= r2:
                bits[py * w + px] = 1


def stroke(bits: list[int], w: int, h: int, points: list[list[float]], radius: float) -> None:
    pts = [(snap(x), snap(y)) for x, y in points]
    stamp(bits, w, h, pts[0][0], pts[0][1], radius)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        steps = max(abs(x1 - x0), abs(y1 - y0), 1)
        for s in range(1, steps + 1):
            t = s / steps
            stamp(bits, w, h, snap(x0 + (x1 - x0) * t), snap(y0 + (y1 - y0) * t), radius)


CASES = [
    {
        "name": "single stamp, fractional center",
        "w": 24,
        "h": 20,
        "strokes": [{"points": [[12.3, 8.7]], "radius": 4.0}],
    },
    {
        "name": "diagonal stroke",
        "w": 24,
        "h": 20,
        "strokes": [{"points": [[2.2, 3.7], [17.8, 12.1]], "radius": 2.5}],
    },
    {
        "name": "L-shaped polyline",
        "w": 32,
        "h": 24,
        "strokes": [{"points": [[4.0, 4.0], [4.0, 18.0], [26.0, 18.0]], "radius": 3.0}],
    },
    {
        "name": "thin horizontal stroke",
        "w": 16,
        "h": 8,
        "strokes": [{"points": [[1.6, 3.4], [13.2, 3.4]], "radius": 0.8}],
    },
    {
        "name": "large brush clipped at the origin",
        "w": 20,
        "h": 16,
        "strokes": [{"points": [[0.0, 0.0]], "radius": 6.5}],
    },
    {
        "name": "crossing strokes accumulate",
        "w": 20,
        "h": 20,
        "strokes": [
            {"points": [[5.0, 5.0], [15.0, 5.0]], "radius": 2.0},
            {"points": [[10.0, 3.0], [10.0, 16.0]], "radius": 1.5},
        ],
    },
]


def main() -> int:
    out = []
    for case in CASES:
        w, h = case["w"], case["h"]
        bits = [0] * (w * h)
        for s in case["strokes"]:
            stroke(bits, w, h, s["points"], s["radius"])
        rows = ["".join(str(bits[y * w + x]) for x in range(w)) for y in range(h)]
        out.append({**case, "rows": rows})
    json.dump({"cases": out}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
