#!/usr/bin/env python3
"""Load a layout document with the engine's loader and echo it canonically.

Reads layout JSON on stdin. On success prints
`{"canvas": {"h", "w"}, "global_prompt", "objects": [{"id", "prompt",
"seed", "rle"}]}` to stdout; if the engine rejects the document, prints the
error to stderr and exits 3. The editor's round-trip tests compare this echo
against the document they exported.
"""

import json
import sys

from layoutgen.layout import load_layout, rle_encode


def main() -> int:
    data = sys.stdin.buffer.read()
    try:
        layout = load_layout(data)
    except Exception as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    doc = {
        "canvas": {"h": layout.canvas_height, "w": layout.canvas_width},
        "global_prompt": layout.global_prompt,
        "objects": [
            {"id": o.id, "prompt": o.prompt, "seed": int(o.seed), "rle": rle_encode(o.mask)}
            for o in layout.objects
        ],
    }
    json.dump(doc, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
