"""Regenerate src/lmprm/assets/bugtrap.json.

A square cavity (interior about 15% of the unit workspace) whose left wall has
an opening screened by a baffle. The start sits inside the cavity; the goal
is the start mirrored across the closed back (right) wall, so straight-line
guidance points into the dead end.
"""

import json
from pathlib import Path

import numpy as np

from lmprm.env import Box, Environment, Rect, env_to_dict, estimate_free_measure

T = 0.02  # wall thickness
OUT = 0.215  # half-width of the trap's outer square
GAP = 0.05  # half-height of the opening

WALLS = [
    Rect((OUT - T, -OUT), (OUT, OUT)),            # back wall
    Rect((-OUT, OUT - T), (OUT, OUT)),            # top
    Rect((-OUT, -OUT), (OUT, -OUT + T)),          # bottom
    Rect((-OUT, -OUT), (-OUT + T, -GAP)),         # front wall, lower half
    Rect((-OUT, GAP), (-OUT + T, OUT)),           # front wall, upper half
    Rect((-0.12, -0.1), (-0.10, 0.1)),            # baffle behind the opening
]

START = [0.04, 0.0]
BACK_WALL_X = OUT - T / 2
GOAL = [2 * BACK_WALL_X - START[0], START[1]]


def main(seed: int = 20170101):
    env = Environment(2, Box.cube(0.5, 2), Box.cube(1.0, 2), tuple(WALLS), seed=seed)
    env = estimate_free_measure(env, np.random.default_rng(seed), 100_000)
    data = {"environment": env_to_dict(env), "start": START, "goal": GOAL}
    path = Path(__file__).resolve().parents[1] / "src" / "lmprm" / "assets" / "bugtrap.json"
    path.write_text(json.dumps(data, indent=1) + "\n")
    inner = (2 * (OUT - T)) ** 2
    print(f"wrote {path}; trap interior {inner:.3f} of workspace, mu_free {env.mu_free_estimate}")


if __name__ == "__main__":
    main()
