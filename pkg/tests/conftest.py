import json
from pathlib import Path

import numpy as np
import pytest

from nonholo.manifold import DMetric, NConnection, Splitting
from nonholo.sampling import SplitMix64, sample_points

ROOT = Path(__file__).resolve().parents[1]
SCENES = ROOT / "scenes"
ORACLES = Path(__file__).resolve().parent / "oracles"

TERMS = ["x1", "x2", "y3", "y4", "x1*y3", "x2*y4", "y3^2", "sin(x1 + y4)", "cos(x2*y3)", "x1^2*y4",
         "exp(-y3)*x2", "tanh(y4 - x1)"]


def _pick(rng: SplitMix64, items):
    return items[int(rng.uniform() * len(items))]


def _coef(rng: SplitMix64, scale: float) -> str:
    return repr(round(scale * (2.0 * rng.uniform() - 1.0), 3))


def random_scene(seed: int):
    """Randomized n=2, m=2 scene with unit-scale, diagonally dominant metric blocks."""
    rng = SplitMix64(seed)
    split = Splitting.standard(2, 2)

    def small(scale):
        return f"{_coef(rng, scale)}*{_pick(rng, TERMS)}"

    g = [[f"2 + {small(0.4)}", small(0.2)], [None, f"2 + {small(0.4)}"]]
    g[1][0] = g[0][1]
    h = [[f"1.5 + {small(0.3)}", small(0.15)], [None, f"1.5 + {small(0.3)}"]]
    h[1][0] = h[0][1]
    N = [[f"{small(1.0)} + {small(0.5)}" for _ in range(2)] for _ in range(2)]
    return DMetric.from_strings(split, g, h), NConnection.from_strings(split, N)


UNIT_BOX = {"x1": (0.0, 1.0), "x2": (0.0, 1.0), "y3": (0.0, 1.0), "y4": (0.0, 1.0)}


def unit_points(count=32, seed=0, box=None):
    return sample_points(box or UNIT_BOX, count, seed, ("x1", "x2", "y3", "y4"))


def load_scene(name: str) -> dict:
    return json.loads((SCENES / name).read_text())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def band_limited(N, p, Lbox, rng, modes=6, amp=0.5, mean_zero=False):
    """Random real field built from the lowest ``modes`` Fourier modes."""
    l = np.arange(N) * (Lbox / N)
    out = np.zeros((N, p))
    for c in range(p):
        if not mean_zero:
            out[:, c] += amp * rng.normal() * 0.3
        for j in range(1, modes + 1):
            kk = 2.0 * np.pi * j / Lbox
            out[:, c] += amp / j * (rng.normal() * np.cos(kk * l) + rng.normal() * np.sin(kk * l))
    return out


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, text: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
