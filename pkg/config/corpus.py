#!/usr/bin/env python3
"""
Curve Corpus

Versioned set of built-in curves used by the verification campaigns:
moment curves in dimensions 2..5, the cusp (t^2, t^3), the planar cubic
(t, t^3 - 3t), the skew curve (t, t^2, t^4) and one random degree-6 planar
curve drawn from the run seed. Curve files `<name>.json` in the corpus
directory (ARCLAB_CORPUS_DIR) shadow built-ins of the same name.
"""

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional

from dotenv import load_dotenv

from arclength_lab import sampling
from arclength_lab.errors import ConfigError
from arclength_lab.poly_core import PolyCurve, Polynomial

logger = logging.getLogger(__name__)

CORPUS_VERSION = "1.0"

RANDOM_DEGREE = 6


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    description: str
    build: Callable[[int], PolyCurve]
    seeded: bool = False
    source: str = "builtin"

    def to_dict(self) -> Dict[str, object]:
        return {"name": self.name, "description": self.description, "seeded": self.seeded, "source": self.source}


def _spec_curve(name: str, coeffs: List[List[int]]) -> Callable[[int], PolyCurve]:
    return lambda _seed: PolyCurve.from_spec({"dim": len(coeffs), "coeffs": coeffs}, name=name)


def random_curve(seed: int, degree: int = RANDOM_DEGREE) -> PolyCurve:
    """Planar curve (t + a(t), b(t)) with small integer coefficients and deg b = degree.

    Redrawn until the torsion is not identically zero.
    """
    rng = sampling.stream(seed, f"corpus:random-{degree}")
    for _ in range(100):
        x = [0, 1] + [int(c) for c in rng.integers(-3, 4, size=degree - 1)]
        y = [0, 0] + [int(c) for c in rng.integers(-3, 4, size=degree - 2)] + [int(rng.choice([-1, 1]))]
        curve = PolyCurve((Polynomial(tuple(x)), Polynomial(tuple(y))), name=f"random-{degree}")
        if curve.nondegenerate:
            return curve
    raise ConfigError(f"could not draw a nondegenerate random-{degree} curve for seed {seed}", "corpus")


BUILTIN_CORPUS: Dict[str, CorpusEntry] = {
    **{
        f"moment-{d}": CorpusEntry(f"moment-{d}", f"moment curve (t, t^2, ..., t^{d})",
                                   lambda _seed, d=d: PolyCurve.moment(d))
        for d in range(2, 6)
    },
    "cusp": CorpusEntry("cusp", "cusp (t^2, t^3)", _spec_curve("cusp", [[0, 0, 1], [0, 0, 0, 1]])),
    "cubic": CorpusEntry("cubic", "planar cubic (t, t^3 - 3t)", _spec_curve("cubic", [[0, 1], [0, -3, 0, 1]])),
    "skew": CorpusEntry("skew", "skew curve (t, t^2, t^4)",
                        _spec_curve("skew", [[0, 1], [0, 0, 1], [0, 0, 0, 0, 1]])),
    f"random-{RANDOM_DEGREE}": CorpusEntry(f"random-{RANDOM_DEGREE}",
                                           f"random degree-{RANDOM_DEGREE} planar curve drawn from the seed",
                                           random_curve, seeded=True),
}


def corpus_dir(directory: Optional[str] = None) -> Optional[Path]:
    """Explicit directory, else ARCLAB_CORPUS_DIR, else None"""
    if directory:
        return Path(directory)
    load_dotenv()
    env_dir = os.getenv("ARCLAB_CORPUS_DIR")
    return Path(env_dir) if env_dir else None


def _file_entries(directory: Optional[Path]) -> Dict[str, CorpusEntry]:
    if directory is None or not directory.is_dir():
        return {}
    entries = {}
    for path in sorted(directory.glob("*.json")):
        name = path.stem

        def build(_seed: int, path=path, name=name) -> PolyCurve:
            try:
                spec = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"unreadable corpus file {path}: {exc}", "corpus") from exc
            return PolyCurve.from_spec(spec, name=name)

        entries[name] = CorpusEntry(name, f"curve file {path.name}", build, source=str(path))
    return entries


def corpus_entries(directory: Optional[str] = None) -> Dict[str, CorpusEntry]:
    entries = dict(BUILTIN_CORPUS)
    files = _file_entries(corpus_dir(directory))
    for name in files:
        if name in entries:
            logger.info("corpus file %s shadows the built-in curve", files[name].source)
    entries.update(files)
    return entries


def list_corpus(directory: Optional[str] = None) -> List[Dict[str, object]]:
    return [entry.to_dict() for entry in corpus_entries(directory).values()]


def resolve_curve(name: str, seed: int = 0, directory: Optional[str] = None) -> PolyCurve:
    entries = corpus_entries(directory)
    if name not in entries:
        raise ConfigError(f"unknown corpus curve '{name}' (known: {', '.join(sorted(entries))})", "corpus")
    return entries[name].build(seed)


if __name__ == "__main__":
    print(f"arclength-lab corpus v{CORPUS_VERSION}")
    for entry in list_corpus():
        print(f"  {entry['name']:<10} {entry['description']}")
