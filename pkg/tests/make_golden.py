"""Regenerate the frozen analysis reports in ``tests/golden``.

Run ``python tests/make_golden.py`` after an intended change of the
report contents and review the diff.
"""

from pathlib import Path

from tiltcheck import corpus
from tiltcheck.serialize import dumps
from tiltcheck.stability.analyze import analyze

GOLDEN = Path(__file__).parent / "golden"


def main():
    GOLDEN.mkdir(exist_ok=True)
    for name in corpus.names():
        (GOLDEN / f"{name}.json").write_text(dumps(analyze(corpus.load(name)).to_dict()))


if __name__ == "__main__":
    main()
