"""Generate the annotated back-matter fixtures used by the preprocessing
tests: ten synthetic documents plus ground-truth cut offsets.

Run from the repo root; output is committed under tests/fixtures/backmatter/.
"""

from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "backmatter"

BODY = (
    "A Study of Scholarly Tables\n\n"
    "We investigate how structured comparisons of publications can be\n"
    "assembled from heterogeneous sources. Our pipeline retrieves candidate\n"
    "papers, merges duplicate entries, and extracts a user-defined set of\n"
    "properties from each document.\n\n"
    "The evaluation covers ten synthetic documents with annotated ground\n"
    "truth. Results indicate that line-anchored heading detection is\n"
    "sufficient for the vast majority of conference-style papers.\n\n"
)

# (filename, heading block appended after BODY, expect_cut)
CASES = [
    ("doc00.txt", "References\n[1] A. Author. A paper. 2019.\n[2] B. Author. Another. 2020.\n", True),
    ("doc01.txt", "REFERENCES\n[1] C. Author. Yet another paper. 2021.\n", True),
    ("doc02.txt", "7 References\n[1] D. Author. Paper four. 2018.\n", True),
    ("doc03.txt", "7. References\n[1] E. Author. Paper five. 2017.\n", True),
    ("doc04.txt", "Bibliography\nSmith, J. (2020). A book. Publisher.\n", True),
    ("doc05.txt", "Works Cited\nDoe, J. A thesis. University, 2016.\n", True),
    ("doc06.txt", "References\n[1] F. Author. Paper six. 2022.\n\nAppendix\nExtra proofs omitted from the main text.\n", True),
    ("doc07.txt", "VIII. References\n[1] G. Author. Paper seven. 2015.\n", True),
    ("doc08.txt", "Supplementary Material\nAdditional tables and figures.\n", True),
    # deliberately unmatched heading variant: detection must degrade safely
    ("doc09.txt", "References and Notes\n[1] H. Author. Paper nine. 2014.\n", False),
]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    annotations = {}
    for name, backmatter, expect_cut in CASES:
        text = BODY + backmatter
        (OUT / name).write_text(text, encoding="utf-8")
        annotations[name] = {
            "cut_offset": len(BODY) if expect_cut else None,
        }
    (OUT / "annotations.json").write_text(
        json.dumps(annotations, indent=2), encoding="utf-8"
    )
    print(f"wrote {len(CASES)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
