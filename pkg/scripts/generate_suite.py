#!/usr/bin/env python3
"""Generate the two-sequence synthetic street suite used by the acceptance tests."""
import argparse
from pathlib import Path

from radarlabel import synth


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="dataset output directory")
    parser.add_argument("--frames", type=int, default=100, help="frames per sequence")
    args = parser.parse_args()
    manifest = synth.generate_acceptance_suite(Path(args.out), frames_per_sequence=args.frames)
    for seq in manifest.sequences:
        n = len(list((manifest.sequence_dir(seq) / "radar").glob("*.csv")))
        print(f"{seq}: {n} frames")


if __name__ == "__main__":
    main()
