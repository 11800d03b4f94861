#!/usr/bin/env python3
"""Print the trainable parameter count of every detector family.

Builds each network at full width with its default clip shape and prints
one row per family, in millions:

  r3d        33.14M  (33144258)
  ...

Pass a width multiplier as the only argument to size the reduced models
used for desk-scale training, e.g. ``report_param_counts.py 0.25``.

Requires: pip install -e .
"""

from __future__ import annotations

import sys

try:
    from stfl import ArchSpec, Family, build, param_count
except ImportError:
    print("Error: stfl not installed. Run: pip install -e .", file=sys.stderr)
    sys.exit(1)


def main() -> None:
    width = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0

    print(f"=== Parameter counts (width multiplier {width:g}) ===")
    print()
    for family in Family:
        count = param_count(build(ArchSpec(family, width_multiplier=width)))
        print(f"  {family.value:<10} {count / 1e6:6.2f}M  ({count})")


if __name__ == "__main__":
    main()
