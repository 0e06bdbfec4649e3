"""Run the acceptance suite and print one line per criterion.

Pass ``--quick`` to skip the two long statistical studies (criteria 2 and 7).
"""

import subprocess
import sys
from pathlib import Path


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    root = Path(__file__).resolve().parents[1]
    cmd = [sys.executable, "-m", "pytest", str(root / "tests" / "test_acceptance.py"), "-q", "-s"]
    if "--quick" in argv:
        cmd += ["-m", "not slow"]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=root)
    lines = [l for l in proc.stdout.splitlines() if l.startswith("CRITERION")]
    print("\n".join(lines))
    return 0 if proc.returncode == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
