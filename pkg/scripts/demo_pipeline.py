#!/usr/bin/env python3
"""Walk the full certificate story on synthetic fixtures.

Generates one separated-support case and one shared-support case, classifies
both, verifies the emitted certificates, then forges an overlap claim from
the disjoint certificate and watches the verifier take it apart.
"""

import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args: str) -> int:
    print(f"$ redactcert {' '.join(args)}")
    code = subprocess.call([sys.executable, "-m", "redactcert.cli", *args])
    print()
    return code


def main() -> int:
    root = Path(tempfile.mkdtemp(prefix="redactcert-demo-"))
    disjoint = root / "disjoint-bundle"
    overlap = root / "overlap-bundle"

    run("fixture", "--kind", "planted-disjoint", "--seed", "0", "--out", str(disjoint))
    run("fixture", "--kind", "planted-overlap", "--seed", "0", "--out", str(overlap))

    run("analyze", str(disjoint), "--labels", "0,1", "--delta", "0.2",
        "--out", str(root / "disjoint-run"))
    run("analyze", str(overlap), "--labels", "0,1", "--delta", "0.2",
        "--out", str(root / "overlap-run"))

    cert = root / "disjoint-run" / "certificate.json"
    run("verify", str(cert), str(disjoint))

    forged = root / "forged.json"
    run("forge", str(cert), "--out", str(forged))
    code = run("verify", str(forged), str(disjoint))
    print(f"forged certificate verification exited with {code} (1 = rejected, as it should)")
    print(f"artifacts kept under {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
