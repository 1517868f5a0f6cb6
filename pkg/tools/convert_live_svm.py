#!/usr/bin/env python3
"""Convert the original BRISQUE release files to this package's model format.

The original LIVE-trained regressor ships as two files: ``allmodel``
(libsvm epsilon-SVR, RBF kernel) and ``allrange`` (per-feature scaling
ranges for svm-scale).  Given both, this writes an equivalent
``brisque-svr 1`` file whose scores match the original scorer.

Usage:

    python3 tools/convert_live_svm.py allmodel allrange out.model

Note the original files scale features to [-1, 1] *before* they reach
libsvm, which is exactly what :class:`BrisqueModel` does with the
ranges block, so the support vectors are stored as-is (scaled space).
"""

import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from antiforensics.iqa import BrisqueModel  # noqa: E402

N_FEATURES = 36


def parse_allrange(path):
    """The allrange file: two skippable header lines, then 'idx min max'."""
    ranges = np.zeros((N_FEATURES, 2), dtype=np.float64)
    seen = set()
    for line in pathlib.Path(path).read_text().splitlines():
        parts = line.split()
        if len(parts) != 3:
            continue
        try:
            idx = int(parts[0])
        except ValueError:
            continue
        if not 1 <= idx <= N_FEATURES:
            raise SystemExit(f"feature index out of range: {idx}")
        ranges[idx - 1] = [float(parts[1]), float(parts[2])]
        seen.add(idx)
    if len(seen) != N_FEATURES:
        raise SystemExit(f"allrange covers {len(seen)} features, expected {N_FEATURES}")
    return ranges


def parse_allmodel(path):
    """Minimal libsvm model reader for the RBF epsilon-SVR case."""
    lines = pathlib.Path(path).read_text().splitlines()
    header = {}
    body_at = None
    for i, line in enumerate(lines):
        if line.strip() == "SV":
            body_at = i + 1
            break
        parts = line.split(None, 1)
        if len(parts) == 2:
            header[parts[0]] = parts[1].strip()
    if body_at is None:
        raise SystemExit("no SV section in model file")
    if header.get("svm_type") != "epsilon_svr":
        raise SystemExit(f"unsupported svm_type: {header.get('svm_type')}")
    if header.get("kernel_type") != "rbf":
        raise SystemExit(f"unsupported kernel_type: {header.get('kernel_type')}")
    gamma = float(header["gamma"])
    rho = float(header["rho"])

    coefs = []
    vectors = []
    for line in lines[body_at:]:
        parts = line.split()
        if not parts:
            continue
        coefs.append(float(parts[0]))
        vec = np.zeros(N_FEATURES, dtype=np.float64)
        for token in parts[1:]:
            idx, value = token.split(":")
            vec[int(idx) - 1] = float(value)
        vectors.append(vec)
    return gamma, rho, np.asarray(coefs), np.stack(vectors)


def main() -> None:
    if len(sys.argv) != 4:
        raise SystemExit(__doc__)
    allmodel, allrange, out = sys.argv[1:4]
    gamma, rho, coefs, sv = parse_allmodel(allmodel)
    ranges = parse_allrange(allrange)
    model = BrisqueModel(
        gamma=gamma, rho=rho, ranges=ranges, support_vectors=sv, coefficients=coefs
    )
    model.save(out)
    print(f"wrote {out}: {sv.shape[0]} support vectors, gamma={gamma}, rho={rho}")


if __name__ == "__main__":
    main()
