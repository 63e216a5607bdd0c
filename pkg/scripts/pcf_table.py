"""Table of PCF points in the default window with entropy and bone endpoints.

    python3 scripts/pcf_table.py --n-max 4 --m-max 6
"""

import argparse

from ratbones import bones
from ratbones.entropy import real_entropy
from ratbones.family import map_from_critical_values


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n-max", type=int, default=4)
    ap.add_argument("--m-max", type=int, default=6)
    ap.add_argument("--resolution", type=int, default=200)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    pts = bones.scan_pcf(bones.DEFAULT_WINDOW, args.n_max, args.m_max, (args.resolution,) * 2, args.workers)
    traced = []
    print(f"{'n':>2} {'m':>2} {'v1':>12} {'v2':>12} {'quotient':>10} {'E.R2/D2':>10} {'h lap':>9} {'h markov':>9}  bone")
    for p in pts:
        bone = next((b for b in traced if b.n == p.n and bones.on_bone(b, p.array)), None)
        if bone is None:
            bone = bones.trace_bone(p.array, p.n)
            traced.append(bone)
        d = bones.check_positive_direction(p, bone)
        e = real_entropy(map_from_critical_values(p.v))
        label = f"#{traced.index(bone)} {bone.kind} {bone.endpoint_info[0]} -> {bone.endpoint_info[1]}"
        print(
            f"{p.n:>2} {p.m:>2} {p.v.v1:>12.8f} {p.v.v2:>12.8f} {p.quotient:>10.4f} "
            f"{d['normalized']:>10.4f} {e.value:>9.6f} {e.markov_value:>9.6f}  {label}"
        )
    print(f"\n{len(pts)} PCF points on {len(traced)} bones")
    for k, b in enumerate(traced):
        print(f"bone #{k}: n={b.n}, arclength {b.arclength:.4f}, {b.steps} points, max |R1| {b.max_residual:.1e}")


if __name__ == "__main__":
    main()
