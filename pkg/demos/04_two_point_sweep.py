"""Two-point discrimination resolution of the encode/extract codec.

Sweeps two equal-depth contacts from far apart to nearly touching and shows
where the two heatmap peaks merge into one.  This bounds what any model can
resolve downstream, independent of training: below roughly one kernel
footprint the encoding itself becomes unimodal.
"""

import numpy as np

from touchmap import ContactPoint, GridMapping, KernelParams, encode_heatmap, extract_peaks, kernel_sigma
from touchmap.sim import DUAL_SEPARATIONS_MM, dual_indenter_contacts


def main():
    mapping = GridMapping()
    params = KernelParams()
    depth = 4.0
    sigma = kernel_sigma(depth, params)
    print(f"two tips, both at depth {depth} mm (kernel sigma {sigma:.2f} mm)")
    print(f"sweep grid: {DUAL_SEPARATIONS_MM[0]} .. {DUAL_SEPARATIONS_MM[-1]} mm\n")

    print("separation -> extracted peaks -> estimated separation")
    for separation in DUAL_SEPARATIONS_MM:
        contacts = dual_indenter_contacts((0.0, 0.0), separation, 0.35, depth)
        grid = encode_heatmap(contacts, mapping, params)
        peaks = extract_peaks(grid)
        if len(peaks) == 2:
            est = float(np.hypot(peaks[0].x_mm - peaks[1].x_mm, peaks[0].y_mm - peaks[1].y_mm))
            note = f"estimated {est:6.3f} mm   error {abs(est - separation) * 1000:5.1f} um"
        else:
            note = "not resolved"
        print(f"  {separation:5.1f} mm   {len(peaks)} peak(s)   {note}")

    print("\nbelow the sweep grid (contacts encoded directly, slightly depth-")
    print("staggered): maximum-composition keeps both modes until the pixel")
    print("grid and the minimum peak separation finally fuse them:")
    for separation in (6.0, 4.0, 3.0, 2.0, 1.5, 1.0):
        half = separation / 2.0
        contacts = [
            ContactPoint(-half, 0.0, depth),
            ContactPoint(+half, 0.0, depth - 0.2),
        ]
        peaks = extract_peaks(encode_heatmap(contacts, mapping, params))
        print(f"  {separation:4.1f} mm   {len(peaks)} peak(s)")


if __name__ == "__main__":
    main()
