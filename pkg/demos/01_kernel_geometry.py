"""Contact-kernel geometry: how indentation depth shapes the heatmap.

Walks the closed-form pieces of the encoding — Hertzian contact radius,
blur-corrected kernel width, amplitude scaling — then encodes one contact
and recovers it with the peak extractor.
"""

import numpy as np

from touchmap import (
    ContactPoint,
    GridMapping,
    KernelParams,
    encode_heatmap,
    extract_peaks,
    hertz_contact_radius,
    kernel_sigma,
)


def main():
    params = KernelParams()
    print("depth -> contact radius -> kernel sigma -> amplitude")
    for depth in (0.5, 1.0, 2.0, 3.0, 4.5, 6.0):
        a = hertz_contact_radius(params.indenter_radius_mm, depth)
        sigma = kernel_sigma(depth, params)
        print(
            f"  d={depth:4.1f} mm   a={a:5.3f} mm   sigma={sigma:5.3f} mm"
            f"   amplitude={depth / params.d_max_mm:5.3f}"
        )

    print("\nlimits: sigma(0) =", kernel_sigma(0.0, params),
          " sigma(d_max) =", round(kernel_sigma(params.d_max_mm, params), 6))

    mapping = GridMapping()
    contact = ContactPoint(x_mm=4.2, y_mm=-3.1, depth_mm=4.8)
    grid = encode_heatmap([contact], mapping, params)
    print(f"\nencoded one contact at ({contact.x_mm}, {contact.y_mm}), depth {contact.depth_mm} mm")
    print(f"heatmap: {grid.values.shape}, max {grid.values.max():.4f} "
          f"(expected {contact.depth_mm / params.d_max_mm:.4f})")

    # Coarse ASCII rendering of the 64x64 heatmap.
    glyphs = " .:-=+*#%@"
    coarse = grid.values.reshape(16, 4, 16, 4).max(axis=(1, 3))
    for row in coarse:
        print("  " + "".join(glyphs[min(int(v * (len(glyphs) - 1) + 0.5), len(glyphs) - 1)] for v in row))

    peaks = extract_peaks(grid)
    p = peaks[0]
    print(f"\nextracted {len(peaks)} peak: position ({p.x_mm:+.3f}, {p.y_mm:+.3f}) mm, "
          f"depth {p.depth_mm:.3f} mm")
    print(f"position error {np.hypot(p.x_mm - contact.x_mm, p.y_mm - contact.y_mm):.4f} mm, "
          f"depth error {abs(p.depth_mm - contact.depth_mm):.4f} mm")


if __name__ == "__main__":
    main()
