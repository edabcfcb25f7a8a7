"""Predicted vs measured Landau bands at flux 2 pi/q for both lattices."""

import sys

from hoflab.semiclassics import landau_table_measured

if __name__ == "__main__":
    q = int(sys.argv[1]) if len(sys.argv) > 1 else 101
    for kind, n_max in (("square", 4), ("hex", 5)):
        print(f"{kind}, flux 2pi/{q}")
        print(f"{'n':>3} {'z_pred':>12} {'band_lo':>12} {'band_hi':>12} {'rel_err':>9}")
        for lv in landau_table_measured(kind, q, n_max).levels:
            rel = abs(lv.meas_mid - lv.z) / max(abs(lv.z), 1e-12)
            print(f"{lv.n:>3} {lv.z:12.8f} {lv.meas_lo:12.8f} {lv.meas_hi:12.8f} {rel:9.2e}")
