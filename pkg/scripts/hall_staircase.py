"""Small-field Hall staircase (Streda and Chern routes) for square and hex."""

from hoflab.hall import hall_staircase

if __name__ == "__main__":
    for kind, gaps in (("square", [(1, False), (2, False), (3, False)]),
                       ("hex", [(0, False), (1, False), (2, False), (0, True)])):
        for r in hall_staircase(kind, gaps):
            tag = "below z0" if r.below_zero else f"gap above n={r.gap_index}"
            print(f"{kind:6s} {tag:14s} 2pi cH={r.two_pi_cH:+.6f} m={r.m:+d} chern={r.chern_sum} agree={r.agree}")
