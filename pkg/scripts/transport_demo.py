"""Band-filtered vs gap-edge-filtered spreading on a disordered hex box; writes transport_demo.json."""

import json
import sys
import time

from hoflab.transport import free_lattice_run, hex_demo

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "transport_demo.json"
    t0 = time.perf_counter()
    free = free_lattice_run((6.0, 12.0, 24.0))
    demo = hex_demo()
    res = {
        "free_lattice": {"T": free.T_ladder, "cesaro": free.cesaro[2], "beta": free.beta[2],
                         "norm_drift": free.norm_drift, "tail_bound": free.tail_bound[2]},
        "hex_demo": demo,
        "seconds": time.perf_counter() - t0,
    }
    with open(out, "w") as fh:
        json.dump(res, fh, indent=2)
    print(json.dumps(res, indent=2))
