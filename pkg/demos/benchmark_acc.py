"""Benchmark run on the four-state oscillator model.

The model is a lightly damped single-input/single-output chain that is
not passive.  We passivate two variants — one with feedthrough
``D = 1/8`` (the Riccati-based initializer applies and the certificate is
meaningful) and one with ``D = 0`` (random initialization, vacuous
certificate) — and print a small results table.

Run with:  python3 demos/benchmark_acc.py
"""

import time

import numpy as np

from klap import acc_system, check_passive, klap, popov_scan

np.set_printoptions(precision=4, suppress=True)

HEADER = (
    f"{'variant':<10} {'iters':>5} {'time (s)':>9} {'s/iter':>9} "
    f"{'h2 error':>9} {'restarts':>8} {'certificate':>12}"
)

print("Four-state oscillator benchmark")
print("=" * len(HEADER))
scan = popov_scan(acc_system())
print(f"unrepaired Popov minimum: {scan.global_min:.4f} "
      f"near {scan.argmin_frequency:.4f} rad/s -> not passive")
print()
print(HEADER)
print("-" * len(HEADER))

rows = []
for label, feedthrough in (("D = 1/8", 0.125), ("D = 0", 0.0)):
    sys = acc_system(feedthrough)
    start = time.perf_counter()
    result = klap(sys)
    elapsed = time.perf_counter() - start
    cert = result.certificate
    if cert is None:
        status = "n/a"
    elif cert.vacuous:
        status = "vacuous"
    elif cert.is_global_candidate:
        status = "global"
    else:
        status = "local"
    per_iter = elapsed / max(result.iterations, 1)
    print(f"{label:<10} {result.iterations:>5d} {elapsed:>9.3f} "
          f"{per_iter:>9.5f} {result.h2_error:>9.5f} {result.restarts:>8d} "
          f"{status:>12}")
    rows.append((label, result))

print()
for label, result in rows:
    after = check_passive(result.system)
    print(f"{label}: repaired C_hat = {result.C_hat.ravel()}  "
          f"passive = {after.passive} (margin {after.margin:.2e})")

print()
print("Notes: the D = 1/8 variant starts from the minimal solution of the")
print("passivity Riccati equation, shifted just past the Popov minimum; the")
print("D = 0 variant cannot use that route (D + D^T is singular) and falls")
print("back to a seeded random factor, which costs extra iterations and")
print("yields a slightly larger attainable error.")
