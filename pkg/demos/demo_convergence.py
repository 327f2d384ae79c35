#!/usr/bin/env python3
"""Scaled-down refinement study showing second-order accuracy.

Uses a coarser reference than the full protocol so it finishes in well under
a minute; the observed orders still land near 2.  The full-size studies
(reference n=512, or reference step 1e-5) run through the CLI:

    chemotax converge --model crime --mode spatial --out results
    chemotax converge --model crime --mode temporal --out results
"""

from chemotax.harness import run_convergence


def show(table):
    kind = "h" if table.mode == "spatial" else "tau"
    print(f"  {kind:>10s}  {'err_phi':>12s} {'order':>7s}  "
          f"{'err_p':>12s} {'order':>7s}")
    for row in table.rows:
        o1 = f"{row.order_phi:7.3f}" if row.order_phi is not None else "      -"
        o2 = f"{row.order_p:7.3f}" if row.order_p is not None else "      -"
        print(f"  {row.resolution:10.5g}  {row.err_phi:12.4e} {o1}  "
              f"{row.err_p:12.4e} {o2}")


def main():
    print("spatial refinement, two-field system (reference n=128):")
    show(run_convergence("crime", "spatial", resolutions=(8, 16, 32),
                         ref_n=128, tau=1e-3, T=0.05))
    print("\ntemporal refinement, two-field system (n=32, reference "
          "tau=2e-5):")
    show(run_convergence("crime", "temporal", taus=(2e-3, 1e-3, 5e-4),
                         grid_n=32, tau_ref=2e-5, T_temporal=0.1))


if __name__ == "__main__":
    main()
