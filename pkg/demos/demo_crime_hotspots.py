#!/usr/bin/env python3
"""Crime hotspot pattern formation, scaled down to run in about a minute.

Integrates the criminal-density / attractiveness system from its uniform
equilibrium plus small random bumps.  With slow attractiveness spread the
instability organizes the density into localized hotspots; the script prints
a coarse ASCII picture and the positivity audit, and writes heatmaps.

The full-size experiment (n=256 on [0, 2pi]^2, T=800) is the same call with
the default config: `chemotax crime --out results`.
"""

from chemotax.harness import build_config, default_sections, run_crime_cell


def ascii_art(field, levels=" .:-=+*#%@"):
    lo, hi = field.min(), field.max()
    span = hi - lo if hi > lo else 1.0
    idx = ((field - lo) / span * (len(levels) - 1)).astype(int)
    return "\n".join("".join(levels[v] for v in row) for row in idx[::2, ::2])


def main():
    sections = default_sections()
    sections["crime"].update({
        "n": 64,
        "tau": 0.01,
        "T": 60.0,
        "snapshots": (60.0,),
        "series_every": 100,
        "D": (0.001,),
        "eta": 0.03,        # slow field spread: aggregation-dominated
    })
    cfg = build_config("crime", sections, seed=2024, out="demo_out/crime")
    print("integrating 6000 steps at n=64 (slow-spread regime) ...")
    res = run_crime_cell(cfg, 0.001)

    series = res.series
    print(f"\ncriminal density at T={res.final_time:g}:")
    print(f"  min over run: {min(series['min_rho']):.3e} (stays >= 0)")
    print(f"  max at end:   {series['max_rho'][-1]:.3f} "
          f"(equilibrium was {series['max_rho'][0]:.3f})")
    print(f"  attractiveness min over run: {min(series['min_a']):.3e}")
    print(f"\nartifacts in {res.out_dir}:")
    for p in sorted(res.out_dir.iterdir()):
        print(f"  {p.name}")

    from chemotax.harness import read_heatmap
    rho_final, _, _ = read_heatmap(res.out_dir / "rho_t60.pgm")
    print("\nhotspot map (density, coarse ASCII):")
    print(ascii_art(rho_final))


if __name__ == "__main__":
    main()
