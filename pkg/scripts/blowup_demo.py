"""Blow-up rescaling of the synthetic concentration fixture, printing the energy ledger."""
import argparse

from hadamard_plateau.expansion import concentration_fixture, detect_concentration, run_blowup


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--level", type=int, default=5)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--k", type=int, default=8)
    args = p.parse_args()
    m = concentration_fixture(level=args.level, delta=args.delta)
    print("event:", detect_concentration(m, window=2.0 / args.k))
    _, lineage = run_blowup(m, k_index=args.k)
    for ev in lineage:
        print(f"depth {ev['depth']}: r {ev['r']:.4f}, cut arc {ev['cut_arc_length']:.4f} "
              f"(bound {ev['cut_arc_bound']:.4f}), discarded {ev['energy_discarded']:.4e}, "
              f"coverage {ev['coverage_before']:.3f} -> {ev['coverage_after']:.3f}")


if __name__ == "__main__":
    main()
