"""Expand the equatorial disc in H^3 and print area ratios against 2 pi."""
import argparse
import math

from hadamard_plateau import AmbientMetric, ExpansionOptions, build_ball_model, make_curve, run_expansion
from hadamard_plateau.comparison_ode import CurvatureProfile, solve_comparison


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--schedule", default="1,2,3,4")
    args = p.parse_args()
    sol = solve_comparison(CurvatureProfile.constant(-1.0), 24.0)
    metric = AmbientMetric(build_ball_model(sol))
    schedule = [float(x) for x in args.schedule.split(",")]
    led = run_expansion(make_curve("equator"), schedule, metric, opts=ExpansionOptions(level=args.level))
    print(f"{'R':>4} {'energy':>12} {'area':>12} {'defect/E':>10}  area(s)/(2 pi G(s)) for s/R in table")
    for e in led.entries:
        ratios = " ".join(f"{row['ratio'] / (2 * math.pi):.4f}" for row in e["area_table"])
        print(f"{e['R']:4.1f} {e['energy']:12.4f} {e['area']:12.4f} {e['defect'] / e['energy']:10.2e}  {ratios}")


if __name__ == "__main__":
    main()
