"""Area-bound ledger for non-equatorial curves: area(M_R ∩ B_s) / (L G(s)) and b-areas."""
import argparse

from hadamard_plateau import AmbientMetric, ExpansionOptions, build_ball_model, make_curve, run_expansion
from hadamard_plateau.comparison_ode import CurvatureProfile, solve_comparison


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--curvature", type=float, default=-2.25)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--schedule", default="1,2,3,4,5,6")
    p.add_argument("--curves", default="tilted-circle,torus-knot-projection")
    args = p.parse_args()
    sol = solve_comparison(CurvatureProfile.constant(args.curvature), 24.0)
    metric = AmbientMetric(build_ball_model(sol))
    schedule = [float(x) for x in args.schedule.split(",")]
    for name in args.curves.split(","):
        led = run_expansion(make_curve(name), schedule, metric, opts=ExpansionOptions(level=args.level))
        print(f"{name}:")
        print(f"{'R':>4} {'area':>12} {'max area/bound':>15} {'b-area':>8} {'ten':>5} {'flags'}")
        for e in led.entries:
            worst = max(row["area"] / row["bound"] for row in e["area_table"])
            print(f"{e['R']:4.1f} {e['area']:12.4f} {worst:15.4f} {e['area_b']:8.4f} "
                  f"{str(e['ten']['passed']):>5} {','.join(e['flags'])}")


if __name__ == "__main__":
    main()
