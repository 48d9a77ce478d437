"""Run the four limit rate studies and write rates.csv / rates.json.

usage: python scripts/rate_studies.py [out_dir]
"""
import sys

from mixhilbert import experiments as ex


def main(out="out/rates"):
    reps = [ex.acoustic_linearization_rate(), ex.maxwellian_taylor_rate(), ex.hydrodynamic_residual_rate(),
            ex.acoustic_limit_proxy_rate()]
    ex.write_reports(reps, out)
    for r in reps:
        print(f"{r.study:24s} slope {r.slope:7.3f} expected {r.expected:4.1f} pass {r.passed}  ({r.wall_time:.0f} s)")


if __name__ == "__main__":
    main(*sys.argv[1:])
