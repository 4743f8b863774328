#!/usr/bin/env python3
"""Print headway/gap/clearance statistics for both shipped traffic regimes."""

import argparse

from pedstress.simulator import TrafficRegime, generate_traffic


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration", type=float, default=600.0,
                        help="simulated seconds per regime")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    header = f"{'regime':<24}{'flow veh/h':>12}{'mean gap s':>12}" \
             f"{'clearance m':>13}{'speed km/h':>12}"
    print(header)
    print("-" * len(header))
    for regime in TrafficRegime:
        _, params, stats = generate_traffic(regime, args.duration, args.seed)
        print(f"{regime.value:<24}{stats.flow_veh_h:>12.1f}"
              f"{stats.mean_gap_s:>12.3f}{stats.mean_clearance_m:>13.2f}"
              f"{stats.mean_speed_kmh:>12.1f}")


if __name__ == "__main__":
    main()
