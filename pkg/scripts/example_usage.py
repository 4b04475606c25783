"""Example usage script for the trajectory optimizer.

Solves the double-integrator check with every solver variant, then the
Earth-Mars transfer with the default variant, and prints the reports.
"""

from pathlib import Path

from app.bench import compare_variants, load_scenario, run_scenario
from app.core.config import configure_logging

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main():
    """Run example solves."""
    configure_logging("WARNING")

    print("=" * 60)
    print("Trajectory Optimizer - Example Usage")
    print("=" * 60)
    print()

    config = load_scenario(SCENARIOS / "double_integrator.scn")
    print("Double integrator, all variants:")
    for row in compare_variants(config, ["iLQR", "DDP", "Q", "iLQRDyn", "DDPDyn", "QDyn"]):
        print(f"   {row['variant']:>8}: {row['outcome']} J={row['J']}")
    print()

    print("Earth-Mars fuel-optimal transfer (this takes a while)...")
    report = run_scenario(load_scenario(SCENARIOS / "earth_mars.scn"), "output/earth_mars").report
    print(f"   outcome   {report.outcome}")
    print(f"   fuel      {report.fuel_kg} kg")
    print(f"   g_max     {report.g_max:.3e}")
    print(f"   DDP/AUL/Newton iterations: {report.n_ddp}/{report.n_aul}/{report.n_newton}")
    print()
    print("Artifacts written to output/earth_mars")


if __name__ == "__main__":
    main()
