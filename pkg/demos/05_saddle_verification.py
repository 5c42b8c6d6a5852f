"""Verify the boundary-built strategy pair is a saddle point by simulation.

The stopper quits when the controlled state drops to a(t); the controller
reflects at b(t).  Under common random numbers the pair's payoff matches the
PDE value, no stopper deviation from a finite menu earns more, and no
controller deviation pays less -- while clearly suboptimal deviations
(stop immediately; reflect deep inside the inaction region) lose by
hundreds of standard errors.

Run:  python3 demos/05_saddle_verification.py
"""

import stopgame as sg

spec = sg.benchmark_spec(1, 1, 0.05, 0.4)
grid = sg.build_grid(spec, sg.GridConfig(n_t=201, n_x=801, x_max=4.2))
proj = sg.solve_projected(spec, grid)
pair = sg.extract_pair(proj, spec)

report = sg.deviation_suite(spec, proj, pair, t0=0.0, x0=1.33,
                            n_paths=30_000, seed=11, n_steps=400,
                            allowance_c=0.05)
print(report.to_text())
strict = report.strict_margins()
print(f"\nstrictest losing deviations: stopper {strict['stopper_deviation']:.0f} s.e., "
      f"controller {strict['controller_deviation']:.0f} s.e.")
print("all verdicts passed" if report.all_passed else "SOME VERDICTS FAILED")
