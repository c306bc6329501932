"""Running a named experiment from Python and writing its report.

The same runs are available from the shell, e.g.
``flatlpp verify density_normalization --output-dir out``.
"""
import os
import tempfile

from flatlpp.experiments import ExperimentConfig, emit_report, list_experiments, run_experiment

for e in list_experiments():
    print(f"{e.criterion or '-':>2}  {e.name}")

report = run_experiment(ExperimentConfig("density_normalization", n=3))
print(report.summary_line())
out = os.environ.get("FLATLPP_OUTPUT_DIR") or tempfile.mkdtemp()
print("report written to", emit_report(report, "json", out))
