"""
Which operators matter on a sparse reward?
==========================================

Runs the buffer-only, mutation-only and crossover-plus-mutation variants
with both learners on sparse_goal, sharing seeds, and writes the
comparison table to ``runs/sparse_goal_ablation.csv``.  This takes a few
minutes; shrink ``step_budget`` for a quicker look.
"""

from pathlib import Path

from edrleb.evolution import GAConfig
from edrleb.harness import RunConfig, ablation_matrix

base = RunConfig(env="sparse_goal", ga=GAConfig(pop_size=6, episodes_per_gen=2, step_budget=6_000),
                 seeds=(0, 1, 2), out=Path("runs"))

print(f"{'mode':12s} {'algo':5s} {'median':>8s} {'mean':>8s} {'best':>8s}")
for mode, algo, s in ablation_matrix(base):
    print(f"{mode:12s} {algo:5s} {s.median:8.2f} {s.mean:8.2f} {s.best:8.2f}")
