"""
Evolving a population with an elite buffer
==========================================

A small population of TD3 learners on point_mass.  Every generation the
best member survives unchanged, a copy of it trains on the elite buffer and
the rest of the population is bred by crossover and mutation.
"""

from edrleb.envs import make_env
from edrleb.evolution import GAConfig, run_edrl_eb

spec = make_env("point_mass")
config = GAConfig(pop_size=4, episodes_per_gen=2, eval_no=3, step_budget=8_000, mode="mc", noisy_eval=False)


def show(report):
    print(f"gen {report.generation:2d}  steps {report.env_steps:6d}  elite {report.elite_fitness:8.2f}  "
          f"population {report.pop_mean_fitness:8.2f} +/- {report.pop_std_fitness:.2f}")


elite, reports = run_edrl_eb(config, spec, seed=0, algo="td3", on_generation=show)

# the final generation's elite buffer, with each candidate's score
print(reports[-1].elite_buffer.score_table())
