"""Command-line driver.

Examples::

    edrl-eb --env point_mass --algo td3 --mode mc --seeds 1,2,3 --out runs
    edrl-eb --config base.cfg --pop-size 8
    edrl-eb --env sparse_goal --ablation --step-budget 20000

The optional config file holds flat ``key = value`` lines whose keys are
the long flag names (``pop-size = 6``).  Agent hyperparameters use an
``agent.`` prefix in the file (``agent.gamma = 0.98``) and
``--agent-param gamma=0.98`` on the command line.  Command-line flags
override the file, which overrides the defaults.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .agents import ALGOS, AgentConfig
from .envs import ENV_NAMES
from .evolution import MODES, GAConfig
from .harness import RunConfig, ablation_matrix, run_experiment

# flag name -> (RunConfig/GAConfig attribute, parser)
_GA_FLAGS = {
    "pop-size": ("pop_size", int),
    "episodes-per-gen": ("episodes_per_gen", int),
    "eval-no": ("eval_no", int),
    "crossover-prob": ("crossover_prob", float),
    "mutation-prob": ("mutation_prob", float),
    "per-member": ("per_member", int),
    "step-budget": ("step_budget", int),
    "elite-updates": ("n_elite_updates", int),
}


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _seeds(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in str(text).split(",") if s.strip())


_RUN_FLAGS = {
    "env": ("env", str),
    "algo": ("algo", str),
    "mode": ("mode", str),
    "seeds": ("seeds", _seeds),
    "out": ("out", Path),
    "noisy-eval": ("noisy_eval", _bool),
    "dump-elite-scores": ("dump_elite_scores", _bool),
    "ablation": ("ablation", _bool),
}

_AGENT_FIELDS = {f.name: f for f in fields(AgentConfig)}


def _agent_value(name: str, text: str):
    if name not in _AGENT_FIELDS:
        raise ValueError(f"unknown agent parameter {name!r}")
    default = getattr(AgentConfig(), name)
    if name == "hidden_sizes":
        return tuple(int(s) for s in text.split(",") if s.strip())
    if name == "final_init":
        return None if text.strip().lower() == "none" else float(text)
    return type(default)(text)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("_", "-") if not key.startswith("agent.") else key
            if not (key in _GA_FLAGS or key in _RUN_FLAGS or key.startswith("agent.")):
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edrl-eb", description=__doc__.split("\n")[0],
                                argument_default=argparse.SUPPRESS)
    p.add_argument("--config", help="flat key = value file")
    p.add_argument("--env", choices=ENV_NAMES)
    p.add_argument("--algo", choices=ALGOS)
    p.add_argument("--mode", choices=MODES)
    for flag, (_, conv) in _GA_FLAGS.items():
        p.add_argument(f"--{flag}", type=conv)
    p.add_argument("--seeds", type=_seeds, help="comma-separated integers")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--noisy-eval", action=argparse.BooleanOptionalAction,
                   help="perturb actions during fitness evaluation (default on)")
    p.add_argument("--dump-elite-scores", action="store_true",
                   help="write per-generation elite-buffer score tables")
    p.add_argument("--ablation", action="store_true",
                   help="run every mode x algorithm combination on the same seeds")
    p.add_argument("--agent-param", action="append", metavar="NAME=VALUE",
                   help="override an agent hyperparameter (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def parse_config(argv=None) -> RunConfig:
    """Build a RunConfig from CLI arguments layered over an optional file."""
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    try:
        return _assemble(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))


def _assemble(args: dict) -> RunConfig:
    raw: dict[str, object] = {}
    agent_raw: dict[str, str] = {}
    if "config" in args:
        for key, value in read_config_file(args["config"]).items():
            if key.startswith("agent."):
                agent_raw[key[len("agent."):]] = value
            else:
                conv = {**_GA_FLAGS, **_RUN_FLAGS}[key][1]
                raw[key] = conv(value)
    for key, value in args.items():
        flag = key.replace("_", "-")
        if flag in _GA_FLAGS or flag in _RUN_FLAGS:
            raw[flag] = value
    for item in args.get("agent_param", []) or []:
        if "=" not in item:
            raise ValueError(f"--agent-param expects NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        agent_raw[name.strip()] = value.strip()

    if raw.get("ablation") and "mode" in args:
        raise ValueError("--ablation runs every mode; do not combine it with --mode")

    agent = AgentConfig(**{k: _agent_value(k, v) for k, v in agent_raw.items()})
    mode = raw.get("mode", "mc")
    if raw.get("ablation"):
        # the matrix resets mode-pinned probabilities per cell
        mode = "mc"
    ga = GAConfig(mode=mode, noisy_eval=raw.get("noisy-eval", True),
                  **{attr: raw[flag] for flag, (attr, _) in _GA_FLAGS.items() if flag in raw})
    run_kwargs = {attr: raw[flag] for flag, (attr, _) in _RUN_FLAGS.items()
                  if flag in raw and attr not in ("mode", "noisy_eval")}
    return RunConfig(mode=mode, ga=ga, agent=agent, **run_kwargs)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if ("-v" in argv or "--verbose" in argv) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = parse_config(argv)
    if config.ablation:
        rows = ablation_matrix(config)
        print("mode,algo,mean,std,median,best,n_seeds")
        for mode, algo, s in rows:
            print(f"{mode},{algo},{s.mean:.6g},{s.std:.6g},{s.median:.6g},{s.best:.6g},{s.n}")
    else:
        s, _ = run_experiment(config)
        print(f"{config.name}: mean {s.mean:.6g}  std {s.std:.6g}{'' if s.std_defined else ' (single seed)'}"
              f"  median {s.median:.6g}  best {s.best:.6g}  seeds {s.n}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
