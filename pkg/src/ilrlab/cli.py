"""Command-line entry point: ``ilrlab {gen-mdp,imitate,verify,sweep}``.

Exit codes: 0 success/pass, 1 verification failed, 2 invalid input,
3 runtime or solver failure. Parameters come from built-in defaults, then an
optional ``--config`` JSON file, then explicit flags (highest precedence).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ilrlab.chains import total_variation
from ilrlab.exceptions import IlrLabError, InvalidMdpError
from ilrlab.experiments import METHODS, rows_to_csv, run_sweep
from ilrlab.imitation import (
    behavioral_cloning,
    ilr,
    intrinsic_reward,
    make_expert,
    optimal_expert,
    sample_trajectory,
)
from ilrlab.mdp import FiniteMdp, expected_reward, load_mdp, save_mdp
from ilrlab.rng import derive_seed, generator
from ilrlab.verification import (
    RandomMdpSpec,
    check_tv_decay,
    check_lemma4,
    check_support_gain_suite,
    check_lemma7,
    check_proposition1,
    check_tv_duality,
    fast_mixing_instance,
    generate_random_mdp,
    plan_from_proposition1,
    policy_occupancy,
    random_ergodic_policy,
    stochastic_expert_demo,
)

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3

CHECKS = ("lemma3", "lemma4", "lemma5", "lemma7", "prop1", "tv-duality", "stochastic-demo")

DEFAULT_FRACTIONS = tuple(2.0**-k for k in range(12, -1, -1))

EXPERTS = ("random", "optimal")

DEFAULTS = {
    "gen-mdp": {"states": None, "actions": None, "branching": None, "reward_style": "uniform",
                "seed": 0, "out": None, "with_expert": False},
    "imitate": {"mdp_file": None, "samples": 1000, "seed": 0, "method": "ilr",
                "expert": "random", "out": None},
    "verify": {"check": None, "mdp": None, "states": 5, "actions": 3, "branching": 3,
               "seed": 0, "eta": 0.5, "delta": 0.2, "trials": None, "samples": None,
               "samples_override": None, "epsilon": 0.05, "expert_probs": "0.5,0.5",
               "out": None},
    "sweep": {"mdp_file": None, "fractions": ",".join(repr(f) for f in DEFAULT_FRACTIONS),
              "methods": ",".join(METHODS), "trials": 20, "seed": 0, "samples": 4096,
              "expert": "optimal", "out": None},
}

DEFAULT_TRIALS = {"lemma3": 200, "lemma4": 500, "lemma5": 100, "lemma7": 100, "prop1": 50,
                  "tv-duality": 1000, "stochastic-demo": 1}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilrlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of parameters; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", "-o", help="output path")

    g = sub.add_parser("gen-mdp", help="generate a random communicating MDP")
    common(g)
    g.add_argument("--states", type=int)
    g.add_argument("--actions", type=int)
    g.add_argument("--branching", type=int)
    g.add_argument("--reward-style", choices=("uniform", "sparse"))
    g.add_argument("--with-expert", action="store_const", const=True,
                   help="also draw an expert and print its mixing time")

    i = sub.add_parser("imitate", help="run ILR or BC on a sampled expert dataset")
    common(i)
    i.add_argument("mdp_file", nargs="?")
    i.add_argument("--samples", type=int)
    i.add_argument("--method", choices=("ilr", "bc"))
    i.add_argument("--expert", choices=EXPERTS, help="random ergodic policy (default) or extrinsic-optimal")

    v = sub.add_parser("verify", help="run one verification check")
    common(v)
    v.add_argument("check", nargs="?", choices=CHECKS)
    v.add_argument("--mdp", help="MDP file (default: generated from --seed)")
    v.add_argument("--states", type=int)
    v.add_argument("--actions", type=int)
    v.add_argument("--branching", type=int)
    v.add_argument("--eta", type=float)
    v.add_argument("--delta", type=float)
    v.add_argument("--trials", type=int)
    v.add_argument("--samples", type=int)
    v.add_argument("--samples-override", type=int)
    v.add_argument("--epsilon", type=float)
    v.add_argument("--expert-probs", help="comma-separated action probabilities (stochastic-demo)")

    s = sub.add_parser("sweep", help="dataset-size sweep, ILR vs BC, written as CSV")
    common(s)
    s.add_argument("mdp_file", nargs="?")
    s.add_argument("--fractions", help="comma-separated fractions of --samples")
    s.add_argument("--methods", help="comma-separated subset of ILR,BC")
    s.add_argument("--trials", type=int)
    s.add_argument("--samples", type=int, help="full-coverage dataset size")
    s.add_argument("--expert", choices=EXPERTS, help="extrinsic-optimal policy (default) or random ergodic")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file, and explicit flags (in that order)."""
    defaults = DEFAULTS[args.command]
    params = dict(defaults)
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        data = {k.replace("-", "_"): v for k, v in data.items()}
        unknown = sorted(set(data) - set(defaults))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        params.update(data)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return params


def _require(cond, message):
    if not cond:
        raise UsageError(message)


def _positive(params, *keys):
    for key in keys:
        value = params.get(key)
        if value is not None:
            _require(isinstance(value, (int, float)) and value > 0, f"--{key.replace('_', '-')} must be positive")


def _floats(text, name):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--{name} must be a comma-separated list of numbers") from None


def _write(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands ----------------------------------------------------------------


def cmd_gen_mdp(p):
    _require(p["states"] is not None and p["actions"] is not None, "--states and --actions are required")
    _require(p["out"] is not None, "--out is required")
    _positive(p, "states", "actions", "branching")
    branching = p["branching"] if p["branching"] is not None else p["states"]
    _require(branching <= p["states"], f"branching exceeds states ({branching} > {p['states']})")
    spec = RandomMdpSpec(p["states"], p["actions"], branching, p["reward_style"], True, p["seed"])
    mdp = generate_random_mdp(spec)
    save_mdp(mdp, p["out"])
    if p["with_expert"]:
        expert = make_expert(mdp, derive_seed(p["seed"], 0))
        print(f"tau_mix {expert.tau_mix} expert_actions {expert.policy.actions.tolist()}")
    return EXIT_OK


def _load(path) -> FiniteMdp:
    _require(path is not None, "an MDP file is required")
    try:
        return load_mdp(path)
    except OSError as exc:
        raise UsageError(f"cannot read MDP file: {exc}") from None


def _expert(mdp, p):
    _require(p["expert"] in EXPERTS, f"--expert must be one of {', '.join(EXPERTS)}")
    if p["expert"] == "optimal":
        return optimal_expert(mdp)
    return make_expert(mdp, derive_seed(p["seed"], 0))


def cmd_imitate(p):
    mdp = _load(p["mdp_file"])
    _positive(p, "samples")
    expert = _expert(mdp, p)
    dataset = sample_trajectory(mdp, expert.policy, int(p["samples"]), derive_seed(p["seed"], 1))
    if p["method"] == "ilr":
        policy = ilr(mdp, dataset).policy
    else:
        policy = behavioral_cloning(mdp, dataset)
    occ = policy_occupancy(mdp, policy)
    report = {
        "method": p["method"],
        "expert": p["expert"],
        "n_samples": dataset.n_samples,
        "seed": p["seed"],
        "tau_mix": expert.tau_mix,
        "expert_actions": expert.policy.actions.tolist(),
        "policy": policy.action_probs.tolist(),
        "intrinsic_gain": expected_reward(occ, intrinsic_reward(mdp, dataset.support)),
        "extrinsic_gain": expected_reward(occ, mdp.reward_table),
        "expert_gain": expected_reward(expert.occupancy, mdp.reward_table),
        "tv_to_expert": total_variation(expert.occupancy, occ),
    }
    _write(p["out"], _dump(report))
    return EXIT_OK


def _verify_instance(p):
    if p["mdp"] is not None:
        mdp = _load(p["mdp"])
        return mdp, make_expert(mdp, derive_seed(p["seed"], 0))
    return fast_mixing_instance(p["states"], p["actions"], p["branching"], p["seed"])


def _two_state_chain_mdp():
    t = np.array([[[0.9, 0.1]], [[0.2, 0.8]]])
    return FiniteMdp(t, np.zeros((2, 1)), 0)


def cmd_verify(p):
    check = p["check"]
    _require(check in CHECKS, f"check must be one of {', '.join(CHECKS)}")
    _positive(p, "trials", "samples", "samples_override", "states", "actions", "branching",
              "eta", "delta", "epsilon")
    _require(0 < p["eta"] <= 1, "--eta must lie in (0, 1]")
    _require(0 < p["delta"] < 1, "--delta must lie in (0, 1)")
    _require(p["branching"] <= p["states"], "branching exceeds states")
    trials = int(p["trials"] or DEFAULT_TRIALS[check])
    seed = p["seed"]

    if check == "tv-duality":
        report = check_tv_duality(trials, seed=seed)
    elif check == "lemma3":
        report = check_tv_decay(trials, max_states=p["states"] if p["states"] != 5 else 15, seed=seed)
    elif check == "lemma4":
        mdp = _load(p["mdp"]) if p["mdp"] else _two_state_chain_mdp()
        expert = make_expert(mdp, derive_seed(seed, 0))
        report = check_lemma4(mdp, expert, int(p["samples"] or 10_000), p["epsilon"], trials, seed)
    elif check == "lemma5":
        report = check_support_gain_suite(trials, p["states"], p["actions"], p["branching"],
                                    int(p["samples"] or 2000), seed)
    elif check == "lemma7":
        mdp, expert = _verify_instance(p)
        policy = random_ergodic_policy(mdp, generator(derive_seed(seed, 1)))
        report = check_lemma7(mdp, expert, policy, trials, derive_seed(seed, 2))
    elif check == "prop1":
        mdp, expert = _verify_instance(p)
        plan = plan_from_proposition1(mdp, expert, p["eta"], p["delta"], trials, seed)
        report = check_proposition1(mdp, expert, plan, samples_override=p["samples_override"])
    else:
        probs = _floats(p["expert_probs"], "expert-probs")
        _require(probs and min(probs) >= 0 and abs(sum(probs) - 1) <= 1e-12,
                 "--expert-probs must be a probability vector")
        report = stochastic_expert_demo(seed, probs, int(p["samples"] or 10_000))

    print(report.summary_line())
    if p["out"] is not None:
        out = Path(p["out"])
        out.write_text(report.to_json(), encoding="utf-8")
        out.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_sweep(p):
    mdp = _load(p["mdp_file"])
    _positive(p, "trials", "samples")
    fractions = _floats(p["fractions"], "fractions")
    _require(fractions and all(0 < f <= 1 for f in fractions), "--fractions must lie in (0, 1]")
    methods = [m.strip().upper() for m in str(p["methods"]).split(",") if m.strip()]
    _require(methods and set(methods) <= set(METHODS), "--methods must be a subset of ILR,BC")
    expert = _expert(mdp, p)
    rows = run_sweep(mdp, expert, fractions, methods, int(p["trials"]), p["seed"], int(p["samples"]))
    _write(p["out"], rows_to_csv(rows))
    return EXIT_OK


COMMANDS = {"gen-mdp": cmd_gen_mdp, "imitate": cmd_imitate, "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        params = resolve_config(args)
        return COMMANDS[args.command](params)
    except (UsageError, InvalidMdpError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IlrLabError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
