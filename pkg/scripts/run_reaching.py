"""Reaching experiment: importance-weighted vs unweighted priors.

Synthesizes eight 2-D demos toward a shared goal (four detour over a disc),
drives the CLI pipeline for both the weighted and unweighted variants, and
reports how far each prior mean strays from the straight-line intent plus
the path-length ratio of obstacle-free reproductions from a new start.

Usage: python scripts/run_reaching.py [--out results/reaching]
"""

import argparse
import os
import sys

import numpy as np

from iwskill.cli import main as cli_main
from iwskill.demos import save_raw_demo
from iwskill.environment import environment_to_dict
from iwskill.synthetic import (make_reaching_scene, max_deviation_from_segment,
                               path_length)
from iwskill.utils import write_json


def write_scene(scene, out_dir: str, new_start) -> str:
    demo_paths = []
    for k, demo in enumerate(scene.raw_demos):
        path = os.path.join(out_dir, f"demo_{k:03d}.json")
        save_raw_demo(path, demo)
        demo_paths.append(os.path.basename(path))
    write_json(os.path.join(out_dir, "env_learning.json"),
               environment_to_dict(scene.env))
    config = {
        "demos": demo_paths,
        "environment": "env_learning.json",
        "grid_n": 60,
        "align": "none",
        "weights": {"epsilon": scene.weight_params.epsilon,
                    "sigma_obs": scene.weight_params.sigma_obs},
        "seed": 0,
        "out_dir": ".",
        "reproduction": {
            "starts": [list(new_start)],
            "start_sigma": 1e-3,
        },
    }
    cfg_path = os.path.join(out_dir, "config.json")
    write_json(cfg_path, config)
    return cfg_path


def load_solution(path: str) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    return rows[:, 1:]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/reaching")
    args = parser.parse_args()

    scene = make_reaching_scene()
    os.makedirs(args.out, exist_ok=True)
    new_start = [0.0, 0.5, 3.0, 1.0]
    cfg_path = write_scene(scene, args.out, new_start)

    results = {}
    for label, extra in (("weighted", []), ("unweighted", ["--no-weighting"])):
        out_dir = os.path.join(args.out, label)
        base = ["--config", cfg_path, "--out", out_dir] + extra
        for step in (["learn"], ["rollout", "--model", os.path.join(out_dir, "model.json")],
                     ["reproduce", "--model", os.path.join(out_dir, "model.json")]):
            code = cli_main(base + step)
            if code != 0:
                print(f"{label} {step[0]} failed with exit code {code}", file=sys.stderr)
                return code
        prior = np.loadtxt(os.path.join(out_dir, "prior.csv"), delimiter=",", skiprows=1)
        means = prior[:, 1:3]
        start = means[0]
        deviation = max_deviation_from_segment(means, start, scene.goal)
        solution = load_solution(os.path.join(out_dir, "solution_000.csv"))
        results[label] = {"deviation": deviation,
                          "path_length": path_length(solution[:, :2])}
        print(f"{label}: max deviation from intent {deviation:.4f}, "
              f"reproduction path length {results[label]['path_length']:.4f}")

    ratio = results["weighted"]["deviation"] / results["unweighted"]["deviation"]
    plr = results["weighted"]["path_length"] / results["unweighted"]["path_length"]
    print(f"deviation ratio (weighted/unweighted): {ratio:.3f}")
    print(f"reproduction path-length ratio:        {plr:.3f}")
    write_json(os.path.join(args.out, "summary.json"),
               {"deviation_ratio": ratio, "path_length_ratio": plr, **results})
    return 0


if __name__ == "__main__":
    sys.exit(main())
