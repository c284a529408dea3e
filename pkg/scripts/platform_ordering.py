"""Mean radar accuracy per platform over several seeds (3 + 3 sensors)."""
import argparse
import math

import numpy as np

from qsensim.experiments import ExperimentConfig, run_many
from qsensim.noise import PLATFORMS


def cli():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--shots", type=int, default=10**6)
    args = ap.parse_args()
    print("platform,mean_accuracy_pct,std_err")
    for p in PLATFORMS:
        cfg = ExperimentConfig(kind="radar", platform=p, shots=args.shots)
        acc = np.array([r.accuracy_pct for r in run_many(cfg, range(args.seeds))])
        print(f"{p},{acc.mean():.3f},{acc.std(ddof=1) / math.sqrt(len(acc)):.3f}")


if __name__ == "__main__":
    cli()
