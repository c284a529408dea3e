"""Phase-estimate spread vs probe count for independent and GHZ probes."""
import argparse

from qsensim.experiments import scaling_experiment


def cli():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--phi", type=float, default=0.1)
    ap.add_argument("--shots", type=int, default=10_000)
    ap.add_argument("--repetitions", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("mode,n,delta_phi,mean_phi")
    for i, mode in enumerate(("unentangled", "ghz")):
        res = scaling_experiment(args.n, args.phi, args.shots, mode, args.repetitions, args.seed + i)
        for n, d, m in zip(res.n_list, res.delta_phi, res.mean_phi):
            print(f"{mode},{n},{d:.6g},{m:.6g}")
        print(f"# {mode} log-log slope {res.slope:.3f}")


if __name__ == "__main__":
    cli()
