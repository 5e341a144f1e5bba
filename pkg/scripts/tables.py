"""Print the ablation grid or bench curves from a finished run directory."""
import argparse
import json
import os


def ablation(rep):
    print(f"{'tokens':<10}{'mask':<8}{'delta_m':>10}  per-task")
    for row in rep["rows"]:
        per = " ".join(f"{v:+.3f}" for v in row["per_task_delta"])
        print(f"{row['tokens']:<10}{row['mask']:<8}{row['delta_m']:>+10.4f}  {per}")


def bench(rep):
    print(f"sweep over {rep['axis']} with seeds {rep['seeds']}")
    for point in rep["points"]:
        for name, m in point["models"].items():
            print(f"{json.dumps(point['value']):<14}{name:<16}{m['mean_delta_m']:>+10.4f} ± {m['stderr']:.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("run_dir")
    args = ap.parse_args()
    with open(os.path.join(args.run_dir, "report.json")) as fh:
        rep = json.load(fh)
    {"ablate": ablation, "bench": bench}[rep["command"]](rep)


if __name__ == "__main__":
    main()
