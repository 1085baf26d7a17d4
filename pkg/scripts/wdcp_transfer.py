"""Drive the warehouse problem with a policy trained on DTLZ2, without any
retraining: base scenario plus the three sensitivity variants.

Example:
    python scripts/wdcp_transfer.py --policy runs/dtlz2/train/policy.txt
"""

import argparse
from dataclasses import replace
from pathlib import Path

from adaptmoea.harness import FIXED_LABEL, cmd_eval, cmd_sensitivity, load_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--policy", required=True)
    ap.add_argument("--config", default=str(CONFIGS / "wdcp_transfer.yaml"))
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="runs/wdcp")
    ap.add_argument("--skip-variants", action="store_true")
    args = ap.parse_args()

    base = load_config(args.config)
    kwargs = dict(base.problem_kwargs)
    if "scenario_file" in kwargs and not Path(kwargs["scenario_file"]).is_absolute():
        kwargs["scenario_file"] = str(CONFIGS.parent / kwargs["scenario_file"])
    cfg = replace(base, problem_kwargs=kwargs, mode="eval-trained", policy=args.policy,
                  seeds=list(range(args.seeds)), workers=args.workers, out=str(Path(args.out) / "base"))
    rep = cmd_eval(cfg, ["eval-trained", "eval-fixed"])
    t, f = rep.modes["trained"].median_max_hv, rep.modes[FIXED_LABEL].median_max_hv
    print(f"base scenario: trained {t:.4f}  fixed {f:.4f}")
    if args.skip_variants:
        return
    sens = replace(cfg, out=str(Path(args.out) / "sensitivity"))
    wins = 0
    for variant, r in cmd_sensitivity(sens).items():
        t, f = r.modes["trained"].median_max_hv, r.modes[FIXED_LABEL].median_max_hv
        wins += t >= f
        print(f"{variant:20s}: trained {t:.4f}  fixed {f:.4f}")
    print(f"trained not worse on {wins} of 3 variants")


if __name__ == "__main__":
    main()
