"""A short end-to-end run: train adapters + head on three source domains,
evaluate on the held-out one with a source-calibrated threshold.

Takes a couple of minutes on one CPU core.

Run:  python demos/08_training_demo.py [out_dir]
"""

import sys
import tempfile

from histadapter.config import load_config
from histadapter.training import evaluate_run, train_run

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="histadapter-")

cfg = load_config(None, {
    "out": out,
    "epochs": "25",
    "batch_size": "16",
    "lr": "0.002",          # random frozen backbone wants a larger step than
    "variant": "full",      # the 1e-4 used when adapting pre-trained weights
    "lambda": "0.1",
    "train_per_class": "24",
    "test_per_class": "48",
    "seed": "0",
})
print("training:", cfg.variant, "adapter, lambda =", cfg.tsr_lambda,
      "theta =", cfg.theta, "->", out)
result = train_run(cfg)
print("final epoch losses   :",
      {k: round(v, 4) for k, v in result.final_losses.items()})
print("training log         :", result.log_path)

report = evaluate_run(cfg, result.checkpoint_path)
print("\nheld-out domain metrics (threshold fixed on source validation):")
print(f"  AUC  = {report.auc:.3f}")
print(f"  EER  = {report.eer:.3f}")
print(f"  HTER = {report.hter:.3f}")
print(f"  TPR@FPR=1% = {report.tpr_at_fpr1:.3f}")
print(f"  APCER/BPCER/ACER @0.5 = "
      f"{report.apcer:.3f}/{report.bpcer:.3f}/{report.acer:.3f}")
