"""Fit Gaussians to pair similarities before and after training and suggest loss parameters.

Writes histogram CSVs (bin_center,pos_density,neg_density,log_ratio) for the
untrained and trained encoders on the held-out classes.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from cbml.bayes import fit_similarity_gaussians, linear_ratio_fit
from cbml.dataio import load_config, split_by_class, synth_blobs
from cbml.errors import DegenerateFit
from cbml.evaluation import embed_and_normalize, similarity_histogram
from cbml.experiments import initial_encoder, train_and_evaluate
from cbml.geometry import similarity_matrix
from cbml.loss import suggest_parameters
from cbml.pairs import partition_pairs

ROOT = Path(__file__).resolve().parents[1]


def _describe(tag, encoder, ds, bins, out_dir):
    sims = similarity_matrix(embed_and_normalize(encoder, ds.features))
    fit = fit_similarity_gaussians(sims, *partition_pairs(ds.labels))
    lin = linear_ratio_fit(fit)
    print(f"{tag}: pos N({fit.mu_pos:.3f}, {fit.sigma_pos:.3f})  neg N({fit.mu_neg:.3f}, {fit.sigma_neg:.3f})  "
          f"log-ratio slope {lin.zeta:.2f}")
    try:
        a_p, b_p, a_n, b_n = suggest_parameters(fit)
        print(f"  suggested alpha_pos={a_p:.3f} beta_pos={b_p:.4f} alpha_neg={a_n:.3f} beta_neg={b_n:.4f}")
    except DegenerateFit as exc:
        print(f"  no suggestion: {exc}")
    similarity_histogram(sims, ds.labels, bins).write_csv(out_dir / f"hist_{tag}.csv")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(ROOT / "configs" / "mvc_trend.cfg"))
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--out-dir", default=".")
    args = p.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)
    ds = synth_blobs(8, 50, 16, noise_sigma=0.3, seed=0)
    _, test_ds = split_by_class(ds, 0.5)
    _describe("untrained", initial_encoder(cfg, ds.dim), test_ds, args.bins, out_dir)
    for lam in (0.0, 1.0):
        outcome = train_and_evaluate(ds, replace(cfg, loss=replace(cfg.loss, lambda_=lam)))
        _describe(f"lambda{lam:g}", outcome.encoder, test_ds, args.bins, out_dir)


if __name__ == "__main__":
    main()
