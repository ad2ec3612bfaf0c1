"""One full optimizer run on the composite benchmark, with the
distribution audit that is the method's selling point.

Watch the score-aware step size shrink as the score climbs, and check at
the end that the optimized latent is still indistinguishable from a
fresh standard-normal draw.
"""

import numpy as np

from noisediff import (
    NoiseDiffusionConfig,
    RngStream,
    distribution_report,
    run_noise_diffusion,
    sample_standard_normal,
)
from noisediff.benchmarks import composite_benchmark

pipeline, scorer = composite_benchmark(timesteps=10)
seed = 3
z0 = sample_standard_normal(RngStream(seed, "init"), pipeline.dim)

record = run_noise_diffusion(
    z0, pipeline, scorer,
    NoiseDiffusionConfig(epochs=50, candidates=50, record_latents=True),
    RngStream(seed, "candidates"),
)

print("epoch  score   best    gamma   ratio     |grad|")
for row in record.rows:
    if row.epoch % 5 == 0:
        gamma = f"{row.gamma:.3f}" if row.gamma is not None else "  -  "
        ratio = f"{row.selected_ratio:+.4f}" if row.selected_ratio is not None else "   -   "
        grad = f"{row.grad_norm:.4f}" if row.grad_norm is not None else "  -  "
        print(f"{row.epoch:5d}  {row.score:.4f}  {row.best_score:.4f}  {gamma}  {ratio}  {grad}")

print(f"\nbest score {record.best_score:.4f} first reached at epoch {record.epochs_to(record.best_score)}")
print(f"reached 0.9 at epoch {record.epochs_to(0.9)}")

print("\ndistribution audit of the trajectory (the latent must stay N(0, I)):")
for epoch in (0, 10, 25, 50):
    rep = distribution_report(record.latents[epoch])
    print(f"  epoch {epoch:2d}: mean {rep.mean:+.4f}  var {rep.variance:.4f}  "
          f"KS p {rep.ks_pvalue:.3f}")

drift = np.linalg.norm(record.final_latent - z0)
print(f"\nlatent moved {drift:.2f} in norm (typical distance between two")
print(f"independent draws here is ~{np.sqrt(2 * pipeline.dim):.2f}) - a global move,")
print("not a local perturbation, yet the marginals above stayed Gaussian.")
