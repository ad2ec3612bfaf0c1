"""Empirical side of the improvement guarantee.

If the score landscape has curvature bound c and a step v aligns with
the gradient strongly enough (grad . v / ||v||^2 >= c/2 + delta), the
score must rise by at least delta ||v||^2. This demo estimates c by
probing, compares with the closed-form bound, stress-tests the guarantee,
and shows how candidate count moves the selection-ratio quartiles.
"""

import numpy as np

from noisediff import (
    NoiseDiffusionConfig,
    QuadraticSigmoidScorer,
    RngStream,
    check_improvement_condition,
    estimate_hessian_bound,
    ratio_quartiles,
    run_noise_diffusion,
    sample_standard_normal,
)
from noisediff.benchmarks import composite_benchmark

d = 8
scorer = QuadraticSigmoidScorer(target=np.zeros(d), sharpness=0.5, offset=1.0)

analytic = scorer.hessian_bound()
print(f"analytic curvature bound: {analytic:.4f}")
for probes in (100, 1000, 10000):
    est = estimate_hessian_bound(lambda x: float(scorer.score(x)),
                                 np.zeros(d), 3.0, probes, RngStream(0, "hess"))
    print(f"  probe estimate ({probes:5d} probes): {est:.4f}"
          f"  -> with x2 safety factor: {2 * est:.4f}")

# Stress the guarantee with steps built to satisfy the ratio condition.
delta = 0.01
threshold = analytic / 2 + delta
gen = np.random.default_rng(0)
checked = violations = 0
worst_margin = np.inf
while checked < 5000:
    z = gen.standard_normal(d) * 1.2
    g = scorer.gradient(z)
    if np.linalg.norm(g) < 1e-2:
        continue
    vhat = g / np.linalg.norm(g) + 0.3 * gen.standard_normal(d)
    vhat /= np.linalg.norm(vhat)
    align = float(g @ vhat)
    if align <= 1e-2:
        continue
    v = gen.uniform(0.05, 1.0) * align / threshold * vhat
    rep = check_improvement_condition(float(scorer.score(z)), float(scorer.score(z + v)),
                                      g, v, analytic, delta)
    if rep.triggered:
        checked += 1
        violations += not rep.satisfied
        worst_margin = min(worst_margin, rep.actual - rep.predicted_floor)
print(f"\nguarantee check: {violations} violations in {checked} qualifying steps")
print(f"  tightest margin above the floor: {worst_margin:.2e}")

# More candidates push the selected-ratio quartiles up.
pipeline, bench_scorer = composite_benchmark(timesteps=10)
print("\nselected-ratio quartiles vs candidate count (10 seeds):")
for n in (10, 20, 50):
    recs = []
    for seed in range(10):
        z0 = sample_standard_normal(RngStream(seed, "init"), pipeline.dim)
        recs.append(run_noise_diffusion(z0, pipeline, bench_scorer,
                                        NoiseDiffusionConfig(epochs=50, candidates=n),
                                        RngStream(seed, "candidates")))
    q1, med, q3 = ratio_quartiles(recs)
    print(f"  N={n:2d}: Q1 {q1:.4f}  median {med:.4f}  Q3 {q3:.4f}")
