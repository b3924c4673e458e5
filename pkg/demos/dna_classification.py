"""
Classifying noisy DNA reads
===========================

A viral-sized reference is cut into 64-mers, each stored as a 256-bit CAM
row. Reads with sequencing errors are positive when some row is within the
basepair threshold. An exact-match lookup is the baseline. A synthetic
random genome stands in for a downloaded reference so the script runs
offline; ``hdcam fetch NC_045512.2`` gets the real one.
"""

from hdcam import (LabeledSample, build_db, evaluate, random_genome, simulate_reads)

reference = random_genome(29_903, seed=2020, accession="reference")
unrelated = random_genome(29_903, seed=1918, accession="unrelated")
db = build_db(reference, k=64)
print(f"{db.row_count} rows x {db.width} bits")

positives = simulate_reads(reference, 5000, seed=1)
negatives = simulate_reads(unrelated, 5000, seed=2)
print("mean substitutions per read:", sum(r.substitutions for r in positives) / len(positives))

samples = [LabeledSample("reference reads", tuple(r.sequence for r in positives), True),
           LabeledSample("unrelated reads", tuple(r.sequence for r in negatives), False)]
report = evaluate(samples, db, [0, 2, 4, 8, 12, 16], threads=4)

###############################################################################
# Threshold 0 is the exact-match baseline; tolerating a few mismatches
# recovers most reads without admitting unrelated ones.

for r in report.results:
    print(f"threshold {r.threshold_bp:>2} bp: sensitivity {r.sensitivity:.3f}, specificity {r.specificity:.3f}")
