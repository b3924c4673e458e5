"""Behavioral simulator for a Hamming-distance-tolerant content-addressable memory.

Submodules:

- :mod:`hdcam.bitcam`     packed words, Hamming distance, digital search oracle
- :mod:`hdcam.matchline`  matchline discharge law, thresholds, energy, throughput
- :mod:`hdcam.variation`  Monte-Carlo corners/jitter, sensitivity/specificity
- :mod:`hdcam.genomics`   FASTA, k-mer databases, read simulation, classification
- :mod:`hdcam.dbfile`     on-disk k-mer database format
- :mod:`hdcam.cli`        ``hdcam`` command line
"""

from .bitcam import BitWord, CamArray, hamming_distance, oracle_match, search_oracle, store
from .matchline import (PUBLISHED_MT_TABLE, PUBLISHED_ENERGY_TABLE, DischargeLaw, EnergyTable, MatchlineParams,
                        calibrate, continuous_mt, decide, energy_per_bit, ml_voltage, nominal_mt, throughput)
from .variation import (CORNERS, FF, SS, TT, ConfusionCounts, Corner, MatchCurve, UncertaintyRegion,
                        VariationSpec, corner_compensation, match_probability_curve, sample_trial,
                        sens_spec_vs_hd, sensitivity, specificity, uncertainty_region)
from .genomics import (GRAY3, ONE_HOT4, ClassificationReport, Encoding, Genome, KmerDb,
                       ReadErrorProfile, build_db, classify_exact, classify_read, decode, encode,
                       evaluate, extract_kmers, LabeledSample, parse_fasta, random_genome,
                       simulate_read, simulate_reads)

__version__ = "0.1.0"
