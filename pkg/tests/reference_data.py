"""Frozen numeric fixtures used across the test suite.

The confusion matrices and the reported metric values come from the
published screening-evaluation results this toolkit reproduces. Row sums of
each validation confusion matrix equal the per-grade validation counts of
the dataset-division table, which the tests use as a transcription
integrity check.
"""

# per-grade validation-set image counts, keyed by system
VALIDATION_ROW_SUMS = {
    "pirc": (3229, 842, 2597, 382, 79),
    "pimec": (6162, 465, 438, 239),
    "qrdr": (1132, 4009, 3085),
}

# confusion matrices on the validation set: rows ground truth, columns
# predictions, keyed by (system, input size)
CONFUSION = {
    ("pirc", 256): ((2982, 147, 99, 0, 1),
                    (500, 250, 92, 0, 0),
                    (343, 187, 2040, 27, 0),
                    (13, 8, 279, 82, 0),
                    (3, 0, 51, 24, 1)),
    ("pirc", 299): ((3027, 142, 60, 0, 0),
                    (438, 283, 121, 0, 0),
                    (197, 198, 2128, 74, 0),
                    (6, 5, 215, 154, 2),
                    (4, 0, 45, 25, 5)),
    ("pirc", 512): ((3178, 36, 15, 0, 0),
                    (296, 440, 104, 2, 0),
                    (114, 201, 2088, 193, 1),
                    (3, 3, 119, 256, 1),
                    (4, 0, 21, 40, 14)),
    ("pirc", 1024): ((3106, 95, 28, 0, 0),
                     (149, 579, 111, 0, 3),
                     (54, 195, 2257, 89, 2),
                     (4, 2, 138, 222, 16),
                     (4, 0, 16, 18, 41)),
    ("pirc", 2095): ((3185, 27, 16, 1, 0),
                     (169, 517, 156, 0, 0),
                     (81, 143, 2304, 69, 0),
                     (3, 1, 188, 189, 1),
                     (4, 0, 25, 47, 3)),
    ("pimec", 256): ((6053, 49, 38, 22),
                     (98, 332, 32, 3),
                     (80, 61, 259, 38),
                     (30, 10, 66, 133)),
    ("pimec", 299): ((5977, 79, 70, 36),
                     (64, 353, 42, 6),
                     (63, 45, 295, 35),
                     (21, 9, 95, 114)),
    ("pimec", 512): ((6015, 51, 78, 18),
                     (60, 374, 29, 2),
                     (57, 49, 317, 15),
                     (19, 8, 91, 121)),
    ("pimec", 1024): ((6078, 45, 29, 10),
                      (63, 364, 36, 2),
                      (70, 55, 268, 45),
                      (30, 6, 67, 136)),
    ("pimec", 2095): ((6024, 68, 51, 19),
                      (42, 388, 29, 6),
                      (47, 69, 262, 60),
                      (14, 6, 71, 148)),
    ("qrdr", 256): ((1084, 45, 3),
                    (18, 3736, 255),
                    (0, 401, 2684)),
    ("qrdr", 299): ((1093, 38, 1),
                    (35, 3717, 257),
                    (0, 311, 2774)),
    ("qrdr", 512): ((1108, 22, 2),
                    (50, 3786, 173),
                    (1, 271, 2813)),
    ("qrdr", 1024): ((1115, 16, 1),
                     (78, 3732, 199),
                     (0, 218, 2867)),
    ("qrdr", 2095): ((1069, 63, 0),
                     (22, 3926, 61),
                     (1, 472, 2612)),
}

# reported multiclass metrics, keyed by (system, input size)
REPORTED_ACCURACY = {
    ("pirc", 256): 0.751, ("pirc", 299): 0.785, ("pirc", 512): 0.838,
    ("pirc", 1024): 0.870, ("pirc", 2095): 0.869,
    ("qrdr", 256): 0.912, ("qrdr", 299): 0.922, ("qrdr", 512): 0.937,
    ("qrdr", 1024): 0.938, ("qrdr", 2095): 0.925,
    ("pimec", 256): 0.928, ("pimec", 299): 0.923, ("pimec", 512): 0.935,
    ("pimec", 1024): 0.937, ("pimec", 2095): 0.934,
}

REPORTED_KAPPA = {
    ("pirc", 256): 0.772, ("pirc", 299): 0.834, ("pirc", 512): 0.894,
    ("pirc", 1024): 0.915, ("pirc", 2095): 0.910,
    ("qrdr", 256): 0.901, ("qrdr", 299): 0.914, ("qrdr", 512): 0.930,
    ("qrdr", 1024): 0.932, ("qrdr", 2095): 0.914,
    ("pimec", 256): 0.813, ("pimec", 299): 0.803, ("pimec", 512): 0.832,
    ("pimec", 1024): 0.846, ("pimec", 2095): 0.856,
}

# the rdr validation set at the largest input size: counts reconstructed
# from the reported rates and class sizes (n_pos 3087, n_neg 4031)
RDR_2095_COUNTS = {"tp": 2766, "fn": 321, "tn": 3926, "fp": 105, "n": 7118}

# reported binary metrics with their 95% intervals for that row
RDR_2095_REPORTED = {
    "sensitivity": (0.896, 0.885, 0.907),
    "specificity": (0.974, 0.969, 0.979),
    "accuracy": (0.940, 0.935, 0.946),
    "auc": (0.987, 0.984, 0.989),
}

# reported binary AUC rows (auc, lo, hi, n) that the proportion-mode
# interval reproduces at 3 decimals (dev-verified subset)
AUC_PROPORTION_ROWS = [
    ("rdr", 256, 0.961, 0.956, 0.965, 7118),
    ("rdr", 299, 0.970, 0.966, 0.974, 7118),
    ("rdr", 512, 0.979, 0.975, 0.982, 7118),
    ("rdr", 1024, 0.984, 0.981, 0.987, 7118),
    ("rdr", 2095, 0.987, 0.984, 0.989, 7118),
    ("rdme", 512, 0.986, 0.983, 0.989, 7304),
    ("rdme", 1024, 0.986, 0.983, 0.989, 7304),
    ("rdme", 2095, 0.989, 0.986, 0.991, 7304),
]

# dataset-division counts for the rdr system: (patients, images, grade-0
# images, grade-1 images) per set, train/tune/validation
RDR_DIVISION = {
    "train": (8694, 24806, 13895, 10911),
    "tune": (1313, 3706, 2079, 1627),
    "validation": (2477, 7118, 4031, 3087),
}
