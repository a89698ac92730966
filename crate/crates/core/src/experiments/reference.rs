//! Published reference metrics for the three protocols on the original
//! capture corpus. They are attached to reports for comparison only.

/// Experiment 1: `(cap, removed, used, val_acc, val_f1, test_acc, test_f1)`, percentages.
pub const EXP1: [(usize, usize, usize, f64, f64, f64, f64); 5] = [
    (100, 19, 280, 58.00, 66.68, 58.63, 68.51),
    (150, 2, 297, 61.17, 69.06, 58.86, 69.37),
    (200, 0, 299, 61.28, 72.85, 65.57, 77.20),
    (250, 0, 299, 62.00, 71.46, 62.58, 73.80),
    (300, 0, 299, 60.72, 67.69, 59.57, 68.74),
];

pub const EXP2_CAPS: [usize; 5] = [100, 150, 200, 250, 300];

/// Experiment 2 validation accuracy and F1 per cap in [`EXP2_CAPS`] order;
/// the filter denominator is `None` for the unfiltered row and `None`
/// entries were not trained.
pub type Exp2Row = (Option<u32>, [Option<f64>; 5], [Option<f64>; 5]);

pub const EXP2: [Exp2Row; 7] = [
    (
        None,
        [Some(58.00), Some(61.17), Some(61.28), Some(62.00), Some(60.72)],
        [Some(66.68), Some(69.06), Some(72.85), Some(71.46), Some(67.69)],
    ),
    (Some(10), [None, None, None, Some(60.96), Some(63.50)], [None, None, None, Some(68.74), Some(72.25)]),
    (
        Some(9),
        [None, None, Some(63.20), Some(64.87), Some(61.25)],
        [None, None, Some(73.78), Some(74.61), Some(68.82)],
    ),
    (
        Some(8),
        [None, None, Some(57.14), Some(61.62), Some(60.96)],
        [None, None, Some(63.36), Some(72.67), Some(74.50)],
    ),
    (
        Some(7),
        [None, Some(65.00), Some(63.48), Some(60.54), Some(59.96)],
        [None, Some(74.81), Some(77.22), Some(69.78), Some(69.68)],
    ),
    (
        Some(6),
        [None, Some(62.60), Some(61.71), Some(56.75), Some(62.00)],
        [None, Some(73.22), Some(70.28), Some(60.95), Some(74.00)],
    ),
    (
        Some(5),
        [None, Some(62.10), Some(61.75), Some(62.92), Some(61.16)],
        [None, Some(70.13), Some(69.74), Some(77.18), Some(68.25)],
    ),
];

/// Experiment 3: `(denominator, cap, users, used_pct, val_acc, val_f1, test_acc, test_f1)`.
pub const EXP3: [(u32, usize, usize, f64, f64, f64, f64, f64); 10] = [
    (7, 200, 10, 95.32, 63.48, 77.22, 65.55, 78.62),
    (7, 200, 20, 93.50, 63.76, 76.61, 66.00, 78.74),
    (7, 200, 30, 93.31, 63.46, 75.84, 65.81, 77.65),
    (7, 200, 40, 93.65, 64.85, 75.99, 65.97, 77.41),
    (7, 200, 50, 92.50, 64.24, 74.64, 66.12, 76.91),
    (5, 250, 10, 99.00, 62.92, 77.18, 66.15, 79.52),
    (5, 250, 20, 98.83, 63.16, 75.20, 64.72, 77.08),
    (5, 250, 30, 98.89, 61.83, 75.89, 65.87, 78.90),
    (5, 250, 40, 99.08, 62.76, 74.51, 62.76, 75.06),
    (5, 250, 50, 98.80, 61.83, 74.23, 66.06, 77.87),
];
