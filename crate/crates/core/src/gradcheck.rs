//! Central finite-difference gradient checking in double precision.

use std::fmt;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Above this many elements, a seeded random subsample of this size is
    /// checked instead of every element.
    pub max_samples: usize,
    pub seed: u64,
    /// Lower bound on the relative-error denominator, so that elements whose
    /// true gradient is zero are judged on absolute error.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            max_samples: 2048,
            seed: 0,
            floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Element with the largest relative error.
    pub worst_index: Option<usize>,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    /// Elements dropped because the loss declined one of their perturbations.
    pub skipped: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }

    /// Combine two reports, keeping the worse one. Indices are left as-is.
    pub fn merge(self, other: GradCheckReport) -> GradCheckReport {
        let checked = self.checked + other.checked;
        let skipped = self.skipped + other.skipped;
        let mut worst = if other.max_relative_error > self.max_relative_error {
            other
        } else {
            self
        };
        worst.checked = checked;
        worst.skipped = skipped;
        worst
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.worst_index {
            Some(i) => write!(
                f,
                "max relative error {:.3e} at element {} (analytic {:.6e}, numeric {:.6e}) over {} elements ({} skipped)",
                self.max_relative_error, i, self.analytic, self.numeric, self.checked, self.skipped
            ),
            None => write!(f, "no elements checked"),
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against central differences of `loss` around `point`.
///
/// `loss` receives the perturbed point; `analytic[i]` must be `∂loss/∂point[i]`.
pub fn grad_check(
    mut loss: impl FnMut(&[f64]) -> f64,
    point: &[f64],
    analytic: &[f64],
    opts: &GradCheckOptions,
) -> GradCheckReport {
    grad_check_where_smooth(|x| Some(loss(x)), point, analytic, opts)
}

/// Like [`grad_check`], but `loss` may return `None` for a perturbed point
/// it cannot difference through (a ReLU kink between the two sides, say).
/// The element is then skipped and counted in [`GradCheckReport::skipped`].
pub fn grad_check_where_smooth(
    mut loss: impl FnMut(&[f64]) -> Option<f64>,
    point: &[f64],
    analytic: &[f64],
    opts: &GradCheckOptions,
) -> GradCheckReport {
    assert_eq!(point.len(), analytic.len(), "point and gradient lengths differ");
    let indices: Vec<usize> = if point.len() > opts.max_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut picked = index::sample(&mut rng, point.len(), opts.max_samples).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..point.len()).collect()
    };

    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: None,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
        skipped: 0,
        tolerance: opts.tolerance,
    };
    for i in indices {
        let orig = x[i];
        x[i] = orig + opts.step;
        let plus = loss(&x);
        x[i] = orig - opts.step;
        let minus = loss(&x);
        x[i] = orig;
        let (Some(plus), Some(minus)) = (plus, minus) else {
            report.skipped += 1;
            continue;
        };
        report.checked += 1;
        let numeric = (plus - minus) / (2.0 * opts.step);
        let err = relative_error(analytic[i], numeric, opts.floor);
        if report.worst_index.is_none() || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_index = Some(i);
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
    }
    report
}
