//! Exponentiated-Weibull density with a scale parameter, maximum-likelihood
//! fitting, and per-level foreground/background model pairs.
//!
//! With `t = x / lambda` the density is
//!
//! ```text
//! f(x; a, c, lambda) = a c / lambda * [1 - exp(-t^c)]^(a-1) * exp(-t^c) * t^(c-1)
//! F(x)               = [1 - exp(-t^c)]^a
//! ```
//!
//! `lambda = 1` gives the two-shape form used on raw errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{ErrorMap, Level};
use crate::geometry::BBox;
use crate::optim::NelderMead;
use crate::rng::Rng;

/// Samples are floored here before any log is taken.
pub const SAMPLE_FLOOR: f64 = 1e-12;
pub const DEFAULT_MIN_SAMPLES: usize = 100;
pub const DEFAULT_MAX_SAMPLES: usize = 100_000;

/// Shape pairs `(a, c)` tried as simplex starts; the scale of each start is
/// chosen so its median equals the sample median.
pub const MULTI_STARTS: [(f64, f64); 5] = [(1.0, 1.0), (2.0, 1.5), (0.5, 2.0), (1.0, 3.0), (4.0, 0.7)];

/// `ln(1 - e^-z)` given `z` and `ln z`, accurate at both ends.
fn ln_one_minus_exp_neg(z: f64, ln_z: f64) -> f64 {
    if ln_z < -30.0 {
        // z may have underflowed; ln(1 - e^-z) = ln z - z/2 + O(z^2)
        ln_z - 0.5 * z
    } else if z < std::f64::consts::LN_2 {
        (-(-z).exp_m1()).ln()
    } else {
        (-(-z).exp()).ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpWeibull {
    pub a: f64,
    pub c: f64,
    pub lambda: f64,
}

impl ExpWeibull {
    pub fn new(a: f64, c: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("c", c), ("lambda", lambda)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!(
                    "exponentiated Weibull {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(Self { a, c, lambda })
    }

    /// Log-density at `x > 0`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.ln_pdf_from_ln(x.ln())
    }

    fn ln_pdf_from_ln(&self, ln_x: f64) -> f64 {
        let ln_t = ln_x - self.lambda.ln();
        let ln_z = self.c * ln_t;
        let z = ln_z.exp();
        // kept in logs: a c / lambda overflows for extreme fits
        self.a.ln() + self.c.ln() - self.lambda.ln() + (self.a - 1.0) * ln_one_minus_exp_neg(z, ln_z) - z
            + (self.c - 1.0) * ln_t
    }

    /// Density at `re >= 0`; `re = 0` uses the analytic limit
    /// (0 when `a c > 1`, `1 / lambda` when `a c = 1`, `+inf` when `a c < 1`).
    pub fn pdf(&self, re: f64) -> Result<f64> {
        if !(re >= 0.0) {
            return Err(Error::Invalid(format!("pdf argument must be >= 0, got {re}")));
        }
        if re == 0.0 {
            let ac = self.a * self.c;
            return Ok(if ac > 1.0 {
                0.0
            } else if ac == 1.0 {
                1.0 / self.lambda
            } else {
                f64::INFINITY
            });
        }
        if re.is_infinite() {
            return Ok(0.0);
        }
        Ok(self.ln_pdf(re).exp())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let ln_z = self.c * (x.ln() - self.lambda.ln());
        (self.a * ln_one_minus_exp_neg(ln_z.exp(), ln_z)).exp()
    }

    /// Quantile function, `u` in `[0, 1]`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        // 1 - u^(1/a), computed without cancellation
        let tail = -(u.ln() / self.a).exp_m1();
        self.lambda * (-tail.ln()).powf(1.0 / self.c)
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.inverse_cdf(rng.uniform())
    }

    pub fn median(&self) -> f64 {
        self.inverse_cdf(0.5)
    }

    pub fn log_likelihood(&self, samples: &ErrorSamples) -> f64 {
        samples
            .values
            .iter()
            .map(|&x| self.ln_pdf(x.max(SAMPLE_FLOOR)))
            .sum()
    }
}

/// Non-empty set of finite, non-negative reconstruction errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSamples {
    pub values: Vec<f64>,
}

impl ErrorSamples {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Sampling("error sample set is empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Sampling(format!(
                "error sample {v} is not finite and non-negative"
            )));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Error values of cells whose centers fall inside a known box (foreground)
/// and inside neither a known nor a pseudo box (background).
pub fn classify_cells(e: &ErrorMap, known: &[BBox], pseudo: &[BBox]) -> (Vec<f64>, Vec<f64>) {
    let stride = e.stride() as f64;
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for i in 0..e.height() {
        for j in 0..e.width() {
            let (cx, cy) = ((j as f64 + 0.5) * stride, (i as f64 + 0.5) * stride);
            if known.iter().any(|b| b.contains_point(cx, cy)) {
                fg.push(e.get(i, j));
            } else if !pseudo.iter().any(|b| b.contains_point(cx, cy)) {
                bg.push(e.get(i, j));
            }
        }
    }
    (fg, bg)
}

fn subsample(values: Vec<f64>, max_samples: usize, rng: &mut Rng) -> Vec<f64> {
    if values.len() <= max_samples {
        return values;
    }
    rng.sample_indices(values.len(), max_samples)
        .into_iter()
        .map(|i| values[i])
        .collect()
}

/// Foreground and background error samples from one error map.
///
/// Boxes are in input pixels; `stride` must match the map's level.
pub fn sample_errors(
    e: &ErrorMap,
    known_boxes: &[BBox],
    pseudo_boxes: &[BBox],
    stride: u32,
    max_samples: usize,
    seed: u64,
) -> Result<(ErrorSamples, ErrorSamples)> {
    if stride != e.stride() {
        return Err(Error::Dimension(format!(
            "stride {stride} does not match error map level {} (stride {})",
            e.level(),
            e.stride()
        )));
    }
    let (fg, bg) = classify_cells(e, known_boxes, pseudo_boxes);
    if fg.is_empty() {
        return Err(Error::Sampling(format!("no foreground cells at {}", e.level())));
    }
    if bg.is_empty() {
        return Err(Error::Sampling(format!("no background cells at {}", e.level())));
    }
    let mut rng = Rng::new(seed);
    let fg = subsample(fg, max_samples, &mut rng);
    let bg = subsample(bg, max_samples, &mut rng);
    Ok((ErrorSamples::new(fg)?, ErrorSamples::new(bg)?))
}

/// Options for [`fit_mle_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub min_samples: usize,
    pub simplex: NelderMead,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_samples: DEFAULT_MIN_SAMPLES,
            simplex: NelderMead::default(),
        }
    }
}

/// Outcome of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: ExpWeibull,
    pub log_likelihood: f64,
    /// Log-likelihood of each multi-start initial point.
    pub start_log_likelihoods: Vec<f64>,
}

pub fn fit_mle(samples: &ErrorSamples) -> Result<ExpWeibull> {
    fit_mle_with(samples, &FitOptions::default()).map(|r| r.model)
}

/// Maximizes the log-likelihood over `(ln a, ln c, ln lambda)` with a
/// Nelder–Mead run from each of [`MULTI_STARTS`], then one polishing run
/// from the best vertex found.
pub fn fit_mle_with(samples: &ErrorSamples, opts: &FitOptions) -> Result<FitReport> {
    if samples.len() < opts.min_samples {
        return Err(Error::Fit(format!(
            "{} samples, at least {} required",
            samples.len(),
            opts.min_samples
        )));
    }
    let ln_x: Vec<f64> = samples
        .values
        .iter()
        .map(|&x| x.max(SAMPLE_FLOOR).ln())
        .collect();
    let first = ln_x[0];
    if ln_x.iter().all(|&v| v == first) {
        return Err(Error::Fit("all samples are equal; the fit is degenerate".into()));
    }
    let mut sorted = ln_x.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let ln_median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };

    let nll = |theta: &[f64]| -> f64 {
        let (a, c, lambda) = (theta[0].exp(), theta[1].exp(), theta[2].exp());
        if !(a.is_finite() && c.is_finite() && lambda.is_finite() && a > 0.0 && c > 0.0 && lambda > 0.0) {
            return f64::INFINITY;
        }
        let m = ExpWeibull { a, c, lambda };
        -ln_x.iter().map(|&l| m.ln_pdf_from_ln(l)).sum::<f64>()
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut start_lls = Vec::with_capacity(MULTI_STARTS.len());
    for &(a, c) in &MULTI_STARTS {
        // median of the start equals the sample median
        let unit_median = (-(-(0.5f64.ln() / a).exp_m1()).ln()).powf(1.0 / c);
        let ln_lambda = ln_median - unit_median.ln();
        let start = [a.ln(), c.ln(), ln_lambda];
        start_lls.push(-nll(&start));
        let m = opts.simplex.minimize(nll, &start);
        if best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    let (mut value, mut theta) = best.expect("at least one start");
    let polish = opts.simplex.minimize(nll, &theta);
    if polish.value < value {
        value = polish.value;
        theta = polish.x;
    }
    if !value.is_finite() {
        return Err(Error::Fit("no start produced a finite likelihood".into()));
    }
    let model = ExpWeibull::new(theta[0].exp(), theta[1].exp(), theta[2].exp())
        .map_err(|e| Error::Fit(e.to_string()))?;
    Ok(FitReport {
        model,
        log_likelihood: -value,
        start_log_likelihoods: start_lls,
    })
}

/// Foreground (known-object) and background models for one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullPair {
    pub level: Level,
    pub fg: ExpWeibull,
    pub bg: ExpWeibull,
    pub fg_sample_count: usize,
    pub bg_sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeibullConfig {
    pub max_samples: usize,
    pub min_samples: usize,
    pub seed: u64,
}

impl Default for WeibullConfig {
    fn default() -> Self {
        Self {
            max_samples: DEFAULT_MAX_SAMPLES,
            min_samples: DEFAULT_MIN_SAMPLES,
            seed: 0,
        }
    }
}

/// Error maps of one image together with its known annotations and pseudo
/// labels, all boxes in input pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRegions {
    pub error_maps: Vec<ErrorMap>,
    pub known: Vec<BBox>,
    pub pseudo: Vec<BBox>,
}

/// Fits one [`WeibullPair`] per level present in the error maps, pooling
/// cells over all images before subsampling.
pub fn fit_pair(images: &[ImageRegions], cfg: &WeibullConfig) -> Result<Vec<WeibullPair>> {
    let mut levels: Vec<Level> = images
        .iter()
        .flat_map(|im| im.error_maps.iter().map(|e| e.level()))
        .collect();
    levels.sort();
    levels.dedup();
    if levels.is_empty() {
        return Err(Error::Invalid("no error maps to fit".into()));
    }
    let opts = FitOptions {
        min_samples: cfg.min_samples,
        ..Default::default()
    };
    let mut pairs = Vec::with_capacity(levels.len());
    for level in levels {
        let mut fg = Vec::new();
        let mut bg = Vec::new();
        for im in images {
            for e in im.error_maps.iter().filter(|e| e.level() == level) {
                let (f, b) = classify_cells(e, &im.known, &im.pseudo);
                fg.extend(f);
                bg.extend(b);
            }
        }
        if fg.is_empty() || bg.is_empty() {
            return Err(Error::Sampling(format!(
                "level {level}: {} foreground and {} background cells",
                fg.len(),
                bg.len()
            )));
        }
        let mut rng = Rng::new(cfg.seed ^ (u64::from(level.code()) << 32));
        let fg = ErrorSamples::new(subsample(fg, cfg.max_samples, &mut rng))?;
        let bg = ErrorSamples::new(subsample(bg, cfg.max_samples, &mut rng))?;
        let fit = |s: &ErrorSamples, side: &str| {
            fit_mle_with(s, &opts)
                .map(|r| r.model)
                .map_err(|e| Error::Fit(format!("level {level} {side}: {e}")))
        };
        pairs.push(WeibullPair {
            level,
            fg: fit(&fg, "foreground")?,
            bg: fit(&bg, "background")?,
            fg_sample_count: fg.len(),
            bg_sample_count: bg.len(),
        });
    }
    Ok(pairs)
}
