//! Weighted least squares for scaling forms.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// `(x, value, stderr)`; `x` is `ℓ` for profiles and `t` for time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
}

impl Point {
    pub fn new(x: f64, value: f64, stderr: f64) -> Self {
        Point { x, value, stderr }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// `[[var(slope), cov], [cov, var(intercept)]]`
    pub covariance: [[f64; 2]; 2],
    /// `sqrt(Σ w r²)` with `w = 1/σ²` (or 1 when unweighted)
    pub residual_norm: f64,
    pub r_squared: f64,
    /// inclusive range of the fit's independent variable (`ℓ` or `t`)
    pub window: (f64, f64),
    pub n_points: usize,
    pub weighted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_slope_stderr: Option<f64>,
}

impl FitResult {
    pub fn slope_stderr(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn intercept_stderr(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// override of the default window, inclusive
    pub window: Option<(f64, f64)>,
    /// `(replicas, seed)`: resample points with replacement and report the slope spread
    pub bootstrap: Option<(usize, u64)>,
}

/// Straight-line fit `y = slope·u + intercept` over `(u, y, σ)`.
///
/// Weights are `1/σ²` when every σ is positive; the covariance is then the
/// absolute `(AᵀWA)⁻¹`. Otherwise all weights are 1 and the covariance is
/// scaled by the residual variance.
pub fn linear_fit(u: &[f64], y: &[f64], sigma: &[f64]) -> Result<(f64, f64, [[f64; 2]; 2], f64, f64, bool), AnalysisError> {
    let n = u.len();
    if n < 2 {
        return Err(AnalysisError::Degenerate(format!("{n} points")));
    }
    let weighted = sigma.iter().all(|&s| s > 0.0 && s.is_finite());
    let w: Vec<f64> = if weighted { sigma.iter().map(|s| 1.0 / (s * s)).collect() } else { vec![1.0; n] };
    let (mut sw, mut su, mut sy, mut suu, mut suy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..n {
        sw += w[k];
        su += w[k] * u[k];
        sy += w[k] * y[k];
        suu += w[k] * u[k] * u[k];
        suy += w[k] * u[k] * y[k];
    }
    let det = sw * suu - su * su;
    if det.abs() <= 1e-12 * sw * suu.max(1.0) {
        return Err(AnalysisError::Degenerate("all abscissae coincide".into()));
    }
    let slope = (sw * suy - su * sy) / det;
    let intercept = (suu * sy - su * suy) / det;
    let rss: f64 = (0..n).map(|k| w[k] * (y[k] - slope * u[k] - intercept).powi(2)).sum();
    let scale = if weighted { 1.0 } else if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let cov = [[sw / det * scale, -su / det * scale], [-su / det * scale, suu / det * scale]];
    let ybar = sy / sw;
    let tss: f64 = (0..n).map(|k| w[k] * (y[k] - ybar).powi(2)).sum();
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok((slope, intercept, cov, rss.sqrt(), r2, weighted))
}

fn fit_transformed(
    points: &[Point],
    window: (f64, f64),
    min_points: usize,
    transform: impl Fn(f64) -> f64,
    options: &FitOptions,
) -> Result<FitResult, AnalysisError> {
    let inside: Vec<&Point> = points.iter().filter(|p| p.x >= window.0 && p.x <= window.1).collect();
    let mut xs: Vec<f64> = inside.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < min_points {
        return Err(AnalysisError::Degenerate(format!(
            "{} distinct points in window [{}, {}], need {min_points}",
            xs.len(),
            window.0,
            window.1
        )));
    }
    let u: Vec<f64> = inside.iter().map(|p| transform(p.x)).collect();
    let y: Vec<f64> = inside.iter().map(|p| p.value).collect();
    let s: Vec<f64> = inside.iter().map(|p| p.stderr).collect();
    let (slope, intercept, covariance, residual_norm, r_squared, weighted) = linear_fit(&u, &y, &s)?;
    let bootstrap_slope_stderr = options.bootstrap.map(|(reps, seed)| {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let n = u.len();
        let slopes: Vec<f64> = (0..reps)
            .filter_map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
                linear_fit(&pick(&u), &pick(&y), &pick(&s)).ok().map(|f| f.0)
            })
            .collect();
        let m = slopes.iter().sum::<f64>() / slopes.len().max(1) as f64;
        (slopes.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (slopes.len().max(2) - 1) as f64).sqrt()
    });
    Ok(FitResult {
        slope,
        intercept,
        covariance,
        residual_norm,
        r_squared,
        window,
        n_points: inside.len(),
        weighted,
        bootstrap_slope_stderr,
    })
}

/// Chord length `log2[(L/π) sin(πℓ/L)]`.
pub fn chord_log2(ell: f64, l: f64) -> f64 {
    ((l / std::f64::consts::PI) * (std::f64::consts::PI * ell / l).sin()).log2()
}

/// Fits `value(ℓ) = (slope/3)·log2[(L/π) sin(πℓ/L)] + intercept`; default window `ℓ ∈ [L/8, 7L/8]`.
pub fn fit_log_profile(profile: &[Point], l: usize, options: &FitOptions) -> Result<FitResult, AnalysisError> {
    let lf = l as f64;
    let window = options.window.unwrap_or((lf / 8.0, 7.0 * lf / 8.0));
    fit_transformed(profile, window, 4, |ell| chord_log2(ell, lf) / 3.0, options)
}

/// Onset of the plateau: first `t` whose value reaches 90% of the mean over
/// the last quarter of the series.
pub fn saturation_time(series: &[Point]) -> Option<f64> {
    let mut s: Vec<&Point> = series.iter().collect();
    s.sort_by(|a, b| a.x.total_cmp(&b.x));
    let tail = &s[s.len() - s.len().div_ceil(4)..];
    let plateau = tail.iter().map(|p| p.value).sum::<f64>() / tail.len() as f64;
    s.iter().find(|p| p.value >= 0.9 * plateau).map(|p| p.x)
}

/// Fits `value(t) = (slope/3)·log2 t + intercept`; default window `t ∈ [4, t_sat/4]`.
pub fn fit_time_growth(series: &[Point], options: &FitOptions) -> Result<FitResult, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::Degenerate("empty series".into()));
    }
    let window = match options.window {
        Some(w) => w,
        None => {
            let t_sat = saturation_time(series).unwrap_or(f64::INFINITY);
            (4.0, t_sat / 4.0)
        }
    };
    fit_transformed(series, window, 3, |t| t.log2() / 3.0, options)
}

/// Fits `value(ℓ) = slope·ℓ + intercept` over `ℓ ≤ L/4` (at least four sizes);
/// `r_squared` is the linearity score.
pub fn fit_area_law(profile: &[Point], l: usize, options: &FitOptions) -> Result<FitResult, AnalysisError> {
    let window = options.window.unwrap_or((0.0, l as f64 / 4.0));
    fit_transformed(profile, window, 4, |ell| ell, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn log_profile_recovers_its_own_model() {
        let l = 256;
        let pts: Vec<Point> =
            (1..l).map(|e| Point::new(e as f64, 0.573 / 3.0 * chord_log2(e as f64, l as f64) + 0.2, 0.01)).collect();
        let f = fit_log_profile(&pts, l, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(f.slope, 0.573, epsilon = 1e-10);
        assert_abs_diff_eq!(f.intercept, 0.2, epsilon = 1e-10);
        assert_eq!(f.window, (32.0, 224.0));
        assert!(f.residual_norm < 1e-8);
    }

    #[test]
    fn time_growth_recovers_its_own_model() {
        let pts: Vec<Point> = (1..=400)
            .map(|t| {
                let v = 0.3 / 3.0 * (t.min(200) as f64).log2() + 1.0;
                Point::new(t as f64, v, 0.0)
            })
            .collect();
        let f = fit_time_growth(&pts, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(f.slope, 0.3, epsilon = 1e-10);
        assert!(f.window.1 <= 50.0);
    }

    #[test]
    fn saturated_series_has_flat_plateau() {
        let pts: Vec<Point> = (1..=100).map(|t| Point::new(t as f64, 2.5, 0.1)).collect();
        let f = fit_time_growth(&pts, &FitOptions { window: Some((50.0, 100.0)), ..Default::default() }).unwrap();
        assert_abs_diff_eq!(f.slope, 0.0, epsilon = 1e-12);
        assert!(fit_time_growth(&pts, &FitOptions::default()).is_err());
    }

    #[test]
    fn area_law_recovers_lines_and_constants() {
        let line: Vec<Point> = (1..=16).map(|e| Point::new(e as f64, 1.7 * e as f64 - 0.4, 0.05)).collect();
        let f = fit_area_law(&line, 64, &FitOptions::default()).unwrap();
        assert_abs_diff_eq!(f.slope, 1.7, epsilon = 1e-10);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let flat: Vec<Point> = (1..=16).map(|e| Point::new(e as f64, 3.0, 0.05)).collect();
        assert_abs_diff_eq!(fit_area_law(&flat, 64, &FitOptions::default()).unwrap().slope, 0.0, epsilon = 1e-12);
        let short: Vec<Point> = (1..=3).map(|e| Point::new(e as f64, 1.0, 0.1)).collect();
        assert!(fit_area_law(&short, 64, &FitOptions::default()).is_err());
    }

    #[test]
    fn noisy_fits_within_two_sigma() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        let l = 128;
        let sigma = 0.02;
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut inside = 0;
        let reps = 200;
        for _ in 0..reps {
            let pts: Vec<Point> = (1..l)
                .map(|e| {
                    let v = 0.5 / 3.0 * chord_log2(e as f64, l as f64) + noise.sample(&mut rng);
                    Point::new(e as f64, v, sigma)
                })
                .collect();
            let f = fit_log_profile(&pts, l, &FitOptions::default()).unwrap();
            if (f.slope - 0.5).abs() <= 2.0 * f.slope_stderr() {
                inside += 1;
            }
        }
        // 2σ coverage is 95.4%; allow sampling slack
        assert!(inside as f64 / reps as f64 > 0.9, "{inside}/{reps}");
    }

    #[test]
    fn bootstrap_spread_is_reported() {
        let pts: Vec<Point> = (1..=32).map(|e| Point::new(e as f64, e as f64 + if e % 2 == 0 { 0.3 } else { -0.3 }, 0.3)).collect();
        let f = fit_area_law(&pts, 128, &FitOptions { bootstrap: Some((200, 4)), ..Default::default() }).unwrap();
        let b = f.bootstrap_slope_stderr.unwrap();
        assert!(b > 0.0 && b < 0.1);
    }
}
