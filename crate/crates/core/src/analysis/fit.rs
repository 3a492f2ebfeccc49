//! Weighted least-squares fits of scaling models and regime classification.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ScalingCurve;
use crate::data::Family;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    /// `I = A · L^ν`, fitted as a line in log-log space.
    Power,
    /// `I = a + b · ln L`.
    Log,
    /// `I = c`.
    Plateau,
    /// `I = A · L (Lmax − L)`.
    AllToAll,
    /// `I = a + b · L`; boundary-law growth of a centered square.
    Area,
    /// `I = a + b · L²`; bulk-law growth of a centered square.
    Volume,
}

impl ScalingModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingModel::Power => "power",
            ScalingModel::Log => "log",
            ScalingModel::Plateau => "plateau",
            ScalingModel::AllToAll => "all_to_all",
            ScalingModel::Area => "area",
            ScalingModel::Volume => "volume",
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            ScalingModel::Plateau | ScalingModel::AllToAll => 1,
            _ => 2,
        }
    }

    /// Candidate models for a family: centered squares compare boundary
    /// against bulk growth; straight cuts compare a plateau and the
    /// all-to-all parabola.
    pub fn candidates(family: Family) -> [ScalingModel; 4] {
        use ScalingModel::*;
        match family {
            Family::CenterSurround => [Area, Volume, Power, Log],
            _ => [Plateau, Power, Log, AllToAll],
        }
    }
}

impl fmt::Display for ScalingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScalingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "power" => ScalingModel::Power,
            "log" => ScalingModel::Log,
            "plateau" => ScalingModel::Plateau,
            "all_to_all" => ScalingModel::AllToAll,
            "area" => ScalingModel::Area,
            "volume" => ScalingModel::Volume,
            other => return Err(Error::Domain(format!("unknown scaling model {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ScalingModel,
    pub params: Vec<FitParam>,
    /// `sqrt(SSR / (n − p))` with residuals taken in MI units.
    pub residual_rms: f64,
    pub n_points: usize,
    pub window: (usize, usize),
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map_or(f64::NAN, |p| p.value)
    }

    pub fn predict(&self, l: f64, lmax: f64) -> f64 {
        let v = |n| self.value(n);
        match self.model {
            ScalingModel::Power => v("amplitude") * l.powf(v("nu")),
            ScalingModel::Log => v("offset") + v("amplitude") * l.ln(),
            ScalingModel::Plateau => v("level"),
            ScalingModel::AllToAll => v("amplitude") * l * (lmax - l),
            ScalingModel::Area => v("offset") + v("slope") * l,
            ScalingModel::Volume => v("offset") + v("slope") * l * l,
        }
    }
}

struct Wls {
    beta: Vec<f64>,
    stderr: Vec<f64>,
}

/// Weighted linear least squares with covariance scaled by the reduced
/// chi-square, so noise-free data yields zero standard errors.
fn wls(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<Wls> {
    let (n, p) = (rows.len(), rows[0].len());
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let wv = DVector::from_column_slice(w);
    let yv = DVector::from_column_slice(y);
    let xtw = DMatrix::from_fn(p, n, |j, i| x[(i, j)] * wv[i]);
    let normal = &xtw * &x;
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::Domain("least-squares design is rank deficient".into()))?;
    let beta = &inv * (&xtw * &yv);
    let resid = &yv - &x * &beta;
    let chi2: f64 = resid.iter().zip(w).map(|(r, w)| w * r * r).sum();
    let s2 = if n > p { chi2 / (n - p) as f64 } else { 0.0 };
    let stderr = (0..p).map(|j| (inv[(j, j)] * s2).max(0.0).sqrt()).collect();
    Ok(Wls { beta: beta.iter().copied().collect(), stderr })
}

fn param(name: &str, value: f64, stderr: f64) -> FitParam {
    FitParam { name: name.to_string(), value, stderr }
}

/// Fits `model` to the points of `curve` whose L lies in `window` (inclusive).
/// Weights are `1/σ²` when every point carries a positive σ, uniform otherwise.
pub fn fit(curve: &ScalingCurve, model: ScalingModel, window: (usize, usize)) -> Result<FitResult> {
    let pts: Vec<_> =
        curve.points.iter().filter(|p| p.l >= window.0 && p.l <= window.1).copied().collect();
    let p = model.n_params();
    if pts.len() < 3 || pts.len() <= p {
        return Err(Error::Domain(format!(
            "{} points in window {window:?}, need at least 3",
            pts.len()
        )));
    }
    let weighted = pts.iter().all(|q| q.sigma > 0.0);
    let w: Vec<f64> = pts.iter().map(|q| if weighted { q.sigma.powi(-2) } else { 1.0 }).collect();
    let ls: Vec<f64> = pts.iter().map(|q| q.l as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|q| q.mi).collect();
    let lmax = curve.lmax as f64;
    let need_log = matches!(model, ScalingModel::Power | ScalingModel::Log);
    if need_log && ls.iter().any(|&l| l <= 0.0) {
        return Err(Error::Domain(format!("{model} fit needs L > 0 throughout {window:?}")));
    }

    let params = match model {
        ScalingModel::Power => {
            if let Some(q) = pts.iter().find(|q| q.mi <= 0.0) {
                return Err(Error::Domain(format!("nonpositive MI {} at L = {}", q.mi, q.l)));
            }
            let rows: Vec<_> = ls.iter().map(|l| vec![1.0, l.ln()]).collect();
            let logy: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
            // σ_lnI = σ / I
            let lw: Vec<f64> = pts
                .iter()
                .map(|q| if weighted { (q.mi / q.sigma).powi(2) } else { 1.0 })
                .collect();
            let r = wls(&rows, &logy, &lw)?;
            let amp = r.beta[0].exp();
            vec![param("nu", r.beta[1], r.stderr[1]), param("amplitude", amp, amp * r.stderr[0])]
        }
        ScalingModel::Log => {
            let rows: Vec<_> = ls.iter().map(|l| vec![1.0, l.ln()]).collect();
            let r = wls(&rows, &ys, &w)?;
            vec![param("amplitude", r.beta[1], r.stderr[1]), param("offset", r.beta[0], r.stderr[0])]
        }
        ScalingModel::Plateau => {
            let rows: Vec<_> = ls.iter().map(|_| vec![1.0]).collect();
            let r = wls(&rows, &ys, &w)?;
            vec![param("level", r.beta[0], r.stderr[0])]
        }
        ScalingModel::AllToAll => {
            let rows: Vec<_> = ls.iter().map(|l| vec![l * (lmax - l)]).collect();
            let r = wls(&rows, &ys, &w)?;
            vec![param("amplitude", r.beta[0], r.stderr[0])]
        }
        ScalingModel::Area | ScalingModel::Volume => {
            let pow = if model == ScalingModel::Area { 1 } else { 2 };
            let rows: Vec<_> = ls.iter().map(|l| vec![1.0, l.powi(pow)]).collect();
            let r = wls(&rows, &ys, &w)?;
            vec![param("slope", r.beta[1], r.stderr[1]), param("offset", r.beta[0], r.stderr[0])]
        }
    };

    let mut result = FitResult {
        model,
        params,
        residual_rms: 0.0,
        n_points: pts.len(),
        window: (pts[0].l, pts[pts.len() - 1].l),
    };
    let ssr: f64 = ls.iter().zip(&ys).map(|(&l, &y)| (y - result.predict(l, lmax)).powi(2)).sum();
    result.residual_rms = (ssr / (pts.len() - p) as f64).sqrt();
    Ok(result)
}

/// L range left after dropping `ceil(fraction · n)` points at each end.
pub fn interior_window(curve: &ScalingCurve, boundary_fraction: f64) -> Result<(usize, usize)> {
    let n = curve.points.len();
    let drop = (boundary_fraction * n as f64).ceil() as usize;
    if n < 5 || n < 2 * drop + 3 {
        return Err(Error::Domain(format!("{n} points is too few to classify")));
    }
    Ok((curve.points[drop].l, curve.points[n - 1 - drop].l))
}

/// Fits every candidate model on the interior window and ranks them by
/// residual RMS per degree of freedom (best first). Models that cannot be
/// fitted on the window (e.g. a power law through zero) are left out.
pub fn classify(curve: &ScalingCurve, boundary_fraction: f64) -> Result<Vec<FitResult>> {
    let window = interior_window(curve, boundary_fraction)?;
    let scale = curve.points.iter().map(|p| p.mi.abs()).fold(0.0, f64::max);
    let mut fits: Vec<FitResult> = ScalingModel::candidates(curve.family)
        .iter()
        .filter_map(|&m| fit(curve, m, window).ok())
        .collect();
    if fits.is_empty() {
        return Err(Error::Domain("no scaling model could be fitted".into()));
    }
    // residuals within round-off of each other count as a tie
    let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
    fits.sort_by(|a, b| {
        if (a.residual_rms - b.residual_rms).abs() <= tol {
            a.model.n_params().cmp(&b.model.n_params()).then(a.model.cmp(&b.model))
        } else {
            a.residual_rms.total_cmp(&b.residual_rms)
        }
    });
    Ok(fits)
}
