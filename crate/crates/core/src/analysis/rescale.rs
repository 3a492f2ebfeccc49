use serde::{Deserialize, Serialize};

use super::ScalingCurve;
use crate::error::{Error, Result};

/// How points of curves with different `Lmax` are matched up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    /// Same cut parameter L.
    Cut,
    /// Same fraction L / Lmax.
    Fraction,
}

fn same_point(a: (usize, usize), b: (usize, usize), abscissa: Abscissa) -> bool {
    match abscissa {
        Abscissa::Cut => a.0 == b.0,
        Abscissa::Fraction => a.0 * b.1 == b.0 * a.1,
    }
}

/// `(reference, other)` value pairs at matching abscissae.
fn overlap(reference: &ScalingCurve, other: &ScalingCurve, abscissa: Abscissa) -> Vec<(f64, f64)> {
    reference
        .points
        .iter()
        .filter_map(|p| {
            other
                .points
                .iter()
                .find(|q| same_point((p.l, reference.lmax), (q.l, other.lmax), abscissa))
                .map(|q| (p.mi, q.mi))
        })
        .collect()
}

/// Scales every curve by the single least-squares factor that best matches
/// it to the first curve over their overlap. Factors accumulate in
/// [`ScalingCurve::rescale`].
pub fn rescale_align(curves: &[ScalingCurve], abscissa: Abscissa) -> Result<Vec<ScalingCurve>> {
    let (reference, rest) = curves
        .split_first()
        .filter(|(_, rest)| !rest.is_empty())
        .ok_or_else(|| Error::Domain("alignment needs at least two curves".into()))?;
    let mut out = vec![reference.clone()];
    for c in rest {
        let pairs = overlap(reference, c, abscissa);
        if pairs.is_empty() {
            return Err(Error::Domain(format!("curve {} shares no points with the reference", c.method)));
        }
        let num: f64 = pairs.iter().map(|(r, x)| r * x).sum();
        let den: f64 = pairs.iter().map(|(_, x)| x * x).sum();
        if den == 0.0 {
            return Err(Error::Domain("cannot rescale an all-zero curve".into()));
        }
        out.push(c.scaled(num / den));
    }
    Ok(out)
}

/// RMS deviation of all points from the best common `A · shape(L/Lmax)`,
/// relative to the largest value.
pub fn shape_collapse_rms(curves: &[ScalingCurve], shape: impl Fn(f64) -> f64) -> f64 {
    let shape = &shape;
    let pts: Vec<(f64, f64)> = curves
        .iter()
        .flat_map(|c| c.points.iter().map(|p| (shape(p.l as f64 / c.lmax as f64), p.mi)))
        .collect();
    let amp = pts.iter().map(|(s, y)| s * y).sum::<f64>() / pts.iter().map(|(s, _)| s * s).sum::<f64>();
    let peak = pts.iter().map(|(_, y)| y.abs()).fold(0.0, f64::max);
    let mse = pts.iter().map(|(s, y)| (y - amp * s).powi(2)).sum::<f64>() / pts.len() as f64;
    mse.sqrt() / peak
}

/// Mean over shared abscissae of the standard deviation across curves.
pub fn pointwise_spread(curves: &[ScalingCurve], abscissa: Abscissa) -> f64 {
    let reference = &curves[0];
    let mut total = 0.0;
    let mut count = 0;
    for p in &reference.points {
        let vals: Vec<f64> = curves
            .iter()
            .filter_map(|c| {
                c.points
                    .iter()
                    .find(|q| same_point((p.l, reference.lmax), (q.l, c.lmax), abscissa))
                    .map(|q| q.mi)
            })
            .collect();
        if vals.len() == curves.len() {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            total += (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            count += 1;
        }
    }
    total / count.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::CurvePoint;
    use crate::data::Family;
    use rand::Rng;

    fn curve(lmax: usize, mut f: impl FnMut(usize) -> f64) -> ScalingCurve {
        let points = (0..=lmax).map(|l| CurvePoint { l, mi: f(l), sigma: 0.0 }).collect();
        ScalingCurve::new(Family::LeftRight, lmax, "t", points).unwrap()
    }

    #[test]
    fn identical_curves_keep_unit_factor() {
        let c = curve(10, |l| (l * (10 - l)) as f64);
        let out = rescale_align(&[c.clone(), c.clone(), c], Abscissa::Cut).unwrap();
        assert!(out.iter().all(|c| c.rescale == 1.0));
    }

    #[test]
    fn doubled_copy_gets_half() {
        let c = curve(10, |l| (l * (10 - l)) as f64);
        let out = rescale_align(&[c.clone(), c.scaled(2.0)], Abscissa::Cut).unwrap();
        assert!((out[1].rescale - 1.0).abs() < 1e-15);
        let direct = rescale_align(&[c.clone(), curve(10, |l| 2.0 * (l * (10 - l)) as f64)], Abscissa::Cut)
            .unwrap();
        assert_eq!(direct[1].rescale, 0.5);
    }

    #[test]
    fn alignment_reduces_spread() {
        let base = |l: usize| (l as f64).sqrt() * (20 - l) as f64 / 10.0;
        let mut rng = crate::seeded_rng(1);
        let curves: Vec<_> = [1.0, 1.7, 0.6]
            .iter()
            .map(|&k| curve(20, |l| k * base(l) * (1.0 + 0.02 * rng.random_range(-1.0..1.0))))
            .collect();
        let before = pointwise_spread(&curves, Abscissa::Cut);
        let after = pointwise_spread(&rescale_align(&curves, Abscissa::Cut).unwrap(), Abscissa::Cut);
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn fraction_abscissa_matches_different_lmax() {
        let a = curve(10, |l| (l * (10 - l)) as f64);
        let b = curve(20, |l| (l * (20 - l)) as f64);
        let out = rescale_align(&[a, b], Abscissa::Fraction).unwrap();
        assert!((out[1].rescale - 0.25).abs() < 1e-12);
        assert!(shape_collapse_rms(&out, |x| x * (1.0 - x)) < 1e-12);
    }

    #[test]
    fn no_overlap_is_domain_error() {
        let a = ScalingCurve::new(Family::LeftRight, 10, "a", vec![CurvePoint { l: 1, mi: 1.0, sigma: 0.0 }])
            .unwrap();
        let b = ScalingCurve::new(Family::LeftRight, 10, "b", vec![CurvePoint { l: 2, mi: 1.0, sigma: 0.0 }])
            .unwrap();
        assert!(rescale_align(&[a.clone(), b], Abscissa::Cut).is_err());
        assert!(rescale_align(&[a], Abscissa::Cut).is_err());
    }
}
