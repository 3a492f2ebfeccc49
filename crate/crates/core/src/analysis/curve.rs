use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::data::Family;
use crate::error::{Error, Result};

pub const CURVE_CSV_HEADER: &str = "family,Lmax,method,L,I_nats,sigma_nats";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub l: usize,
    pub mi: f64,
    pub sigma: f64,
}

/// Mutual information as a function of the cut parameter for one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub family: Family,
    pub lmax: usize,
    pub method: String,
    pub points: Vec<CurvePoint>,
    /// Multiplicative factor applied by [`super::rescale_align`].
    pub rescale: f64,
}

impl ScalingCurve {
    pub fn new(family: Family, lmax: usize, method: &str, points: Vec<CurvePoint>) -> Result<Self> {
        let curve = Self { family, lmax, method: method.to_string(), points, rescale: 1.0 };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.points.windows(2) {
            if w[1].l <= w[0].l {
                return Err(Error::Domain(format!("L not strictly increasing at {}", w[1].l)));
            }
        }
        for p in &self.points {
            if p.l > self.lmax {
                return Err(Error::Domain(format!("L = {} exceeds Lmax = {}", p.l, self.lmax)));
            }
            if !(p.sigma >= 0.0) || !p.mi.is_finite() {
                return Err(Error::Domain(format!("bad point at L = {}: {:?}", p.l, p)));
            }
            // a region or its complement is empty at the ends
            if (p.l == 0 || p.l == self.lmax) && p.mi.abs() > 3.0 * p.sigma + 1e-9 {
                return Err(Error::Domain(format!(
                    "MI at boundary L = {} is {} ± {}, not zero",
                    p.l, p.mi, p.sigma
                )));
            }
        }
        Ok(())
    }

    pub fn ls(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.l).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mi).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| CurvePoint { l: p.l, mi: p.mi * factor, sigma: p.sigma * factor.abs() })
            .collect();
        Self { points, rescale: self.rescale * factor, ..self.clone() }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CURVE_CSV_HEADER}")?;
        for p in &self.points {
            writeln!(out, "{},{},{},{},{},{}", self.family, self.lmax, self.method, p.l, p.mi, p.sigma)?;
        }
        Ok(())
    }

    /// Two columns `L I` for gnuplot.
    pub fn write_gnuplot<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {} {} Lmax={} rescale={}", self.family, self.method, self.lmax, self.rescale)?;
        for p in &self.points {
            writeln!(out, "{} {}", p.l, p.mi)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != CURVE_CSV_HEADER {
            return Err(Error::Format(format!("expected curve header, got {header:?}")));
        }
        let mut meta: Option<(Family, usize, String)> = None;
        let mut points = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Format(format!("curve row {}: {line:?}", k + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(bad());
            }
            let family: Family = f[0].parse()?;
            let lmax: usize = f[1].parse().map_err(|_| bad())?;
            let row_meta = (family, lmax, f[2].to_string());
            match &meta {
                None => meta = Some(row_meta),
                Some(m) if *m != row_meta => return Err(bad()),
                Some(_) => {}
            }
            points.push(CurvePoint {
                l: f[3].parse().map_err(|_| bad())?,
                mi: f[4].parse().map_err(|_| bad())?,
                sigma: f[5].parse().map_err(|_| bad())?,
            });
        }
        let (family, lmax, method) =
            meta.ok_or_else(|| Error::Format("curve file has no rows".into()))?;
        Self::new(family, lmax, &method, points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(usize, f64)]) -> Vec<CurvePoint> {
        v.iter().map(|&(l, mi)| CurvePoint { l, mi, sigma: 0.01 }).collect()
    }

    #[test]
    fn csv_round_trip() {
        let c = ScalingCurve::new(Family::TopBottom, 8, "knn", pts(&[(0, 0.0), (2, 1.25), (4, 1.5)]))
            .unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("family,Lmax,method,L,I_nats,sigma_nats\nTB,8,knn,0,0,0.01\n"));
        assert_eq!(ScalingCurve::read_csv(text.as_bytes()).unwrap(), c);
    }

    #[test]
    fn rejects_unsorted_and_nonzero_boundary() {
        assert!(ScalingCurve::new(Family::TopBottom, 8, "x", pts(&[(2, 1.0), (1, 1.0)])).is_err());
        assert!(ScalingCurve::new(Family::TopBottom, 8, "x", pts(&[(0, 1.0)])).is_err());
        assert!(ScalingCurve::new(Family::TopBottom, 8, "x", pts(&[(8, 0.02)])).is_ok());
    }
}
