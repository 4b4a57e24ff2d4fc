//! Radial charge form factors `chi_i(k)`.

use std::io::Read;

use crate::error::{Error, Result};

/// Tabulated radial profile, linearly interpolated.
///
/// Below the first sample the first value is used; beyond the last sample the
/// profile is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTable {
    radii: Vec<f64>,
    values: Vec<f64>,
}

impl RadialTable {
    pub fn new(radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if radii.is_empty() || radii.len() != values.len() {
            return Err(Error::Table(format!(
                "need matching non-empty columns, got {} radii and {} values",
                radii.len(),
                values.len()
            )));
        }
        if radii.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::Table("non-finite entry".into()));
        }
        if radii[0] < 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table(
                "radii must be non-negative and strictly increasing".into(),
            ));
        }
        Ok(Self { radii, values })
    }

    /// Parses two-column CSV `r, chi(r)`. Blank lines, `#` comments and a
    /// non-numeric header line are skipped.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut radii = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(Error::Table(format!(
                    "line {}: expected 2 columns, found {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
                (Ok(r), Ok(v)) => {
                    radii.push(r);
                    values.push(v);
                }
                _ if radii.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(Error::Table(format!(
                        "line {}: cannot parse {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(radii, values)
    }

    pub fn eval(&self, r: f64) -> f64 {
        let last = self.radii.len() - 1;
        if r <= self.radii[0] {
            return self.values[0];
        }
        if r > self.radii[last] {
            return 0.0;
        }
        let idx = self.radii.partition_point(|&x| x < r);
        let (r0, r1) = (self.radii[idx - 1], self.radii[idx]);
        let t = (r - r0) / (r1 - r0);
        self.values[idx - 1] * (1.0 - t) + self.values[idx] * t
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormFactorShape {
    /// `e^{-|k|^2 / width^2}`
    Gaussian { width: f64 },
    /// Indicator of `|k| <= radius`.
    Ball { radius: f64 },
    Table(RadialTable),
    /// `chi = 1`: a point charge. Violates the integrability hypotheses.
    Point,
}

/// Real, radial, bounded form factor `chi(k) = charge * shape(|k|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormFactor {
    pub shape: FormFactorShape,
    pub charge: f64,
}

impl FormFactor {
    pub fn new(shape: FormFactorShape, charge: f64) -> Result<Self> {
        match &shape {
            FormFactorShape::Gaussian { width } if !(width.is_finite() && *width > 0.0) => {
                return Err(Error::InvalidArgument(format!(
                    "gaussian width must be positive, got {width}"
                )))
            }
            FormFactorShape::Ball { radius } if !(radius.is_finite() && *radius > 0.0) => {
                return Err(Error::InvalidArgument(format!(
                    "ball radius must be positive, got {radius}"
                )))
            }
            _ => {}
        }
        if !charge.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite charge {charge}")));
        }
        Ok(Self { shape, charge })
    }

    pub fn gaussian(width: f64) -> Self {
        Self {
            shape: FormFactorShape::Gaussian { width },
            charge: 1.0,
        }
    }

    pub fn ball(radius: f64) -> Self {
        Self {
            shape: FormFactorShape::Ball { radius },
            charge: 1.0,
        }
    }

    pub fn point() -> Self {
        Self {
            shape: FormFactorShape::Point,
            charge: 1.0,
        }
    }

    pub fn with_charge(mut self, charge: f64) -> Self {
        self.charge = charge;
        self
    }

    pub fn family(&self) -> &'static str {
        match self.shape {
            FormFactorShape::Gaussian { .. } => "gaussian",
            FormFactorShape::Ball { .. } => "ball",
            FormFactorShape::Table(_) => "table",
            FormFactorShape::Point => "point",
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        let shape = match &self.shape {
            FormFactorShape::Gaussian { width } => (-(r * r) / (width * width)).exp(),
            FormFactorShape::Ball { radius } => {
                if r <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            FormFactorShape::Table(table) => table.eval(r),
            FormFactorShape::Point => 1.0,
        };
        self.charge * shape
    }

    /// `sup |chi|`.
    pub fn sup(&self) -> f64 {
        let shape = match &self.shape {
            FormFactorShape::Table(t) => t.sup(),
            _ => 1.0,
        };
        self.charge.abs() * shape
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_interpolates_linearly() {
        let t = RadialTable::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        assert_eq!(t.eval(0.5), 0.75);
        assert_eq!(t.eval(1.5), 0.25);
        assert_eq!(t.eval(3.0), 0.0);
    }

    #[test]
    fn table_from_csv_with_header() {
        let csv = "r,chi\n0.0, 1.0\n# comment\n1.0,0.25\n";
        let t = RadialTable::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.eval(0.5), 0.625);
        assert!(RadialTable::from_csv("0,1\n0,2\n".as_bytes()).is_err());
        assert!(RadialTable::from_csv("0,1,2\n".as_bytes()).is_err());
        assert!(RadialTable::from_csv("0,1\nx,2\n".as_bytes()).is_err());
    }

    #[test]
    fn families_evaluate() {
        assert_eq!(FormFactor::gaussian(1.0).eval(0.0), 1.0);
        assert!((FormFactor::gaussian(2.0).eval(2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(FormFactor::ball(1.0).eval(1.0), 1.0);
        assert_eq!(FormFactor::ball(1.0).eval(1.0001), 0.0);
        assert_eq!(FormFactor::point().with_charge(-2.0).eval(50.0), -2.0);
        assert!(FormFactor::new(FormFactorShape::Gaussian { width: 0.0 }, 1.0).is_err());
    }
}
