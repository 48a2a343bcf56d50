//! JSON design files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariance::{CovarianceSpec, SigmaSpecJson};
use crate::design::{symmetrize, ApproxDesign, ExactDesign};
use crate::error::{Error, Result};
use crate::model::PreparedSpace;
use crate::sequence::DesignSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Approx,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub p: usize,
    pub t: usize,
    /// Identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaSpecJson>,
    #[serde(rename = "type")]
    pub kind: DesignKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, f64>>,
    /// `p x n`, row `k` is period `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadedDesign {
    Approx(ApproxDesign<f64>),
    Exact(ExactDesign),
}

impl LoadedDesign {
    /// Block proportions; exact designs are symmetrized.
    pub fn approx(&self, space: &PreparedSpace<f64>) -> Result<ApproxDesign<f64>> {
        match self {
            LoadedDesign::Approx(d) => Ok(d.clone()),
            LoadedDesign::Exact(d) => symmetrize(space, d),
        }
    }
}

impl DesignFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Parse(format!("design file: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn covariance(&self) -> Result<CovarianceSpec<f64>> {
        self.sigma
            .clone()
            .map_or(Ok(CovarianceSpec::Identity), SigmaSpecJson::into_spec)
    }

    pub fn space(&self) -> Result<PreparedSpace<f64>> {
        PreparedSpace::new(DesignSpace::new(self.p, self.t, self.covariance()?)?)
    }

    /// Prepares the space and reads the design against it.
    pub fn load(&self) -> Result<(PreparedSpace<f64>, LoadedDesign)> {
        let space = self.space()?;
        let design = match self.kind {
            DesignKind::Approx => {
                let w = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::Parse("approx design needs \"weights\"".into()))?;
                LoadedDesign::Approx(ApproxDesign::from_labels(
                    &space,
                    w.iter().map(|(k, v)| (k.as_str(), *v)),
                )?)
            }
            DesignKind::Exact => {
                let layout = self
                    .layout
                    .as_ref()
                    .ok_or_else(|| Error::Parse("exact design needs \"layout\"".into()))?;
                if layout.len() != self.p {
                    return Err(Error::LengthMismatch {
                        expected: self.p,
                        found: layout.len(),
                    });
                }
                LoadedDesign::Exact(ExactDesign::from_layout(self.t, layout)?)
            }
        };
        Ok((space, design))
    }

    pub fn from_approx(space: &PreparedSpace<f64>, d: &ApproxDesign<f64>) -> Self {
        DesignFile {
            p: space.p(),
            t: space.t(),
            sigma: Some(SigmaSpecJson::from_spec(&space.space().covariance)),
            kind: DesignKind::Approx,
            weights: Some(d.support().into_iter().map(|(i, w)| (space.label(i), w)).collect()),
            layout: None,
        }
    }

    pub fn from_exact(space: &PreparedSpace<f64>, d: &ExactDesign) -> Self {
        DesignFile {
            p: space.p(),
            t: space.t(),
            sigma: Some(SigmaSpecJson::from_spec(&space.space().covariance)),
            kind: DesignKind::Exact,
            weights: None,
            layout: Some(d.layout()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_round_trip() {
        let f = DesignFile::parse(
            r#"{"p": 3, "t": 3, "sigma": {"kind": "tridiagonal", "rho": 0.0},
                "type": "approx", "weights": {"122": 0.25, "123": 0.75}}"#,
        )
        .unwrap();
        let (sp, d) = f.load().unwrap();
        let LoadedDesign::Approx(a) = &d else { panic!() };
        assert_eq!(a.weight(sp.parse_block("122").unwrap()), 0.25);
        let back = DesignFile::from_approx(&sp, a);
        assert_eq!(back.weights, f.weights);
        let text = serde_json::to_string(&back).unwrap();
        assert_eq!(DesignFile::parse(&text).unwrap(), back);
    }

    #[test]
    fn exact_layout() {
        let f = DesignFile::parse(r#"{"p": 2, "t": 2, "type": "exact", "layout": [[1, 2], [2, 1]]}"#).unwrap();
        let (sp, d) = f.load().unwrap();
        let a = d.approx(&sp).unwrap();
        assert_eq!(a.weight(sp.parse_block("12").unwrap()), 1.0);
    }

    #[test]
    fn malformed_files() {
        assert!(DesignFile::parse(r#"{"p": 2, "t": 2, "type": "approx"}"#).unwrap().load().is_err());
        assert!(DesignFile::parse(r#"{"p": 2, "t": 2, "type": "exact", "layout": [[1, 2]]}"#)
            .unwrap()
            .load()
            .is_err());
        assert!(DesignFile::parse(r#"{"p": 2, "t": 2, "type": "mixed"}"#).is_err());
        assert!(DesignFile::parse(r#"{"p": 2, "t": 2, "type": "approx", "weights": {"13": 1.0}}"#)
            .unwrap()
            .load()
            .is_err());
    }
}
