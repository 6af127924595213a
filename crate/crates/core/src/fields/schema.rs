//! JSON form of a [`ProblemSpec`].

use serde::{Deserialize, Serialize};

use super::{drift_from_density, BumpMask, Expr, Metadata, ProblemSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsDocument {
    /// Drift components; derived from `metadata` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Expr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Expr>>,
    pub sigma: Vec<Vec<Expr>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Expr>,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<Vec<Expr>>>,
}

/// Serialized problem: `{d, m, fields: {b, c, sigma}, bumps, metadata: {p, H}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub d: usize,
    pub m: usize,
    pub fields: FieldsDocument,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bumps: Vec<BumpMask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<MetadataDocument>,
}

fn matrix(rows: &[Vec<Expr>], r: usize, c: usize, name: &str) -> Result<Vec<Expr>> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(Error::invalid(format!("{name} must be {r} × {c}")));
    }
    Ok(rows.iter().flatten().cloned().collect())
}

fn rows(flat: &[Expr], c: usize) -> Vec<Vec<Expr>> {
    flat.chunks(c).map(|r| r.to_vec()).collect()
}

impl TryFrom<SpecDocument> for ProblemSpec {
    type Error = Error;

    fn try_from(doc: SpecDocument) -> Result<Self> {
        let (d, m) = (doc.d, doc.m);
        let sigma = matrix(&doc.fields.sigma, d, m, "sigma")?;
        let c = doc.fields.c.unwrap_or_else(|| vec![Expr::zero(); d]);
        let meta = doc.metadata.unwrap_or_default();
        let h = meta.h.as_ref().map(|h| matrix(h, d, d, "H")).transpose()?;
        let metadata = Metadata {
            p: meta.p.clone(),
            h: h.clone(),
        };
        let b = match doc.fields.b {
            Some(b) => b,
            None => {
                if meta.p.is_none() && h.is_none() {
                    return Err(Error::invalid("fields.b missing and no metadata to derive it from"));
                }
                // validate shapes before deriving
                let probe = ProblemSpec::new(d, m, vec![Expr::zero(); d], c.clone(), sigma.clone(), doc.bumps.clone())?;
                let a: Vec<Expr> = (0..d * d).map(|k| probe.a_expr(k / d, k % d)).collect();
                let p = meta.p.unwrap_or(Expr::constant(1.0));
                let h = h.unwrap_or_else(|| vec![Expr::zero(); d * d]);
                drift_from_density(d, &p, &a, &h, &doc.bumps)?
            }
        };
        ProblemSpec::new(d, m, b, c, sigma, doc.bumps)?.with_metadata(metadata)
    }
}

impl From<&ProblemSpec> for SpecDocument {
    fn from(spec: &ProblemSpec) -> Self {
        let meta = spec.metadata();
        let metadata = if meta.p.is_none() && meta.h.is_none() {
            None
        } else {
            Some(MetadataDocument {
                p: meta.p.clone(),
                h: meta.h.as_ref().map(|h| rows(h, spec.d())),
            })
        };
        SpecDocument {
            d: spec.d(),
            m: spec.m(),
            fields: FieldsDocument {
                b: Some(spec.b().to_vec()),
                c: if spec.c().iter().all(Expr::is_zero) {
                    None
                } else {
                    Some(spec.c().to_vec())
                },
                sigma: rows(spec.sigma(), spec.m()),
            },
            bumps: spec.bumps().to_vec(),
            metadata,
        }
    }
}

impl Serialize for ProblemSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecDocument::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProblemSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = SpecDocument::deserialize(d)?;
        ProblemSpec::try_from(doc).map_err(serde::de::Error::custom)
    }
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDocument = serde_json::from_str(text)?;
        ProblemSpec::try_from(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_loads() {
        let text = r#"{
            "d": 2, "m": 2,
            "fields": {
                "b": [{"trig": [{"k": [0, 1], "sin": 1.0}]}, {"const": 0.0}],
                "sigma": [[{"const": 1.0}, {"const": 0.0}], [{"const": 0.0}, {"const": 1.0}]]
            }
        }"#;
        let spec = ProblemSpec::from_json(text).unwrap();
        assert_eq!(spec.d(), 2);
        assert!((spec.b()[0].value(&[0.0, 0.25], &[]) - 1.0).abs() < 1e-14);
        let back = ProblemSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"{"d": 1, "m": 1, "fields": {"sigma": [[{"const": 1.0}]], "b": [{"const": 0.0}]}, "extra": 1}"#;
        assert!(ProblemSpec::from_json(text).is_err());
    }

    #[test]
    fn drift_derived_from_metadata() {
        let text = r#"{
            "d": 2, "m": 2,
            "fields": {"sigma": [[{"const": 1.0}, {"const": 0.0}], [{"const": 0.0}, {"const": 1.0}]]},
            "metadata": {"H": [[{"const": 0.0}, {"trig": [{"k": [1, 0], "cos": 0.15915494309189535}]}],
                               [{"trig": [{"k": [1, 0], "cos": -0.15915494309189535}]}, {"const": 0.0}]]}
        }"#;
        let spec = ProblemSpec::from_json(text).unwrap();
        let x = [0.2, 0.6];
        let expected = 0.5 * (2.0 * std::f64::consts::PI * 0.2).sin();
        assert!((spec.b()[1].value(&x, &[]) - expected).abs() < 1e-12);
        assert!(spec.b()[0].value(&x, &[]).abs() < 1e-12);
    }

    #[test]
    fn shape_errors_reported() {
        let text = r#"{"d": 2, "m": 1, "fields": {"b": [{"const": 0.0}, {"const": 0.0}], "sigma": [[{"const": 1.0}]]}}"#;
        assert!(matches!(ProblemSpec::from_json(text), Err(Error::Invalid(_))));
    }
}
