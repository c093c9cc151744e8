use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channels::{ChannelLayer, SiteChannel};
use crate::classical;
use crate::dense;
use crate::error::{Error, Result};
use crate::model::{LocalHamiltonian, Partition};
use crate::pauli;
use crate::Complex64;

/// Inverse temperature; `inf` selects the ground-state projector.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Beta(f64);

impl Beta {
    pub const INFINITE: Beta = Beta(f64::INFINITY);

    pub fn new(b: f64) -> Result<Self> {
        if b.is_nan() || b < 0.0 {
            return Err(Error::Config(format!("beta = {b} must be a nonnegative number or \"inf\"")));
        }
        Ok(Beta(b))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let b = match Raw::deserialize(d)? {
            Raw::Num(x) => x,
            Raw::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => f64::INFINITY,
            Raw::Text(t) => return Err(serde::de::Error::custom(format!("beta must be a number or \"inf\", got {t:?}"))),
        };
        Beta::new(b).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Classical,
    Dense,
    Pauli,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Classical => "classical",
            Engine::Dense => "dense",
            Engine::Pauli => "pauli",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKindSpec {
    Identity,
    Bitflip,
    Dephasing,
    Depolarizing,
    CompleteDepolarizing,
    AmplitudeDamping,
    Parity,
    BellMeasurement,
    Transition,
    Kraus,
}

/// Channel description as it appears in experiment configs. The same channel
/// is placed on every site it is applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kind: ChannelKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Column-stochastic matrix given row by row, `matrix[out][in]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Kraus operators, each a row-major list of `[re, im]` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<Vec<Vec<[f64; 2]>>>>,
}

impl ChannelSpec {
    pub fn simple(kind: ChannelKindSpec) -> Self {
        ChannelSpec { kind, p: None, matrix: None, kraus: None }
    }

    pub fn with_p(kind: ChannelKindSpec, p: f64) -> Self {
        ChannelSpec { p: Some(p), ..Self::simple(kind) }
    }

    fn p(&self) -> Result<f64> {
        self.p.ok_or_else(|| Error::Config(format!("channel {:?} needs a parameter \"p\"", self.kind)))
    }

    fn square<T: Copy>(rows: &[Vec<T>], q: usize, what: &str) -> Result<Vec<T>> {
        if rows.len() != q || rows.iter().any(|r| r.len() != q) {
            return Err(Error::Config(format!("{what} must be {q}x{q}")));
        }
        Ok(rows.iter().flatten().copied().collect())
    }

    /// `None` for the identity channel.
    pub fn build(&self, site: usize, q: usize) -> Result<Option<SiteChannel>> {
        use ChannelKindSpec as K;
        let c = match self.kind {
            K::Identity => return Ok(None),
            K::Bitflip => SiteChannel::bitflip(site, q, self.p()?)?,
            K::Dephasing => SiteChannel::dephasing(site, q, self.p()?)?,
            K::Depolarizing => SiteChannel::depolarizing(site, q, self.p()?)?,
            K::CompleteDepolarizing => SiteChannel::complete_depolarizing(site, q)?,
            K::AmplitudeDamping => {
                if q != 2 {
                    return Err(Error::Config("amplitude damping needs q = 2".into()));
                }
                SiteChannel::amplitude_damping(site, self.p()?)?
            }
            K::Parity | K::BellMeasurement => {
                if q != 4 {
                    return Err(Error::Config(format!("{:?} channel needs q = 4 sites", self.kind)));
                }
                if self.kind == K::Parity {
                    SiteChannel::parity(site)?
                } else {
                    SiteChannel::bell_measurement(site)?
                }
            }
            K::Transition => {
                let rows = self.matrix.as_ref().ok_or_else(|| Error::Config("transition channel needs \"matrix\"".into()))?;
                let t = DMatrix::from_row_slice(q, q, &Self::square(rows, q, "transition matrix")?);
                SiteChannel::transition(site, t)?
            }
            K::Kraus => {
                let ops = self.kraus.as_ref().ok_or_else(|| Error::Config("kraus channel needs \"kraus\"".into()))?;
                let ops = ops
                    .iter()
                    .map(|k| {
                        let flat: Vec<Complex64> =
                            Self::square(k, q, "Kraus operator")?.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
                        Ok(DMatrix::from_row_slice(q, q, &flat))
                    })
                    .collect::<Result<Vec<_>>>()?;
                SiteChannel::kraus(site, ops)?
            }
        };
        Ok(Some(c))
    }

    pub fn layer(&self, n_sites: usize, q: usize, sites: &[usize]) -> Result<ChannelLayer> {
        let mut layer = ChannelLayer::identity(n_sites, q);
        for &s in sites {
            if let Some(c) = self.build(s, q)? {
                layer.push(c)?;
            }
        }
        Ok(layer)
    }
}

/// Clamps round-off negatives of the entropy-based engines to zero.
const NEGATIVE_SLACK: f64 = 1e-10;

/// `I(A:C|B)` in bits of `layer` applied to the Gibbs state of `h`.
pub fn cmi_with_engine(engine: Engine, h: &LocalHamiltonian, beta: Beta, layer: &ChannelLayer, p: &Partition) -> Result<f64> {
    let b = beta.value();
    let raw = match engine {
        Engine::Classical => {
            let d = classical::apply_transitions(&classical::gibbs_distribution(h, b)?, layer)?;
            return classical::cmi(&d, p);
        }
        Engine::Dense => dense::quantum_cmi(&dense::apply_layer(&dense::gibbs_state(h, b)?, layer)?, p)?,
        Engine::Pauli => pauli::pauli_cmi(&pauli::apply_pauli_layer(&pauli::expand_gibbs(h, b)?, layer)?, p)?,
    };
    if raw < -NEGATIVE_SLACK {
        return Err(Error::Consistency(format!("{} engine CMI {raw:e} is negative", engine.name())));
    }
    Ok(raw.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_round_trip() {
        let b: Vec<Beta> = serde_json::from_str(r#"[0.5, "inf", 0]"#).unwrap();
        assert_eq!(b[0].value(), 0.5);
        assert!(b[1].is_infinite());
        assert_eq!(serde_json::to_string(&b).unwrap(), r#"[0.5,"inf",0.0]"#);
        assert!(serde_json::from_str::<Beta>("-1").is_err());
        assert!(serde_json::from_str::<Beta>(r#""hot""#).is_err());
    }

    #[test]
    fn channel_spec_parsing() {
        let c: ChannelSpec = serde_json::from_str(r#"{"kind": "bitflip", "p": 0.2}"#).unwrap();
        let built = c.build(0, 2).unwrap().unwrap();
        assert!((built.transition_matrix().unwrap()[(1, 0)] - 0.2).abs() < 1e-15);
        assert!(serde_json::from_str::<ChannelSpec>(r#"{"kind": "bitflip", "prob": 0.2}"#).is_err());
        let t: ChannelSpec = serde_json::from_str(r#"{"kind": "transition", "matrix": [[0.9, 0.3], [0.1, 0.7]]}"#).unwrap();
        assert_eq!(t.build(1, 2).unwrap().unwrap().transition_matrix().unwrap()[(0, 1)], 0.3);
        let k: ChannelSpec =
            serde_json::from_str(r#"{"kind": "kraus", "kraus": [[[[1,0],[0,0]],[[0,0],[1,0]]]]}"#).unwrap();
        assert!(k.build(0, 2).unwrap().unwrap().is_unital());
        assert!(ChannelSpec::simple(ChannelKindSpec::Bitflip).build(0, 2).is_err());
        assert!(ChannelSpec::simple(ChannelKindSpec::Identity).build(0, 2).unwrap().is_none());
    }
}
