use rayon::prelude::*;
use serde::Serialize;

use super::spec::{cmi_with_engine, Beta, ChannelKindSpec, ChannelSpec, Engine};
use crate::error::{Error, Result};
use crate::model::{graph_distance, zoo::Family, Distance, Partition};

/// Default censoring floor for Markov-length fits, in bits.
pub const FIT_FLOOR: f64 = 1e-12;
/// Slopes of `ln I` per unit distance at or above this are flagged as divergent.
pub const DIVERGENCE_SLOPE: f64 = -1e-3;
/// Largest chain searched when looking for a size with a given distance.
const MAX_CHAIN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub beta: Beta,
    pub distance: usize,
    pub n_sites: usize,
    pub cmi_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub model: String,
    pub engine: Engine,
    pub channel: ChannelSpec,
    pub boundary_width: usize,
    pub points: Vec<DecayPoint>,
}

impl DecayCurve {
    pub fn betas(&self) -> Vec<Beta> {
        let mut out: Vec<Beta> = Vec::new();
        for p in &self.points {
            if !out.contains(&p.beta) {
                out.push(p.beta);
            }
        }
        out
    }

    pub fn points_at(&self, beta: Beta) -> impl Iterator<Item = &DecayPoint> {
        self.points.iter().filter(move |p| p.beta == beta)
    }
}

/// Chain size sweep over one model family.
#[derive(Debug, Clone)]
pub struct DecaySpec {
    pub family: Family,
    pub engine: Engine,
    pub channel: ChannelSpec,
    pub betas: Vec<Beta>,
    pub distances: Vec<usize>,
    /// Width of the end blocks `A` and `C`, in sites.
    pub boundary_width: usize,
}

/// Smallest chain of `family` whose end blocks of width `wa` sit at distance `d`.
pub fn chain_size_for_distance(family: Family, wa: usize, d: usize) -> Result<usize> {
    for n in (2 * wa).max(2)..=MAX_CHAIN {
        let h = family.build(n)?;
        match graph_distance(&h, &Partition::chain_ends(n, wa)?) {
            Distance::Finite(x) if x == d => return Ok(n),
            Distance::Finite(x) if x > d => break,
            _ => {}
        }
    }
    Err(Error::Config(format!("no {} chain has distance {d} between end blocks of width {wa}", family.name())))
}

/// CMI of the end blocks for every `(β, d)` pair, with the channel on every `B` site.
pub fn decay_curve(spec: &DecaySpec) -> Result<DecayCurve> {
    if spec.boundary_width == 0 {
        return Err(Error::Config("boundary width must be at least 1".into()));
    }
    if spec.distances.is_empty() || spec.distances.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("distances must be nonempty and strictly increasing".into()));
    }
    let sizes = spec
        .distances
        .iter()
        .map(|&d| chain_size_for_distance(spec.family, spec.boundary_width, d))
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(Beta, usize, usize)> = spec
        .betas
        .iter()
        .flat_map(|&b| spec.distances.iter().zip(&sizes).map(move |(&d, &n)| (b, d, n)))
        .collect();
    let points = tasks
        .par_iter()
        .map(|&(beta, distance, n_sites)| {
            let h = spec.family.build(n_sites)?;
            let p = Partition::chain_ends(n_sites, spec.boundary_width)?;
            let layer = spec.channel.layer(n_sites, h.q(), p.b())?;
            let cmi_bits = cmi_with_engine(spec.engine, &h, beta, &layer, &p)?;
            Ok(DecayPoint { beta, distance, n_sites, cmi_bits })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayCurve {
        model: spec.family.name().to_string(),
        engine: spec.engine,
        channel: spec.channel.clone(),
        boundary_width: spec.boundary_width,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovLengthFit {
    /// `-1/slope`; absent when the fit diverges.
    pub xi: Option<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub used: usize,
    pub censored: usize,
    pub diverges: bool,
}

/// Least squares of `ln I` against distance over the points above `floor`.
pub fn fit_markov_length(points: &[(f64, f64)], floor: f64) -> Result<MarkovLengthFit> {
    let usable: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > floor).map(|&(d, i)| (d, i.ln())).collect();
    let censored = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::Fit(format!("{} points above the floor {floor:e}; need at least 3", usable.len())));
    }
    let k = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all usable points share one distance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = usable.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let diverges = slope >= DIVERGENCE_SLOPE;
    Ok(MarkovLengthFit {
        xi: (!diverges).then(|| -1.0 / slope),
        slope,
        intercept,
        r_squared,
        used: usable.len(),
        censored,
        diverges,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaFit {
    pub beta: Beta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<MarkovLengthFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One fit per β of the curve; fits that fail keep their error message.
pub fn fit_curve(curve: &DecayCurve, floor: f64) -> Vec<BetaFit> {
    curve
        .betas()
        .into_iter()
        .map(|beta| {
            let pts: Vec<(f64, f64)> = curve.points_at(beta).map(|p| (p.distance as f64, p.cmi_bits)).collect();
            match fit_markov_length(&pts, floor) {
                Ok(fit) => BetaFit { beta, fit: Some(fit), error: None },
                Err(e) => BetaFit { beta, fit: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

/// `β_c = 1/(2e(𝔡+1)(1+e(𝔡−1)))` for dual-graph degree `𝔡`.
pub fn beta_c(degree: usize) -> f64 {
    let e = std::f64::consts::E;
    let d = degree as f64;
    1.0 / (2.0 * e * (d + 1.0) * (1.0 + e * (d - 1.0)))
}

/// Decay length `1/ln(β_c/β)` of the high-temperature bound; `None` at or above `β_c`.
pub fn analytic_markov_length(degree: usize, beta: f64) -> Option<f64> {
    let bc = beta_c(degree);
    (beta > 0.0 && beta < bc).then(|| 1.0 / (bc / beta).ln())
}

/// Long-range chains with their natural readout channel on `B`: the parity
/// chain through the classical engine and the Bell chain through the Pauli engine.
pub fn low_temperature_chain_demo(family: Family, betas: &[Beta], distances: &[usize]) -> Result<DecayCurve> {
    let (engine, kind) = match family {
        Family::ParityChain => (Engine::Classical, ChannelKindSpec::Parity),
        Family::BellChain => (Engine::Pauli, ChannelKindSpec::BellMeasurement),
        other => return Err(Error::Config(format!("no low-temperature demo for {}", other.name()))),
    };
    decay_curve(&DecaySpec {
        family,
        engine,
        channel: ChannelSpec::simple(kind),
        betas: betas.to_vec(),
        distances: distances.to_vec(),
        boundary_width: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: f64) -> Beta {
        Beta::new(x).unwrap()
    }

    #[test]
    fn synthetic_exponential() {
        let pts: Vec<(f64, f64)> = (1..=3).map(|d| (d as f64, (-(d as f64)).exp())).collect();
        let f = fit_markov_length(&pts, FIT_FLOOR).unwrap();
        assert!((f.xi.unwrap() - 1.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(!f.diverges);
    }

    #[test]
    fn constant_curve_diverges() {
        let f = fit_markov_length(&[(1.0, 0.7), (2.0, 0.7), (3.0, 0.7)], FIT_FLOOR).unwrap();
        assert!(f.diverges);
        assert_eq!(f.xi, None);
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(matches!(fit_markov_length(&[(1.0, 0.1), (2.0, 1e-13), (3.0, 0.0)], FIT_FLOOR), Err(Error::Fit(_))));
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|d| (d as f64, 0.3 * (-0.7 * d as f64).exp() * (1.0 + 0.01 * d as f64))).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(d, i)| (d, 17.0 * i)).collect();
        let (f, g) = (fit_markov_length(&pts, 0.0).unwrap(), fit_markov_length(&scaled, 0.0).unwrap());
        assert!((f.slope - g.slope).abs() < 1e-12);
        assert!((g.intercept - f.intercept - 17f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn chain_sizes() {
        assert_eq!(chain_size_for_distance(Family::IsingChain, 1, 1).unwrap(), 2);
        assert_eq!(chain_size_for_distance(Family::IsingChain, 1, 5).unwrap(), 6);
        let cluster: Vec<usize> =
            (2..=5).map(|d| chain_size_for_distance(Family::ClusterChain, 1, d).unwrap()).collect();
        assert_eq!(cluster, vec![4, 6, 8, 10]);
    }

    #[test]
    fn ising_curve_decreases() {
        let spec = DecaySpec {
            family: Family::IsingChain,
            engine: Engine::Classical,
            channel: ChannelSpec::with_p(ChannelKindSpec::Bitflip, 0.2),
            betas: vec![b(0.1)],
            distances: (1..=6).collect(),
            boundary_width: 1,
        };
        let c = decay_curve(&spec).unwrap();
        assert!(c.points.windows(2).all(|w| w[1].cmi_bits < w[0].cmi_bits));
    }

    #[test]
    fn infinite_temperature_has_no_cmi() {
        for (family, engine, kind) in [
            (Family::IsingChain, Engine::Classical, ChannelKindSpec::Bitflip),
            (Family::ClusterChain, Engine::Dense, ChannelKindSpec::Depolarizing),
            (Family::ClusterChain, Engine::Pauli, ChannelKindSpec::Dephasing),
        ] {
            let spec = DecaySpec {
                family,
                engine,
                channel: ChannelSpec::with_p(kind, 0.3),
                betas: vec![b(0.0)],
                distances: vec![1, 2, 3],
                boundary_width: 1,
            };
            assert!(decay_curve(&spec).unwrap().points.iter().all(|p| p.cmi_bits <= 1e-10));
        }
    }

    #[test]
    fn parity_chain_ground_state_is_flat() {
        let c = low_temperature_chain_demo(Family::ParityChain, &[Beta::INFINITE], &[1, 2, 3, 4]).unwrap();
        assert!(c.points.iter().all(|p| (p.cmi_bits - 1.0).abs() < 1e-9));
        let fits = fit_curve(&c, FIT_FLOOR);
        assert!(fits[0].fit.as_ref().unwrap().diverges);
    }

    #[test]
    fn bell_chain_ground_state_is_flat() {
        let c = low_temperature_chain_demo(Family::BellChain, &[Beta::INFINITE], &[2, 3, 4]).unwrap();
        assert!(c.points.iter().all(|p| (p.cmi_bits - 2.0).abs() < 1e-9), "{:?}", c.points);
    }

    #[test]
    fn threshold_and_analytic_length() {
        let e = std::f64::consts::E;
        assert!((beta_c(2) - 1.0 / (6.0 * e * (1.0 + e))).abs() < 1e-15);
        assert_eq!(analytic_markov_length(2, beta_c(2)), None);
        let xi = analytic_markov_length(2, beta_c(2) / 2.0).unwrap();
        assert!((xi - 1.0 / 2f64.ln()).abs() < 1e-12);
    }
}
