//! The twelve detectors behind one identifier type.

use std::fmt;
use std::str::FromStr;

use crate::ep::{self, EpInput};
use crate::error::{Error, Result};
use crate::glr_fo::{self, GlrFoInput};
use crate::matcore::ComplexMatrix;
use crate::scenario::{Environment, ScenarioConfig, SignalOrder, SubspaceBasis};

/// Whether the signal subspace is known exactly or only through its rank.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Subspace {
    Known,
    Unknown,
}

impl Subspace {
    pub fn as_str(self) -> &'static str {
        match self {
            Subspace::Known => "KS",
            Subspace::Unknown => "US",
        }
    }
}

/// Statistic family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Glr,
    EstimateAndPlug,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorId {
    FoKsHe,
    FoKsPhe,
    FoUsHe,
    FoUsPhe,
    EpFoKsHe,
    EpFoKsPhe,
    EpFoUsHe,
    EpFoUsPhe,
    EpSoKsHe,
    EpSoKsPhe,
    EpSoUsHe,
    EpSoUsPhe,
}

impl DetectorId {
    pub const ALL: [DetectorId; 12] = [
        DetectorId::FoKsHe,
        DetectorId::FoKsPhe,
        DetectorId::FoUsHe,
        DetectorId::FoUsPhe,
        DetectorId::EpFoKsHe,
        DetectorId::EpFoKsPhe,
        DetectorId::EpFoUsHe,
        DetectorId::EpFoUsPhe,
        DetectorId::EpSoKsHe,
        DetectorId::EpSoKsPhe,
        DetectorId::EpSoUsHe,
        DetectorId::EpSoUsPhe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorId::FoKsHe => "FO-KS-HE",
            DetectorId::FoKsPhe => "FO-KS-PHE",
            DetectorId::FoUsHe => "FO-US-HE",
            DetectorId::FoUsPhe => "FO-US-PHE",
            DetectorId::EpFoKsHe => "EP-FO-KS-HE",
            DetectorId::EpFoKsPhe => "EP-FO-KS-PHE",
            DetectorId::EpFoUsHe => "EP-FO-US-HE",
            DetectorId::EpFoUsPhe => "EP-FO-US-PHE",
            DetectorId::EpSoKsHe => "EP-SO-KS-HE",
            DetectorId::EpSoKsPhe => "EP-SO-KS-PHE",
            DetectorId::EpSoUsHe => "EP-SO-US-HE",
            DetectorId::EpSoUsPhe => "EP-SO-US-PHE",
        }
    }

    pub fn family(self) -> Family {
        use DetectorId::*;
        match self {
            FoKsHe | FoKsPhe | FoUsHe | FoUsPhe => Family::Glr,
            _ => Family::EstimateAndPlug,
        }
    }

    pub fn env(self) -> Environment {
        use DetectorId::*;
        match self {
            FoKsHe | FoUsHe | EpFoKsHe | EpFoUsHe | EpSoKsHe | EpSoUsHe => Environment::Homogeneous,
            _ => Environment::PartiallyHomogeneous,
        }
    }

    pub fn order(self) -> SignalOrder {
        use DetectorId::*;
        match self {
            EpSoKsHe | EpSoKsPhe | EpSoUsHe | EpSoUsPhe => SignalOrder::Second,
            _ => SignalOrder::First,
        }
    }

    pub fn subspace(self) -> Subspace {
        use DetectorId::*;
        match self {
            FoKsHe | FoKsPhe | EpFoKsHe | EpFoKsPhe | EpSoKsHe | EpSoKsPhe => Subspace::Known,
            _ => Subspace::Unknown,
        }
    }

    /// Dimension conditions that must hold before any trial is run.
    pub fn check_preconditions(self, cfg: &ScenarioConfig) -> Result<()> {
        cfg.validate()?;
        match self {
            DetectorId::FoKsPhe => glr_fo::ks_phe_condition(cfg.n, cfg.k_p, cfg.k_s, cfg.r),
            DetectorId::FoUsPhe => glr_fo::us_phe_condition(cfg.n, cfg.k_p, cfg.k_s, cfg.r),
            DetectorId::EpFoKsPhe if cfg.r >= cfg.n => Err(Error::Precondition(format!(
                "EP-FO-KS-PHE needs r < N; got r={}, N={}",
                cfg.r, cfg.n
            ))),
            _ => Ok(()),
        }
    }

    pub fn evaluate_glr(self, input: &GlrFoInput) -> Result<f64> {
        match self {
            DetectorId::FoKsHe => glr_fo::stat_fo_ks_he(input),
            DetectorId::FoKsPhe => glr_fo::stat_fo_ks_phe(input),
            DetectorId::FoUsHe => glr_fo::stat_fo_us_he(input),
            DetectorId::FoUsPhe => glr_fo::stat_fo_us_phe(input),
            other => Err(Error::Precondition(format!("{other} is not a GLR detector"))),
        }
    }

    pub fn evaluate_ep(self, input: &EpInput) -> Result<f64> {
        match self {
            DetectorId::EpFoKsHe => ep::stat_ep_fo_ks_he(input),
            DetectorId::EpFoKsPhe => ep::stat_ep_fo_ks_phe(input),
            DetectorId::EpFoUsHe => ep::stat_ep_fo_us_he(input),
            DetectorId::EpFoUsPhe => ep::stat_ep_fo_us_phe(input),
            DetectorId::EpSoKsHe => ep::stat_ep_so_ks_he(input),
            DetectorId::EpSoKsPhe => ep::stat_ep_so_ks_phe(input),
            DetectorId::EpSoUsHe => ep::stat_ep_so_us_he(input),
            DetectorId::EpSoUsPhe => ep::stat_ep_so_us_phe(input),
            other => Err(Error::Precondition(format!("{other} is not an estimate-and-plug detector"))),
        }
    }

    /// Statistic on one data set; larger values favour H1.
    pub fn evaluate(
        self,
        z_p: &ComplexMatrix,
        z_s: &ComplexMatrix,
        basis: &SubspaceBasis,
    ) -> Result<f64> {
        evaluate_many(&[self], z_p, z_s, basis).pop().expect("one result")
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        DetectorId::ALL
            .iter()
            .copied()
            .find(|d| d.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::UnknownDetector(t.to_string()))
    }
}

/// Parses a comma-separated list of detector names.
pub fn parse_list(s: &str) -> Result<Vec<DetectorId>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(DetectorId::from_str)
        .collect()
}

/// Evaluates several detectors on the same data, whitening once per family.
///
/// Known-subspace statistics use `basis`; unknown-subspace ones use only its rank.
pub fn evaluate_many(
    ids: &[DetectorId],
    z_p: &ComplexMatrix,
    z_s: &ComplexMatrix,
    basis: &SubspaceBasis,
) -> Vec<Result<f64>> {
    let r = basis.rank();
    let mut glr: Option<Result<GlrFoInput>> = None;
    let mut epi: Option<Result<EpInput>> = None;
    ids.iter()
        .map(|&id| {
            let value = match id.family() {
                Family::Glr => {
                    match glr.get_or_insert_with(|| GlrFoInput::new(z_p, z_s, Some(basis), r)) {
                        Ok(input) => id.evaluate_glr(input),
                        Err(_) => GlrFoInput::new(z_p, z_s, Some(basis), r).map(|_| f64::NAN),
                    }
                }
                Family::EstimateAndPlug => {
                    match epi.get_or_insert_with(|| EpInput::new(z_p, z_s, Some(basis), r)) {
                        Ok(input) => id.evaluate_ep(input),
                        Err(_) => EpInput::new(z_p, z_s, Some(basis), r).map(|_| f64::NAN),
                    }
                }
            };
            value.and_then(|v| if v.is_nan() { Err(Error::NonFinite) } else { Ok(v) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::testutil::{random_basis, random_matrix};

    #[test]
    fn names_round_trip() {
        for id in DetectorId::ALL {
            assert_eq!(id.name().parse::<DetectorId>().unwrap(), id);
            let env = if id.name().ends_with("-PHE") { "PHE" } else { "HE" };
            assert_eq!(id.env().as_str(), env);
            assert!(id.name().contains(id.subspace().as_str()));
            let so = id.name().contains("-SO-");
            assert_eq!(id.order() == SignalOrder::Second, so);
        }
        assert!(matches!("FO-XX-HE".parse::<DetectorId>(), Err(Error::UnknownDetector(_))));
        assert_eq!(
            parse_list(" FO-KS-HE, EP-SO-US-PHE ,").unwrap(),
            vec![DetectorId::FoKsHe, DetectorId::EpSoUsPhe]
        );
    }

    #[test]
    fn ks_phe_gate_reported_before_running() {
        let cfg = ScenarioConfig {
            n: 8,
            k_p: 16,
            k_s: 8,
            r: 6,
            ..ScenarioConfig::default()
        };
        let err = DetectorId::FoKsPhe.check_preconditions(&cfg).unwrap_err();
        assert!(err.to_string().contains("min(K_P, N-r)"));
        assert!(DetectorId::FoKsHe.check_preconditions(&cfg).is_ok());
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = RngStream::new(90, 0);
        let z_p = random_matrix(6, 6, &mut rng);
        let z_s = random_matrix(6, 12, &mut rng);
        let h = random_basis(6, 2, &mut rng);
        let all = evaluate_many(&DetectorId::ALL, &z_p, &z_s, &h);
        for (id, v) in DetectorId::ALL.iter().zip(all) {
            let single = id.evaluate(&z_p, &z_s, &h).unwrap();
            assert_eq!(v.unwrap().to_bits(), single.to_bits(), "{id}");
        }
    }

    #[test]
    fn singular_secondary_fails_every_detector() {
        let mut rng = RngStream::new(91, 0);
        let z_p = random_matrix(4, 4, &mut rng);
        let z_s = ComplexMatrix::zeros(4, 8);
        let h = random_basis(4, 1, &mut rng);
        assert!(evaluate_many(&DetectorId::ALL, &z_p, &z_s, &h).iter().all(Result::is_err));
    }
}
