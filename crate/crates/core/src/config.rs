//! Experiment configuration: a single JSON document describing the
//! lattice, control support, quadrature, time grid, initial datum and
//! per-command options. No environment overrides except the output
//! directory, so a config plus a seed reproduces a run byte for byte.

use crate::control::{ControlParams, SupportBox};
use crate::error::{Error, Result};
use crate::estimate::random_divfree_field;
use crate::field::SpectralField;
use crate::functionals::QuadratureSpec;
use crate::lattice::LatticeSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n: usize,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportBoxConfig {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

/// Uniform sample grid for trajectory output: `points` times on [0, t_end].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    pub t_end: f64,
    pub points: usize,
}

impl Default for TimeGridConfig {
    fn default() -> Self {
        TimeGridConfig {
            t_end: 3.0,
            points: 121,
        }
    }
}

impl TimeGridConfig {
    pub fn times(&self) -> Result<Vec<f64>> {
        if self.points < 2 || !(self.t_end > 0.0) {
            return Err(Error::Config(format!(
                "time grid needs t_end > 0 and >= 2 points, got {self:?}"
            )));
        }
        Ok((0..self.points)
            .map(|i| self.t_end * i as f64 / (self.points - 1) as f64)
            .collect())
    }
}

/// Named initial-datum generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    /// The zero field.
    Zero,
    /// A single Fourier mode pair +-k on one component, Leray-projected
    /// and scaled to the requested L2 norm.
    SingleMode {
        k: [i64; 3],
        component: usize,
        #[serde(default = "one")]
        norm: f64,
    },
    /// mu * u for the configured control u. Exactly one of `mu` and
    /// `mu_times_g_inf` must be given; the latter is resolved against the
    /// control's total trace integral g_inf (blow-up threshold 1/g_inf).
    ControlMultiple {
        #[serde(default)]
        mu: Option<f64>,
        #[serde(default)]
        mu_times_g_inf: Option<f64>,
    },
    /// Seeded random smooth divergence-free field with the given norm.
    RandomSmooth {
        seed: u64,
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "one")]
        norm: f64,
    },
    /// Load a previously written binary field file.
    File { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

fn default_decay() -> f64 {
    0.6
}

/// Oracle comparison options for `simulate --oracle`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub dt: f64,
    pub t_end: f64,
}

/// One sweep axis with its values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// "lambda_factor", "mu_times_g_inf" or "cutoff_k"
    pub axis: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub support: Option<SupportBoxConfig>,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: [f64; 3],
    #[serde(default)]
    pub quadrature: Option<QuadratureSpec>,
    #[serde(default)]
    pub time_grid: TimeGridConfig,
    #[serde(default)]
    pub datum: Option<DatumSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// certify/stabilize: number of log-spaced certificate points
    #[serde(default = "default_cert_points")]
    pub cert_points: usize,
    /// classify: half-width of the Undetermined band around sup = 1
    #[serde(default = "default_tolerance")]
    pub classification_tolerance: f64,
    /// stabilize/sweep: sample count for the empirical constants
    #[serde(default = "default_estimator_samples")]
    pub estimator_samples: usize,
    /// build-control: also build at 2K and emit a convergence table
    #[serde(default)]
    pub k_doubling: bool,
    /// certify: flip the sign of the control before certification
    #[serde(default)]
    pub negate_control: bool,
    /// simulate: compare against the explicit time-stepper
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    /// stabilize: force lambda instead of the synthesized value
    #[serde(default)]
    pub lambda_override: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_amplitudes() -> [f64; 3] {
    // symmetric amplitudes make Psi vanish identically; see control module
    crate::control::FALLBACK_AMPLITUDES
}

fn default_cert_points() -> usize {
    200
}

fn default_tolerance() -> f64 {
    1e-3
}

fn default_estimator_samples() -> usize {
    18
}

impl ExperimentConfig {
    /// Parse and validate a config file; returns the config and the
    /// SHA-256 of the raw document.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path)?;
        let config: ExperimentConfig = serde_json::from_slice(&bytes)?;
        config.validate()?;
        Ok((config, crate::io::sha256_bytes(&bytes)))
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice_spec()?;
        self.support_box()?;
        if let Some(q) = &self.quadrature {
            q.validate()?;
        }
        self.time_grid.times()?;
        if self.cert_points < 2 {
            return Err(Error::Config("cert_points must be >= 2".into()));
        }
        if !(self.classification_tolerance > 0.0 && self.classification_tolerance < 1.0) {
            return Err(Error::Config(format!(
                "classification_tolerance {} outside (0, 1)",
                self.classification_tolerance
            )));
        }
        if let Some(DatumSpec::File { path }) = &self.datum {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "datum file {} does not exist",
                    path.display()
                )));
            }
        }
        if let Some(DatumSpec::ControlMultiple { mu, mu_times_g_inf }) = &self.datum {
            if mu.is_some() == mu_times_g_inf.is_some() {
                return Err(Error::Config(
                    "control_multiple needs exactly one of mu, mu_times_g_inf".into(),
                ));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep axis has no values".into()));
            }
            match sweep.axis.as_str() {
                "lambda_factor" | "mu_times_g_inf" | "cutoff_k" => {}
                other => {
                    return Err(Error::Config(format!("unknown sweep axis '{other}'")));
                }
            }
        }
        Ok(())
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.lattice.n, self.lattice.k)
    }

    pub fn support_box(&self) -> Result<SupportBox> {
        match &self.support {
            Some(s) => SupportBox::new(s.a, s.b),
            None => Ok(SupportBox::default_box()),
        }
    }

    pub fn control_params(&self) -> Result<ControlParams> {
        let support = self.support_box()?;
        let params = ControlParams {
            support,
            p: crate::control::choose_p(&support),
            amplitudes: self.amplitudes,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        self.quadrature.unwrap_or_default()
    }

    /// Materialize the initial datum. `control` supplies (u, g_inf) and is
    /// required only for the control_multiple generator.
    pub fn resolve_datum(
        &self,
        lattice: LatticeSpec,
        control: Option<(&SpectralField, f64)>,
    ) -> Result<SpectralField> {
        let spec = self
            .datum
            .as_ref()
            .ok_or_else(|| Error::Config("no initial datum configured".into()))?;
        match spec {
            DatumSpec::Zero => Ok(SpectralField::zeros(lattice)),
            DatumSpec::SingleMode { k, component, norm } => {
                single_mode_datum(lattice, *k, *component, *norm)
            }
            DatumSpec::ControlMultiple { mu, mu_times_g_inf } => {
                let (u, g_inf) = control.ok_or_else(|| {
                    Error::Config("control_multiple datum requires a built control".into())
                })?;
                let mu = match (mu, mu_times_g_inf) {
                    (Some(m), None) => *m,
                    (None, Some(r)) => {
                        if g_inf <= 0.0 {
                            return Err(Error::Invariant(format!(
                                "control trace integral g_inf = {g_inf} is not positive; \
                                 mu_times_g_inf is meaningless"
                            )));
                        }
                        r / g_inf
                    }
                    _ => {
                        return Err(Error::Config(
                            "control_multiple needs exactly one of mu, mu_times_g_inf".into(),
                        ))
                    }
                };
                Ok(u.scaled(mu))
            }
            DatumSpec::RandomSmooth { seed, decay, norm } => {
                Ok(random_divfree_field(lattice, *seed, *decay).scaled(*norm))
            }
            DatumSpec::File { path } => {
                let f = crate::io::read_field(path)?;
                if f.lattice() != lattice {
                    return Err(Error::LatticeMismatch(
                        format!("{:?}", f.lattice()),
                        format!("{lattice:?}"),
                    ));
                }
                Ok(f)
            }
        }
    }
}

/// Cosine mode on one component at wavevector +-k, projected onto the
/// divergence-free mean-zero space and scaled to the requested norm.
fn single_mode_datum(
    lattice: LatticeSpec,
    k: [i64; 3],
    component: usize,
    norm: f64,
) -> Result<SpectralField> {
    if component > 2 {
        return Err(Error::Config(format!(
            "single_mode component {component} out of range 0..3"
        )));
    }
    if k == [0, 0, 0] {
        return Err(Error::Config(
            "single_mode wavevector must be nonzero".into(),
        ));
    }
    let kmax = lattice.k as i64;
    if k.iter().any(|&ki| ki.abs() > kmax) {
        return Err(Error::Config(format!(
            "single_mode wavevector {k:?} outside cutoff K = {kmax}"
        )));
    }
    let mut f = SpectralField::zeros(lattice);
    let mut value = [Complex64::new(0.0, 0.0); 3];
    value[component] = Complex64::new(0.5, 0.0);
    f.set_coeff(k, value);
    f.set_coeff([-k[0], -k[1], -k[2]], value);
    let projected = f.leray_project();
    let n0 = projected.norm0();
    if n0 == 0.0 {
        return Err(Error::Config(format!(
            "single_mode datum with k = {k:?}, component {component} is a pure \
             gradient; projection annihilates it"
        )));
    }
    Ok(projected.scaled(norm / n0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(datum: Option<DatumSpec>) -> ExperimentConfig {
        ExperimentConfig {
            lattice: LatticeConfig { n: 16, k: 4 },
            support: None,
            amplitudes: default_amplitudes(),
            quadrature: None,
            time_grid: TimeGridConfig::default(),
            datum,
            output_dir: None,
            seed: None,
            cert_points: default_cert_points(),
            classification_tolerance: default_tolerance(),
            estimator_samples: default_estimator_samples(),
            k_doubling: false,
            negate_control: false,
            oracle: None,
            lambda_override: None,
            sweep: None,
        }
    }

    #[test]
    fn parses_minimal_document() {
        let doc = r#"{
            "lattice": {"n": 32, "k": 8},
            "datum": {"kind": "single_mode", "k": [0, 0, 1], "component": 0}
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(doc).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.amplitudes, crate::control::FALLBACK_AMPLITUDES);
        assert_eq!(cfg.cert_points, 200);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_lattice() {
        let doc = r#"{"lattice": {"n": 32, "k": 8}, "bogus": 1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(doc).is_err());
        let mut cfg = minimal(None);
        cfg.lattice = LatticeConfig { n: 16, k: 8 }; // N < 3K+1
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn control_multiple_needs_exactly_one_amplitude() {
        let mut cfg = minimal(Some(DatumSpec::ControlMultiple {
            mu: Some(1.0),
            mu_times_g_inf: Some(2.0),
        }));
        assert!(cfg.validate().is_err());
        cfg.datum = Some(DatumSpec::ControlMultiple {
            mu: None,
            mu_times_g_inf: None,
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_mode_datum_is_divergence_free_and_normalized() {
        let lat = LatticeSpec::new(16, 4).unwrap();
        let f = single_mode_datum(lat, [0, 0, 1], 0, 2.5).unwrap();
        assert!(f.divergence_defect() < 1e-14);
        assert!((f.norm0() - 2.5).abs() < 1e-12);
        assert!(f.hermitian_defect() < 1e-14);
        // k parallel to the chosen component: projection annihilates
        assert!(single_mode_datum(lat, [0, 0, 1], 2, 1.0).is_err());
        assert!(single_mode_datum(lat, [0, 0, 9], 0, 1.0).is_err());
    }

    #[test]
    fn resolve_control_multiple_scales_by_g_inf() {
        let lat = LatticeSpec::new(16, 4).unwrap();
        let u = random_divfree_field(lat, 5, 0.6);
        let cfg = minimal(Some(DatumSpec::ControlMultiple {
            mu: None,
            mu_times_g_inf: Some(2.0),
        }));
        let y0 = cfg.resolve_datum(lat, Some((&u, 0.5))).unwrap();
        assert!((y0.norm0() - 4.0).abs() < 1e-12);
        assert!(cfg.resolve_datum(lat, None).is_err());
    }
}
