//! Scenario parameters and the normalized quantities derived from them.
//!
//! Physical units stay at this boundary: powers in dBm, noise in dBm/Hz,
//! distances in meters. Everything downstream works with linear mW and the
//! dimensionless transmit SNR.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// All scenario parameters. Field names double as config-file keys and CLI
/// flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Line-process intensity on the representation space, per m².
    pub lambda_l: f64,
    /// Base-station intensity per line, per m.
    pub lambda_b: f64,
    /// User intensity per line, per m. Only used for network snapshots.
    pub lambda_u: f64,
    /// Base-station transmit power, dBm.
    pub p_tx_dbm: f64,
    /// Thermal noise power spectral density, dBm/Hz.
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    /// Recorded for completeness; path loss has no frequency term.
    pub carrier_hz: f64,
    /// Fraction of each serving BS's power spent on its NOMA user.
    pub beta: f64,
    /// Path-loss exponent between nodes on the same road.
    pub alpha0: f64,
    /// Path-loss exponent between nodes on different roads.
    pub alpha1: f64,
    /// Distance from the CoMP user to the left serving BS, m.
    pub d1: f64,
    /// Distance from the CoMP user to the right serving BS, m.
    pub d2: f64,
    /// Minimum distance between the CoMP user and its serving BSs, m.
    pub exclusion_d: f64,
    /// Half-length of the segment the NOMA users are dropped in, m.
    pub seg_radius: f64,
    /// Target rates of the CoMP user and the two NOMA users, bps/Hz.
    pub rates: [f64; 3],
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            lambda_l: 5e-4,
            lambda_b: 5e-3,
            lambda_u: 5e-3,
            p_tx_dbm: 30.0,
            noise_psd_dbm_hz: -170.0,
            bandwidth_hz: 10e6,
            carrier_hz: 2e9,
            beta: 0.2,
            alpha0: 3.0,
            alpha1: 4.0,
            d1: 100.0,
            d2: 100.0,
            exclusion_d: 10.0,
            seg_radius: 20.0,
            rates: [0.5, 0.5, 0.5],
        }
    }
}

/// Linear-unit quantities computed from a [`SystemConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub sigma2_mw: f64,
    pub p_tx_mw: f64,
    /// Transmit SNR, `p_tx_mw / sigma2_mw`.
    pub rho: f64,
    /// SINR thresholds `2^R - 1` for users 0, 1, 2.
    pub eps: [f64; 3],
    /// Whether `1 - beta - eps0 * beta > 0`, i.e. the CoMP rate is reachable
    /// at all with this power split.
    pub comp_feasible: bool,
}

impl DerivedParams {
    /// `1 - beta - eps0 * beta`; the denominator shared by every CoMP threshold.
    pub fn comp_margin(&self, beta: f64) -> f64 {
        1.0 - beta - self.eps[0] * beta
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// `2^rate - 1`, accurate for small rates.
pub fn rate_threshold(rate: f64) -> f64 {
    (rate * std::f64::consts::LN_2).exp_m1()
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl SystemConfig {
    /// Checks every invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("lambda_l", self.lambda_l),
            ("lambda_b", self.lambda_b),
            ("lambda_u", self.lambda_u),
            ("p_tx_dbm", self.p_tx_dbm),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
            ("beta", self.beta),
            ("alpha0", self.alpha0),
            ("alpha1", self.alpha1),
            ("d1", self.d1),
            ("d2", self.d2),
            ("exclusion_d", self.exclusion_d),
            ("seg_radius", self.seg_radius),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(invalid(field, format!("must be finite, got {v}")));
            }
        }
        for (field, v) in [
            ("lambda_l", self.lambda_l),
            ("lambda_b", self.lambda_b),
            ("lambda_u", self.lambda_u),
        ] {
            if v < 0.0 {
                return Err(invalid(field, format!("must be non-negative, got {v}")));
            }
        }
        for (field, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("d1", self.d1),
            ("d2", self.d2),
        ] {
            if v <= 0.0 {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        if self.carrier_hz < 0.0 {
            return Err(invalid("carrier_hz", "must be non-negative"));
        }
        if self.exclusion_d < 0.0 {
            return Err(invalid("exclusion_d", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid(
                "beta",
                format!("must lie in [0, 1], got {}", self.beta),
            ));
        }
        if self.alpha0 <= 1.0 {
            return Err(invalid(
                "alpha0",
                format!("must exceed 1, got {}", self.alpha0),
            ));
        }
        if self.alpha1 <= 2.0 {
            return Err(invalid(
                "alpha1",
                format!("must exceed 2, got {}", self.alpha1),
            ));
        }
        if self.d1 < self.exclusion_d {
            return Err(invalid("d1", "must be at least exclusion_d"));
        }
        if self.d2 < self.exclusion_d {
            return Err(invalid("d2", "must be at least exclusion_d"));
        }
        if self.seg_radius < 0.0 || self.seg_radius >= 0.5 * (self.d1 + self.d2) {
            return Err(invalid(
                "seg_radius",
                format!(
                    "must lie in [0, (d1 + d2) / 2) = [0, {}), got {}",
                    0.5 * (self.d1 + self.d2),
                    self.seg_radius
                ),
            ));
        }
        for r in self.rates {
            if !(r.is_finite() && r >= 0.0) {
                return Err(invalid(
                    "rates",
                    format!("must be finite and non-negative, got {r}"),
                ));
            }
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        self.validate()?;
        let sigma2_mw = dbm_to_mw(self.noise_psd_dbm_hz) * self.bandwidth_hz;
        let p_tx_mw = dbm_to_mw(self.p_tx_dbm);
        let eps = self.rates.map(rate_threshold);
        let comp_feasible = 1.0 - self.beta - eps[0] * self.beta > 0.0;
        Ok(DerivedParams {
            sigma2_mw,
            p_tx_mw,
            rho: p_tx_mw / sigma2_mw,
            eps,
            comp_feasible,
        })
    }

    /// True when both configs produce statistically identical network
    /// realizations, so one set of Monte Carlo trials can serve both.
    pub fn same_geometry(&self, other: &SystemConfig) -> bool {
        self.lambda_l == other.lambda_l
            && self.lambda_b == other.lambda_b
            && self.alpha0 == other.alpha0
            && self.alpha1 == other.alpha1
            && self.d1 == other.d1
            && self.d2 == other.d2
            && self.seg_radius == other.seg_radius
    }

    /// Parses a flat `key = value` config file. Every field is required.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Names accepted by [`SystemConfig::set_field`].
    pub const FIELD_NAMES: [&'static str; 15] = [
        "lambda_l",
        "lambda_b",
        "lambda_u",
        "p_tx_dbm",
        "noise_psd_dbm_hz",
        "bandwidth_hz",
        "carrier_hz",
        "beta",
        "alpha0",
        "alpha1",
        "d1",
        "d2",
        "exclusion_d",
        "seg_radius",
        "rates",
    ];

    /// Sets a field by name from its textual value. `rates` takes three
    /// comma-separated numbers. Does not re-validate.
    pub fn set_field(&mut self, name: &str, value: &str) -> Result<()> {
        let parse = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{name}`: cannot parse `{v}` as a number")))
        };
        let slot = match name {
            "lambda_l" => &mut self.lambda_l,
            "lambda_b" => &mut self.lambda_b,
            "lambda_u" => &mut self.lambda_u,
            "p_tx_dbm" => &mut self.p_tx_dbm,
            "noise_psd_dbm_hz" => &mut self.noise_psd_dbm_hz,
            "bandwidth_hz" => &mut self.bandwidth_hz,
            "carrier_hz" => &mut self.carrier_hz,
            "beta" => &mut self.beta,
            "alpha0" => &mut self.alpha0,
            "alpha1" => &mut self.alpha1,
            "d1" => &mut self.d1,
            "d2" => &mut self.d2,
            "exclusion_d" => &mut self.exclusion_d,
            "seg_radius" => &mut self.seg_radius,
            "rates" => {
                let parts: Vec<&str> = value.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::Parse(format!(
                        "`rates` needs three comma-separated values, got `{value}`"
                    )));
                }
                for (slot, part) in self.rates.iter_mut().zip(parts) {
                    *slot = parse(part)?;
                }
                return Ok(());
            }
            _ => return Err(Error::Parse(format!("unknown config field `{name}`"))),
        };
        *slot = parse(value)?;
        Ok(())
    }

    /// Reads a numeric field by name (not `rates`).
    pub fn get_field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "lambda_l" => self.lambda_l,
            "lambda_b" => self.lambda_b,
            "lambda_u" => self.lambda_u,
            "p_tx_dbm" => self.p_tx_dbm,
            "noise_psd_dbm_hz" => self.noise_psd_dbm_hz,
            "bandwidth_hz" => self.bandwidth_hz,
            "carrier_hz" => self.carrier_hz,
            "beta" => self.beta,
            "alpha0" => self.alpha0,
            "alpha1" => self.alpha1,
            "d1" => self.d1,
            "d2" => self.d2,
            "exclusion_d" => self.exclusion_d,
            "seg_radius" => self.seg_radius,
            _ => return None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_noise_and_snr() {
        let d = SystemConfig::default().derive().unwrap();
        assert!((mw_to_dbm(d.sigma2_mw) - -100.0).abs() < 1e-9);
        assert!((d.rho / 1e13 - 1.0).abs() < 1e-12);
        assert_eq!(d.rho, d.p_tx_mw / d.sigma2_mw);
    }

    #[test]
    fn zero_rate_is_always_feasible() {
        let cfg = SystemConfig {
            rates: [0.0, 0.5, 0.5],
            beta: 0.99,
            ..Default::default()
        };
        let d = cfg.derive().unwrap();
        assert_eq!(d.eps[0], 0.0);
        assert!(d.comp_feasible);
    }

    #[test]
    fn feasibility_margin_example() {
        let cfg = SystemConfig {
            rates: [2.0, 1.0, 1.0],
            beta: 0.2,
            ..Default::default()
        };
        let d = cfg.derive().unwrap();
        assert!((d.eps[0] - 3.0).abs() < 1e-15);
        assert!((d.comp_margin(cfg.beta) - 0.2).abs() < 1e-15);
        assert!(d.comp_feasible);

        let infeasible = SystemConfig {
            rates: [3.0, 1.0, 1.0],
            ..cfg
        };
        assert!(!infeasible.derive().unwrap().comp_feasible);
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let cases: [(&str, SystemConfig); 6] = [
            (
                "beta",
                SystemConfig {
                    beta: 1.5,
                    ..Default::default()
                },
            ),
            (
                "alpha0",
                SystemConfig {
                    alpha0: 1.0,
                    ..Default::default()
                },
            ),
            (
                "alpha1",
                SystemConfig {
                    alpha1: 2.0,
                    ..Default::default()
                },
            ),
            (
                "d1",
                SystemConfig {
                    d1: 5.0,
                    ..Default::default()
                },
            ),
            (
                "seg_radius",
                SystemConfig {
                    seg_radius: 100.0,
                    ..Default::default()
                },
            ),
            (
                "bandwidth_hz",
                SystemConfig {
                    bandwidth_hz: 0.0,
                    ..Default::default()
                },
            ),
        ];
        for (name, cfg) in cases {
            match cfg.derive() {
                Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, name),
                other => panic!("{name}: expected invalid config, got {other:?}"),
            }
        }
    }

    #[test]
    fn toml_round_trip_and_missing_field() {
        let cfg = SystemConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(SystemConfig::from_toml_str(&text).unwrap(), cfg);

        let without: String = text
            .lines()
            .filter(|l| !l.starts_with("lambda_b"))
            .collect::<Vec<_>>()
            .join("\n");
        let err = SystemConfig::from_toml_str(&without)
            .unwrap_err()
            .to_string();
        assert!(err.contains("lambda_b"), "{err}");
    }

    #[test]
    fn set_field_by_name() {
        let mut cfg = SystemConfig::default();
        cfg.set_field("lambda_b", "1e-3").unwrap();
        cfg.set_field("rates", "2,1,1").unwrap();
        assert_eq!(cfg.lambda_b, 1e-3);
        assert_eq!(cfg.rates, [2.0, 1.0, 1.0]);
        assert!(cfg.set_field("nope", "1").is_err());
        for name in SystemConfig::FIELD_NAMES.iter().filter(|n| **n != "rates") {
            assert!(cfg.get_field(name).is_some(), "{name}");
        }
    }

    proptest! {
        #[test]
        fn dbm_round_trip(dbm in -200.0f64..100.0) {
            let back = mw_to_dbm(dbm_to_mw(dbm));
            prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
        }

        #[test]
        fn derive_is_pure(beta in 0.0f64..1.0, r0 in 0.0f64..4.0) {
            let cfg = SystemConfig { beta, rates: [r0, 0.5, 1.0], ..Default::default() };
            let a = cfg.derive().unwrap();
            let b = cfg.clone().derive().unwrap();
            prop_assert_eq!(a.rho.to_bits(), b.rho.to_bits());
            prop_assert_eq!(a.eps.map(f64::to_bits), b.eps.map(f64::to_bits));
            prop_assert_eq!(a.comp_feasible, 1.0 - beta - a.eps[0] * beta > 0.0);
        }
    }
}
