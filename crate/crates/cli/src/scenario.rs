//! Scenario files: one TOML document per experiment.

use std::fmt;
use std::path::Path;

use cart_core::control::Region;
use cart_core::simulate::{DoseEvent, IntegratorConfig, Scenario};
use cart_core::{ControlLaw, ModelParams, State};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    #[serde(default = "default_clearance")]
    pub clearance_threshold: f64,
    #[serde(default = "default_relapse")]
    pub relapse_factor: f64,
}

fn default_clearance() -> f64 {
    1.0
}

fn default_relapse() -> f64 {
    10.0
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            clearance_threshold: default_clearance(),
            relapse_factor: default_relapse(),
        }
    }
}

/// A number, or a keyword asking for it to be computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    Value(f64),
    Auto,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ChoiceRepr {
    Value(f64),
    Word(String),
}

/// Serde adapter for a [`Choice`] spelled as a number or one keyword.
macro_rules! choice_serde {
    ($mod:ident, $word:literal) => {
        mod $mod {
            use super::{Choice, ChoiceRepr};
            use serde::{Deserialize, Deserializer, Serialize, Serializer};

            pub fn serialize<S: Serializer>(c: &Choice, s: S) -> Result<S::Ok, S::Error> {
                match c {
                    Choice::Value(v) => ChoiceRepr::Value(*v),
                    Choice::Auto => ChoiceRepr::Word($word.into()),
                }
                .serialize(s)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Choice, D::Error> {
                match ChoiceRepr::deserialize(d)? {
                    ChoiceRepr::Value(v) => Ok(Choice::Value(v)),
                    ChoiceRepr::Word(w) if w == $word => Ok(Choice::Auto),
                    ChoiceRepr::Word(w) => Err(serde::de::Error::custom(format!(
                        "expected a number or \"{}\", got \"{w}\"",
                        $word
                    ))),
                }
            }
        }
    };
}

choice_serde!(k_choice, "estimate");
choice_serde!(xi_choice, "auto");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub x1: [f64; 2],
    pub z2: [f64; 2],
}

impl From<RegionSpec> for Region {
    fn from(r: RegionSpec) -> Self {
        Region::new((r.x1[0], r.x1[1]), (r.z2[0], r.z2[1]))
    }
}

impl From<Region> for RegionSpec {
    fn from(r: Region) -> Self {
        Self {
            x1: [r.x1.0, r.x1.1],
            z2: [r.z2.0, r.z2.1],
        }
    }
}

/// Lyapunov certificate for a backstepping law. The gain `a` is the law's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSpec {
    /// Cross-term bound: a number or `"estimate"`.
    #[serde(with = "k_choice")]
    pub k: Choice,
    /// Weight on `x1²`: a number or `"auto"`.
    #[serde(with = "xi_choice")]
    pub xi: Choice,
    /// Defaults to the box spanned by the initial state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    /// Upper bound on the non-active population inside the region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Days.
    pub horizon: f64,
    pub params: ModelParams,
    pub initial: State,
    #[serde(default)]
    pub law: ControlLaw,
    #[serde(default)]
    pub events: Vec<DoseEvent>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSpec>,
}

impl fmt::Display for ScenarioFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = toml::to_string(self).map_err(|_| fmt::Error)?;
        f.write_str(&text)
    }
}

fn invalid(field: &str, reason: &str) -> CliError {
    CliError::Validation(format!("invalid input `{field}`: {reason}"))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let scn: ScenarioFile = toml::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        self.to_string()
    }

    pub fn validate(&self) -> CliResult<()> {
        self.params.validate()?;
        self.initial.validate("initial")?;
        self.law.validate()?;
        for (i, e) in self.events.iter().enumerate() {
            e.validate(i)?;
        }
        self.integrator.validate()?;
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(invalid("horizon", "must be finite and > 0"));
        }
        let a = &self.analysis;
        if !a.clearance_threshold.is_finite() || a.clearance_threshold <= 0.0 {
            return Err(invalid("analysis.clearance_threshold", "must be finite and > 0"));
        }
        if !a.relapse_factor.is_finite() || a.relapse_factor <= 1.0 {
            return Err(invalid("analysis.relapse_factor", "must be finite and > 1"));
        }
        if let Some(c) = &self.certificate {
            if self.law.gain().is_none() {
                return Err(invalid("certificate", "only valid with a backstepping law"));
            }
            if let Choice::Value(k) = c.k {
                if !k.is_finite() || k < 0.0 {
                    return Err(invalid("certificate.k", "must be finite and >= 0"));
                }
            }
            if let Choice::Value(xi) = c.xi {
                if !xi.is_finite() || xi <= 0.0 {
                    return Err(invalid("certificate.xi", "must be finite and > 0"));
                }
            }
            if let Some(r) = c.region {
                Region::from(r)
                    .validate()
                    .map_err(|e| CliError::Validation(e.to_string().replace("`region", "`certificate.region")))?;
            }
            if let Some(u) = c.u_bound {
                if !u.is_finite() || u < 0.0 {
                    return Err(invalid("certificate.u_bound", "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// The region a certificate covers: explicit, or spanned by the initial state.
    pub fn certificate_region(&self, a: f64) -> CliResult<Region> {
        match self.certificate.and_then(|c| c.region) {
            Some(r) => Ok(r.into()),
            None => Ok(Region::around_initial(&self.params, a, &self.initial)?),
        }
    }

    /// Bound on `x3` used by the cross-term estimate: explicit, or the larger of
    /// the controlled level and the initial value plus every dose.
    pub fn certificate_u_bound(&self) -> CliResult<f64> {
        if let Some(u) = self.certificate.and_then(|c| c.u_bound) {
            return Ok(u);
        }
        let doses: f64 = self.initial.x3 + self.events.iter().map(|e| e.delta.x3).sum::<f64>();
        let tau = self.law.tau(&self.params)?;
        let settled = cart_core::equilibria::controlled_equilibrium_with(&self.params, tau, self.law.tau_drains_pool, 0.0)
            .map(|r| r.point.x3)
            .unwrap_or(0.0);
        Ok(doses.max(settled).max(0.0))
    }

    /// Core scenario with the certificate weight, if any, resolved to `xi`.
    pub fn to_scenario(&self, xi: Option<f64>) -> Scenario {
        Scenario {
            params: self.params,
            initial: self.initial,
            law: self.law,
            events: self.events.clone(),
            horizon: self.horizon,
            integrator: self.integrator,
            xi,
        }
    }

    /// Set one sweepable quantity.
    ///
    /// Accepts a parameter name (optionally prefixed `params.`), `initial.x1`..`x3`,
    /// `horizon`, `a` (backstepping gain), `tau` (constant flux) and `dose`
    /// (non-active increment of every dose event).
    pub fn set_field(&mut self, field: &str, value: f64) -> CliResult<()> {
        let name = field.strip_prefix("params.").unwrap_or(field);
        if let Some(slot) = self.params.field_mut(name) {
            *slot = value;
            return Ok(());
        }
        match field {
            "initial.x1" => self.initial.x1 = value,
            "initial.x2" => self.initial.x2 = value,
            "initial.x3" => self.initial.x3 = value,
            "horizon" => self.horizon = value,
            "a" => match self.law.gain() {
                Some(_) => self.law = ControlLaw::backstepping(value, self.law.tau_drains_pool),
                None => return Err(invalid("a", "sweeping the gain needs a backstepping law")),
            },
            "tau" => self.law = ControlLaw::constant(value, self.law.tau_drains_pool),
            "dose" => {
                if self.events.is_empty() {
                    return Err(invalid("dose", "scenario has no dose events"));
                }
                for e in &mut self.events {
                    e.delta.x3 = value;
                }
            }
            _ => return Err(invalid(field, "not a sweepable field")),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon = 10.0
[params]
r = 0.25
b = 1e-9
gamma = 1e-6
phi = 0.1
rho = 0.2
theta = 1e-8
alpha = 1e-11
epsilon = 0.3
mu = 0.06
[initial]
x1 = 2e6
x2 = 0.0
x3 = 0.0
"#;

    #[test]
    fn defaults_fill_in() {
        let s = ScenarioFile::parse(MINIMAL).unwrap();
        assert_eq!(s.law, ControlLaw::off());
        assert!(s.events.is_empty());
        assert_eq!(s.integrator, IntegratorConfig::default());
        assert_eq!(s.analysis, Analysis::default());
        assert_eq!(ScenarioFile::parse(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = MINIMAL.replace("mu = 0.06", "mu = -0.06");
        let e = ScenarioFile::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("params.mu"), "{e}");

        let missing = MINIMAL.replace("mu = 0.06", "");
        let e = ScenarioFile::parse(&missing).unwrap_err().to_string();
        assert!(e.contains("mu"), "{e}");

        let typo = MINIMAL.replace("horizon", "horizn");
        assert!(ScenarioFile::parse(&typo).is_err());

        let neg = MINIMAL.replace("x2 = 0.0", "x2 = -1.0");
        let e = ScenarioFile::parse(&neg).unwrap_err().to_string();
        assert!(e.contains("initial.x2"), "{e}");
    }

    #[test]
    fn certificate_needs_backstepping() {
        let text = format!("{MINIMAL}\n[certificate]\nk = \"estimate\"\nxi = 10.0\n");
        let e = ScenarioFile::parse(&text).unwrap_err().to_string();
        assert!(e.contains("certificate"), "{e}");
        let text = format!("{MINIMAL}\n[law]\nkind = \"backstepping\"\na = 2.0\n[certificate]\nk = \"estimate\"\nxi = \"auto\"\n");
        let s = ScenarioFile::parse(&text).unwrap();
        let c = s.certificate.unwrap();
        assert_eq!((c.k, c.xi), (Choice::Auto, Choice::Auto));
        let text = text.replace("xi = \"auto\"", "xi = \"big\"");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn sweep_fields() {
        let mut s = ScenarioFile::parse(MINIMAL).unwrap();
        s.set_field("rho", 0.3).unwrap();
        s.set_field("params.phi", 0.05).unwrap();
        s.set_field("initial.x2", 7.0).unwrap();
        s.set_field("tau", 100.0).unwrap();
        assert_eq!((s.params.rho, s.params.phi, s.initial.x2), (0.3, 0.05, 7.0));
        assert_eq!(s.law, ControlLaw::constant(100.0, true));
        assert!(s.set_field("a", 2.0).is_err());
        assert!(s.set_field("dose", 2.0).is_err());
        assert!(s.set_field("nope", 2.0).is_err());
    }
}
