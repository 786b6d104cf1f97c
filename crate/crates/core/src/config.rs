//! TOML experiment configuration.
//!
//! ```toml
//! kind = "roup"
//! out = "runs/fig1"
//!
//! [roup]
//! q = [1.0]
//! times = [0.5, 2.0, 10.0]
//! ```
//!
//! Jets are a named preset or inline term tables:
//!
//! ```toml
//! [converge.jet]
//! zeta0 = -1.5707963267948966
//! theta_bar = [{ coef = 0.3, trig = { kind = "cos", x_freq = 1.0 } }]
//! xi_bar = [{ coef = 0.2 }]
//! ```

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qwalk::{zero_field, JetSpec, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Walk,
    Dirac,
    Converge,
    Roup,
    Metric,
    Heuristic,
    Verify,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Walk => "walk",
            Kind::Dirac => "dirac",
            Kind::Converge => "converge",
            Kind::Roup => "roup",
            Kind::Metric => "metric",
            Kind::Heuristic => "heuristic",
            Kind::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigKind {
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trig {
    pub kind: TrigKind,
    #[serde(default)]
    pub t_freq: f64,
    #[serde(default)]
    pub x_freq: f64,
    #[serde(default)]
    pub phase: f64,
}

/// `coef · T^t_pow · X^x_pow · trig(t_freq·T + x_freq·X + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub t_pow: u32,
    #[serde(default)]
    pub x_pow: u32,
    #[serde(default)]
    pub trig: Option<Trig>,
}

impl Term {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let mut v = self.coef * t.powi(self.t_pow as i32) * x.powi(self.x_pow as i32);
        if let Some(trig) = &self.trig {
            let arg = trig.t_freq * t + trig.x_freq * x + trig.phase;
            v *= match trig.kind {
                TrigKind::Sin => arg.sin(),
                TrigKind::Cos => arg.cos(),
            };
        }
        v
    }
}

fn field_from_terms(terms: &[Term]) -> ScalarField {
    if terms.is_empty() {
        return zero_field();
    }
    let terms = terms.to_vec();
    Arc::new(move |t, x| terms.iter().map(|term| term.eval(t, x)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JetPreset {
    /// Massless, no potential.
    Free,
    /// Constant real mass `θ̄ = 1`.
    Mass,
    /// `θ̄ = 0.3 cos X`, `ξ̄ = 0.2`, `ᾱ = 0.1 sin T`.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetConfig {
    /// Base terms; an explicit jet table without a preset starts from `free`.
    #[serde(default)]
    pub preset: Option<JetPreset>,
    #[serde(default)]
    pub p: i64,
    #[serde(default)]
    pub zeta0: Option<f64>,
    #[serde(default)]
    pub theta_bar: Vec<Term>,
    #[serde(default)]
    pub xi_bar: Vec<Term>,
    #[serde(default)]
    pub alpha_bar: Vec<Term>,
    #[serde(default)]
    pub zeta_bar: Vec<Term>,
}

impl Default for JetConfig {
    fn default() -> Self {
        Self {
            preset: Some(JetPreset::Mixed),
            p: 0,
            zeta0: None,
            theta_bar: Vec::new(),
            xi_bar: Vec::new(),
            alpha_bar: Vec::new(),
            zeta_bar: Vec::new(),
        }
    }
}

fn cos_x(coef: f64) -> Term {
    Term { coef, t_pow: 0, x_pow: 0, trig: Some(Trig { kind: TrigKind::Cos, t_freq: 0.0, x_freq: 1.0, phase: 0.0 }) }
}

fn sin_t(coef: f64) -> Term {
    Term { coef, t_pow: 0, x_pow: 0, trig: Some(Trig { kind: TrigKind::Sin, t_freq: 1.0, x_freq: 0.0, phase: 0.0 }) }
}

fn constant(coef: f64) -> Term {
    Term { coef, t_pow: 0, x_pow: 0, trig: None }
}

impl JetConfig {
    /// Preset terms, overridden by any inline tables.
    pub fn resolved(&self) -> JetConfig {
        let mut out = match self.preset {
            None | Some(JetPreset::Free) => JetConfig { preset: None, ..JetConfig::empty() },
            Some(JetPreset::Mass) => JetConfig { theta_bar: vec![constant(1.0)], ..JetConfig::empty() },
            Some(JetPreset::Mixed) => JetConfig {
                theta_bar: vec![cos_x(0.3)],
                xi_bar: vec![constant(0.2)],
                alpha_bar: vec![sin_t(0.1)],
                ..JetConfig::empty()
            },
        };
        out.preset = self.preset;
        out.p = self.p;
        out.zeta0 = Some(self.zeta0.unwrap_or(-FRAC_PI_2));
        for (dst, src) in [
            (&mut out.theta_bar, &self.theta_bar),
            (&mut out.xi_bar, &self.xi_bar),
            (&mut out.alpha_bar, &self.alpha_bar),
            (&mut out.zeta_bar, &self.zeta_bar),
        ] {
            if !src.is_empty() {
                *dst = src.clone();
            }
        }
        out
    }

    fn empty() -> JetConfig {
        JetConfig {
            preset: None,
            p: 0,
            zeta0: None,
            theta_bar: Vec::new(),
            xi_bar: Vec::new(),
            alpha_bar: Vec::new(),
            zeta_bar: Vec::new(),
        }
    }

    pub fn build(&self) -> JetSpec {
        let r = self.resolved();
        JetSpec::new(r.zeta0.unwrap_or(-FRAC_PI_2))
            .with_p(r.p)
            .with_theta_bar(field_from_terms(&r.theta_bar))
            .with_xi_bar(field_from_terms(&r.xi_bar))
            .with_alpha_bar(field_from_terms(&r.alpha_bar))
            .with_zeta_bar(field_from_terms(&r.zeta_bar))
    }

    fn validate(&self) -> Result<()> {
        let r = self.resolved();
        let all = r.theta_bar.iter().chain(&r.xi_bar).chain(&r.alpha_bar).chain(&r.zeta_bar);
        for term in all {
            let finite = term.coef.is_finite()
                && term.trig.as_ref().is_none_or(|t| t.t_freq.is_finite() && t.x_freq.is_finite() && t.phase.is_finite());
            if !finite {
                return Err(Error::Config("jet terms must be finite".into()));
            }
            if term.t_pow > 8 || term.x_pow > 8 {
                return Err(Error::Config("jet polynomial degree is limited to 8".into()));
            }
        }
        if !r.zeta0.unwrap_or(0.0).is_finite() {
            return Err(Error::Config("zeta0 must be finite".into()));
        }
        Ok(())
    }
}

/// Gaussian packet `exp(−(X−x0)²/(4σ²)) e^{ik0X}` split `(cos mix, sin mix)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub k0: f64,
    #[serde(default = "default_mix")]
    pub mix: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        Self { x0: 0.0, sigma: 1.0, k0: 1.0, mix: default_mix() }
    }
}

fn one() -> f64 {
    1.0
}

fn default_mix() -> f64 {
    0.6
}

/// Walk and Dirac runs share their setup; the Dirac step equals `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    #[serde(default)]
    pub jet: JetConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default)]
    pub packet: PacketConfig,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            jet: JetConfig::default(),
            epsilon: default_epsilon(),
            t_final: 1.0,
            x_min: default_x_min(),
            length: default_length(),
            packet: PacketConfig::default(),
        }
    }
}

fn default_epsilon() -> f64 {
    0.025
}

fn default_x_min() -> f64 {
    -10.0
}

fn default_length() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    #[serde(default)]
    pub jet: JetConfig,
    #[serde(default = "default_eps_list")]
    pub eps: Vec<f64>,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_refine")]
    pub refine: usize,
    #[serde(default)]
    pub packet: PacketConfig,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            jet: JetConfig::default(),
            eps: default_eps_list(),
            t_final: 1.0,
            x_min: default_x_min(),
            length: default_length(),
            refine: default_refine(),
            packet: PacketConfig::default(),
        }
    }
}

fn default_eps_list() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}

fn default_refine() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoupConfig {
    #[serde(default = "default_qs")]
    pub q: Vec<f64>,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_p_points")]
    pub p_points: usize,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    /// Defaults to `T/1000`, capped at 5e-3.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl Default for RoupConfig {
    fn default() -> Self {
        Self { q: default_qs(), times: default_times(), p_points: default_p_points(), x_points: default_x_points(), dt: None }
    }
}

fn default_qs() -> Vec<f64> {
    vec![1.0]
}

fn default_times() -> Vec<f64> {
    vec![0.5, 2.0, 10.0]
}

fn default_p_points() -> usize {
    crate::roup::DEFAULT_P_POINTS
}

fn default_x_points() -> usize {
    crate::roup::DEFAULT_X_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicConfig {
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default = "default_heuristic_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_heuristic_points")]
    pub points: usize,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self { q: 1.0, times: default_heuristic_times(), points: default_heuristic_points() }
    }
}

fn default_heuristic_times() -> Vec<f64> {
    vec![0.05]
}

fn default_heuristic_points() -> usize {
    2001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// `walk`, `roup` or `fick`.
    #[serde(default)]
    pub only: Option<String>,
    #[serde(default = "default_p_points")]
    pub p_points: usize,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { only: None, p_points: default_p_points(), x_points: default_x_points(), seed: default_seed() }
    }
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Checked against the subcommand when present.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub walk: WalkConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
    #[serde(default)]
    pub roup: RoupConfig,
    /// Same fields as `[roup]`; times are the metric snapshots.
    #[serde(default = "default_metric")]
    pub metric: RoupConfig,
    #[serde(default)]
    pub heuristic: HeuristicConfig,
    #[serde(default)]
    pub verify: VerifySection,
    /// Per-check tolerance overrides for `verify`, keyed by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

fn default_metric() -> RoupConfig {
    RoupConfig { times: vec![1.0, 4.0, 10.0], ..RoupConfig::default() }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            out: default_out(),
            threads: None,
            walk: WalkConfig::default(),
            converge: ConvergeConfig::default(),
            roup: RoupConfig::default(),
            metric: default_metric(),
            heuristic: HeuristicConfig::default(),
            verify: VerifySection::default(),
            tolerances: BTreeMap::new(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn increasing_positive(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    for v in values {
        positive(name, *v)?;
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

impl WalkConfig {
    fn validate(&self) -> Result<()> {
        self.jet.validate()?;
        positive("epsilon", self.epsilon)?;
        positive("t_final", self.t_final)?;
        positive("length", self.length)?;
        positive("packet.sigma", self.packet.sigma)?;
        Ok(())
    }
}

impl RoupConfig {
    fn validate(&self) -> Result<()> {
        increasing_positive("q", &self.q)?;
        increasing_positive("times", &self.times)?;
        if self.p_points < 16 || !self.p_points.is_multiple_of(2) {
            return Err(Error::Config(format!("p_points must be even and >= 16, got {}", self.p_points)));
        }
        if self.x_points < 16 || !self.x_points.is_multiple_of(2) {
            return Err(Error::Config(format!("x_points must be even and >= 16, got {}", self.x_points)));
        }
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks the section used by `kind` (and the shared fields).
    pub fn validate(&self, kind: Kind) -> Result<()> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(Error::Config(format!(
                    "config is for '{}' but the '{}' subcommand was run",
                    k.name(),
                    kind.name()
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        match kind {
            Kind::Walk | Kind::Dirac => self.walk.validate(),
            Kind::Converge => {
                let c = &self.converge;
                c.jet.validate()?;
                increasing_positive("eps", &c.eps.iter().rev().copied().collect::<Vec<_>>())?;
                positive("t_final", c.t_final)?;
                positive("length", c.length)?;
                if c.refine == 0 {
                    return Err(Error::Config("refine must be at least 1".into()));
                }
                Ok(())
            }
            Kind::Roup => self.roup.validate(),
            Kind::Metric => self.metric.validate(),
            Kind::Heuristic => {
                let h = &self.heuristic;
                positive("q", h.q)?;
                increasing_positive("times", &h.times)?;
                if h.points < 3 {
                    return Err(Error::Config("points must be at least 3".into()));
                }
                Ok(())
            }
            Kind::Verify => {
                if let Some(only) = &self.verify.only {
                    crate::verify::Group::parse(only)?;
                }
                for (k, v) in &self.tolerances {
                    if !v.is_finite() {
                        return Err(Error::Config(format!("tolerance {k} must be finite")));
                    }
                }
                Ok(())
            }
        }
    }
}
