//! Scenario registry and configuration files.
//!
//! A scenario bundles everything a benchmark run needs: the true plant, the
//! cost and noise structure, the simulation step, and the defaults for the
//! learning protocol (excitation scale and segment rule, episode schedule,
//! and a stored stabilizing initial gain). Three built-in scenarios carry
//! published linearizations: the X-29A aircraft at 2000 ft, a Boeing 747,
//! and a blood-glucose regulation model. Scenarios round-trip through a
//! TOML config file with sections `[drift]`, `[cost]`, `[noise]`, `[sim]`,
//! and `[policy]`, matrices written as row-major nested arrays.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{check_stabilizing_gain, DitherSpec, EpisodeSchedule};
use crate::riccati::{solve_care, CostSpec, RiccatiSolution};
use crate::sim::{DriftParams, NoiseSpec};

/// How the excitation segment count scales with the window length τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaRule {
    /// κ(τ) = max(1, ⌊τ^exponent⌋).
    Power { exponent: f64 },
    /// A fixed segment count regardless of τ.
    Fixed { segments: usize },
}

impl KappaRule {
    /// Segment count for a stabilization window of length τ.
    pub fn kappa_for(&self, tau: f64) -> usize {
        match *self {
            KappaRule::Power { exponent } => (tau.powf(exponent).floor() as usize).max(1),
            KappaRule::Fixed { segments } => segments.max(1),
        }
    }

    /// Parse the textual forms `pow<float>` and `fixed<int>`.
    pub fn parse(text: &str) -> Result<Self> {
        if let Some(rest) = text.strip_prefix("pow") {
            let exponent: f64 = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad power in kappa rule '{text}'")))?;
            if !(exponent > 0.0 && exponent.is_finite()) {
                return Err(Error::Config(format!(
                    "kappa rule exponent must be positive, got {exponent}"
                )));
            }
            return Ok(KappaRule::Power { exponent });
        }
        if let Some(rest) = text.strip_prefix("fixed") {
            let segments: usize = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad segment count in kappa rule '{text}'")))?;
            if segments == 0 {
                return Err(Error::Config("kappa rule needs at least one segment".into()));
            }
            return Ok(KappaRule::Fixed { segments });
        }
        Err(Error::Parse(format!(
            "unknown kappa rule '{text}' (expected pow<float> or fixed<int>)"
        )))
    }
}

impl fmt::Display for KappaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            KappaRule::Power { exponent } => write!(f, "pow{exponent}"),
            KappaRule::Fixed { segments } => write!(f, "fixed{segments}"),
        }
    }
}

/// A fully validated benchmark problem.
#[derive(Debug, Clone)]
pub struct Scenario {
    name: String,
    truth: DriftParams,
    cost: CostSpec,
    noise: NoiseSpec,
    delta: f64,
    sigma: f64,
    kappa_rule: KappaRule,
    tau0: f64,
    growth: f64,
    g_init: DMatrix<f64>,
}

impl Scenario {
    /// Validate and assemble a scenario: dimensions must be consistent, the
    /// truth must admit a regulator, and the stored initial gain must
    /// stabilize it.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        truth: DriftParams,
        cost: CostSpec,
        noise: NoiseSpec,
        delta: f64,
        sigma: f64,
        kappa_rule: KappaRule,
        tau0: f64,
        growth: f64,
        g_init: DMatrix<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Config("scenario name must not be empty".into()));
        }
        crate::sim::check_cost_dims(&truth, &cost)?;
        if noise.dim() != truth.state_dim() {
            return Err(Error::Dimension(format!(
                "noise covariance is {}-dimensional, plant has {} states",
                noise.dim(),
                truth.state_dim()
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got {delta}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        // Schedule parameters are validated by the schedule constructor.
        EpisodeSchedule::geometric(tau0, growth)?;
        // The truth must admit a regulator; a failure here is a
        // configuration problem, not a runtime surprise.
        solve_care(&truth, &cost)?;
        check_stabilizing_gain(&truth, &g_init, "stored initial gain")?;
        Ok(Self { name, truth, cost, noise, delta, sigma, kappa_rule, tau0, growth, g_init })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn truth(&self) -> &DriftParams {
        &self.truth
    }

    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn kappa_rule(&self) -> KappaRule {
        self.kappa_rule
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn g_init(&self) -> &DMatrix<f64> {
        &self.g_init
    }

    /// Rebuild the scenario with some protocol defaults replaced,
    /// re-running the full validation.
    pub fn with_overrides(
        &self,
        sigma: Option<f64>,
        kappa_rule: Option<KappaRule>,
        tau0: Option<f64>,
        growth: Option<f64>,
    ) -> Result<Scenario> {
        Scenario::new(
            self.name.clone(),
            self.truth.clone(),
            self.cost.clone(),
            self.noise.clone(),
            self.delta,
            sigma.unwrap_or(self.sigma),
            kappa_rule.unwrap_or(self.kappa_rule),
            tau0.unwrap_or(self.tau0),
            growth.unwrap_or(self.growth),
            self.g_init.clone(),
        )
    }

    /// Excitation spec for a window of length τ under this scenario's rule.
    pub fn dither_for(&self, tau: f64) -> Result<DitherSpec> {
        DitherSpec::new(self.sigma, self.kappa_rule.kappa_for(tau))
    }

    /// The scenario's default episode schedule.
    pub fn schedule(&self) -> Result<EpisodeSchedule> {
        EpisodeSchedule::geometric(self.tau0, self.growth)
    }

    /// Solve the regulator problem for the true parameters.
    pub fn solve_truth(&self) -> Result<RiccatiSolution> {
        solve_care(&self.truth, &self.cost)
    }

    /// Serialize to the TOML config format. Loading the result reproduces
    /// every matrix bit for bit.
    pub fn to_config_string(&self) -> Result<String> {
        let file = ConfigFile {
            name: Some(self.name.clone()),
            drift: DriftSection {
                a: matrix_rows(self.truth.a()),
                b: matrix_rows(self.truth.b()),
            },
            cost: CostSection {
                qx: matrix_rows(self.cost.qx()),
                qu: matrix_rows(self.cost.qu()),
            },
            noise: NoiseSection { c: matrix_rows(self.noise.covariance()) },
            sim: SimSection { delta: self.delta },
            policy: PolicySection {
                sigma: self.sigma,
                kappa_rule: self.kappa_rule.to_string(),
                tau0: self.tau0,
                growth: self.growth,
                g_init: matrix_rows(&self.g_init),
            },
        };
        toml::to_string(&file).map_err(|e| Error::Parse(format!("serializing config: {e}")))
    }
}

/// Names of the built-in scenarios.
pub fn builtin_names() -> &'static [&'static str] {
    &["x29a", "b747", "glucose"]
}

/// Load a scenario by built-in name or from a TOML config file path.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    match name_or_path {
        "x29a" => builtin_x29a(),
        "b747" => builtin_b747(),
        "glucose" => builtin_glucose(),
        other => {
            let path = Path::new(other);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "unknown scenario '{other}': not a built-in ({}) and not a file",
                    builtin_names().join(", ")
                )));
            }
            let text = std::fs::read_to_string(path)?;
            scenario_from_config(&text)
        }
    }
}

/// X-29A forward-swept-wing aircraft, longitudinal dynamics at 2000 ft:
/// open-loop unstable, two control surfaces.
fn builtin_x29a() -> Result<Scenario> {
    let a = DMatrix::from_row_slice(4, 4, &[
        -0.16, 0.07, -1.00, 0.04,
        -15.20, -2.60, 1.11, 0.00,
        6.84, -0.10, -0.06, 0.00,
        0.00, 1.00, 0.07, 0.00,
    ]);
    let b = DMatrix::from_row_slice(4, 2, &[
        -0.0006, 0.0007,
        1.3430, 0.2345,
        0.0897, -0.0710,
        0.0000, 0.0000,
    ]);
    let g_init = DMatrix::from_row_slice(2, 4, &[
        -0.466277945655041, 0.45833723031738216,
        0.3542421731107375, -0.512539096687399,
        -0.37270561300521987, 1.7481425598871743,
        0.11372794118250242, -0.01400847646065436,
    ]);
    standard_scenario("x29a", a, b, g_init)
}

/// Boeing 747 longitudinal dynamics at 20000 ft: open-loop stable but
/// poorly damped.
fn builtin_b747() -> Result<Scenario> {
    let a = DMatrix::from_row_slice(4, 4, &[
        -0.199, 0.003, -0.980, 0.038,
        -3.868, -0.929, 0.471, -0.008,
        1.591, -0.015, -0.309, 0.003,
        -0.198, 0.958, 0.021, 0.000,
    ]);
    let b = DMatrix::from_row_slice(4, 2, &[
        -0.001, 0.058,
        0.296, 0.153,
        0.012, -0.908,
        0.015, 0.008,
    ]);
    let g_init = DMatrix::from_row_slice(2, 4, &[
        1.190774426313102, -0.6852356936393034,
        0.23067989425653276, -0.46650370547171915,
        -0.3157461462341051, -0.031842701700901595,
        0.5548003650678298, 0.40314026627165994,
    ]);
    standard_scenario("b747", a, b, g_init)
}

/// Blood-glucose regulation: a third-order autoregressive model with a
/// single insulin input channel.
fn builtin_glucose() -> Result<Scenario> {
    let a = DMatrix::from_row_slice(3, 3, &[
        1.91, -2.82, 0.91,
        1.00, -1.00, 0.00,
        0.00, 1.00, -1.00,
    ]);
    let b = DMatrix::from_row_slice(3, 1, &[-0.0992, 0.0000, 0.0000]);
    let g_init = DMatrix::from_row_slice(1, 3, &[
        8.74071279943587, 1.7712108655536876, 0.5686397059125121,
    ]);
    standard_scenario("glucose", a, b, g_init)
}

/// The shared experimental setting: C = 0.25·I, Qx = I, Qu = 0.1·I,
/// Δ = 10⁻³, σ = 5 with κ = ⌊τ^{3/2}⌋ segments, and episodes
/// τₙ = 20·1.1ⁿ. Initial gains are frozen stabilizing draws from a
/// fixed-seed random search.
fn standard_scenario(
    name: &str,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    g_init: DMatrix<f64>,
) -> Result<Scenario> {
    let p = a.nrows();
    let q = b.ncols();
    let truth = DriftParams::new(a, b)?;
    let cost = CostSpec::isotropic(p, q, 1.0, 0.1)?;
    let noise = NoiseSpec::isotropic(p, 0.25)?;
    Scenario::new(
        name,
        truth,
        cost,
        noise,
        1e-3,
        5.0,
        KappaRule::Power { exponent: 1.5 },
        20.0,
        0.1,
        g_init,
    )
}

#[derive(Serialize, Deserialize)]
struct ConfigFile {
    name: Option<String>,
    drift: DriftSection,
    cost: CostSection,
    noise: NoiseSection,
    sim: SimSection,
    policy: PolicySection,
}

#[derive(Serialize, Deserialize)]
struct DriftSection {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct CostSection {
    qx: Vec<Vec<f64>>,
    qu: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct NoiseSection {
    c: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SimSection {
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct PolicySection {
    sigma: f64,
    kappa_rule: String,
    tau0: f64,
    growth: f64,
    g_init: Vec<Vec<f64>>,
}

/// Parse a scenario from config text.
pub fn scenario_from_config(text: &str) -> Result<Scenario> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("config file: {e}")))?;
    let a = matrix_from_rows(&file.drift.a, "drift.a")?;
    let b = matrix_from_rows(&file.drift.b, "drift.b")?;
    let qx = matrix_from_rows(&file.cost.qx, "cost.qx")?;
    let qu = matrix_from_rows(&file.cost.qu, "cost.qu")?;
    let c = matrix_from_rows(&file.noise.c, "noise.c")?;
    let g_init = matrix_from_rows(&file.policy.g_init, "policy.g_init")?;
    let truth = DriftParams::new(a, b)?;
    let cost = CostSpec::new(qx, qu)?;
    let noise = NoiseSpec::new(c)?;
    Scenario::new(
        file.name.unwrap_or_else(|| "custom".into()),
        truth,
        cost,
        noise,
        file.sim.delta,
        file.policy.sigma,
        KappaRule::parse(&file.policy.kappa_rule)?,
        file.policy.tau0,
        file.policy.growth,
        g_init,
    )
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Parse(format!("{what}: matrix must be non-empty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Parse(format!("{what}: ragged rows (expected {cols} columns)")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}
