use serde::Deserialize;
use sinhz::levy::{KoBoLParams, LevyModel, NtsParams};
use sinhz::payoffs::PayoffTransform;
use sinhz::pricing::{PricingMode, PricingRequest};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<ModelConfig>,
    pub payoff: Option<PayoffConfig>,
    pub request: Option<RequestConfig>,
    #[serde(default)]
    pub engine: EngineConfig,
    pub benchmark: Option<BenchmarkConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Kobol {
        c: Option<f64>,
        c_plus: Option<f64>,
        c_minus: Option<f64>,
        nu: Option<f64>,
        nu_plus: Option<f64>,
        nu_minus: Option<f64>,
        lambda_minus: f64,
        lambda_plus: f64,
        #[serde(default)]
        mu: f64,
    },
    Nts {
        delta_s: f64,
        alpha_s: f64,
        #[serde(default)]
        beta_s: f64,
        #[serde(default = "one")]
        nu_s: f64,
        #[serde(default)]
        mu: f64,
    },
    Gaussian {
        sigma: f64,
        #[serde(default)]
        mu: f64,
    },
    Quadratic {
        a: f64,
        #[serde(default)]
        mu: f64,
    },
    Vg {},
    Mixture {
        weight: f64,
        first: Box<ModelConfig>,
        second: Box<ModelConfig>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffConfig {
    pub kind: String,
    pub strike: Option<f64>,
    pub level: Option<f64>,
    pub beta: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestConfig {
    pub n: usize,
    #[serde(default = "one")]
    pub q0: f64,
    #[serde(default)]
    pub x: f64,
    pub barrier: Option<f64>,
    pub eps: Option<f64>,
    pub mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub eps: Option<f64>,
    /// Level-curve parameters for `trace`.
    pub delta: Option<f64>,
    pub u: Option<f64>,
    pub x_max: Option<f64>,
    pub flatten_at: Option<f64>,
    pub delta_star: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "pole_at_one")]
    pub transform: String,
    pub n: Vec<usize>,
    pub m: Vec<f64>,
    pub eps: Vec<f64>,
}

fn pole_at_one() -> String {
    "pole_at_one".into()
}

pub const DEFAULT_EPS: f64 = 1e-10;

impl Config {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn model(&self) -> Result<LevyModel, CliError> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [model] section".into()))?
            .build()
    }

    pub fn payoff(&self) -> Result<PayoffTransform, CliError> {
        self.payoff
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [payoff] section".into()))?
            .build()
    }

    /// The pricing request; `eps` from the command line wins over the file.
    pub fn request(&self, eps_override: Option<f64>) -> Result<PricingRequest, CliError> {
        let r = self
            .request
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [request] section".into()))?;
        let eps = eps_override.or(r.eps).or(self.engine.eps).unwrap_or(DEFAULT_EPS);
        let mode = match &r.mode {
            Some(s) => s.parse::<PricingMode>().map_err(CliError::from_config)?,
            None => PricingMode::Auto,
        };
        let mut req = PricingRequest::new(self.model()?, self.payoff()?, r.n, r.q0, r.x, eps).with_mode(mode);
        if let Some(h) = r.barrier {
            req = req.with_barrier(h);
        }
        Ok(req)
    }
}

fn need(v: Option<f64>, name: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing {name}")))
}

impl ModelConfig {
    pub fn build(&self) -> Result<LevyModel, CliError> {
        let m = match self {
            ModelConfig::Kobol { c, c_plus, c_minus, nu, nu_plus, nu_minus, lambda_minus, lambda_plus, mu } => {
                LevyModel::kobol(KoBoLParams {
                    c_plus: need(c_plus.or(*c), "model.c_plus (or model.c)")?,
                    c_minus: need(c_minus.or(*c), "model.c_minus (or model.c)")?,
                    nu_plus: need(nu_plus.or(*nu), "model.nu_plus (or model.nu)")?,
                    nu_minus: need(nu_minus.or(*nu), "model.nu_minus (or model.nu)")?,
                    lambda_minus: *lambda_minus,
                    lambda_plus: *lambda_plus,
                    mu: *mu,
                })
            }
            ModelConfig::Nts { delta_s, alpha_s, beta_s, nu_s, mu } => LevyModel::nts(NtsParams {
                delta_s: *delta_s,
                alpha_s: *alpha_s,
                beta_s: *beta_s,
                nu_s: *nu_s,
                mu: *mu,
            }),
            ModelConfig::Gaussian { sigma, mu } => LevyModel::gaussian(*sigma, *mu),
            ModelConfig::Quadratic { a, mu } => LevyModel::quadratic(*a, *mu),
            ModelConfig::Vg {} => LevyModel::variance_gamma(),
            ModelConfig::Mixture { weight, first, second } => {
                LevyModel::mixture(*weight, first.build()?, second.build()?)
            }
        };
        m.map_err(CliError::from_config)
    }
}

impl PayoffConfig {
    pub fn build(&self) -> Result<PayoffTransform, CliError> {
        let p = match self.kind.as_str() {
            "put" => PayoffTransform::put(need(self.strike, "payoff.strike")?, self.beta.unwrap_or(-0.5)),
            "call" => PayoffTransform::call(need(self.strike, "payoff.strike")?, self.beta.unwrap_or(1.5)),
            "digital_up" => PayoffTransform::digital_up(need(self.level, "payoff.level")?, self.beta.unwrap_or(0.5)),
            "digital_down" => {
                PayoffTransform::digital_down(need(self.level, "payoff.level")?, self.beta.unwrap_or(-0.5))
            }
            other => return Err(CliError::Config(format!("unknown payoff kind '{other}'"))),
        };
        p.map_err(CliError::from_config)
    }
}
