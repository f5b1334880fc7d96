use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::composite::{CnlWeights, OuterWeights};
use crate::io::{ParamConfig, WINDOW_CHOICES};
use crate::{Error, Result};

/// One search dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dim {
    Int { name: String, lo: i64, hi: i64 },
    Float { name: String, lo: f64, hi: f64 },
    /// Unordered choice among numeric values.
    Cat { name: String, choices: Vec<f64> },
    /// Weight vector on the probability simplex of dimension `k`.
    Simplex { name: String, k: usize },
}

impl Dim {
    pub fn name(&self) -> &str {
        match self {
            Dim::Int { name, .. } | Dim::Float { name, .. } | Dim::Cat { name, .. } | Dim::Simplex { name, .. } => name,
        }
    }

    /// Uniform draw; Dirichlet(1, ..., 1) for simplex groups.
    pub fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Value {
        match self {
            Dim::Int { lo, hi, .. } => Value::Int(rng.random_range(*lo..=*hi)),
            Dim::Float { lo, hi, .. } => Value::Float(lo + (hi - lo) * rng.random::<f64>()),
            Dim::Cat { choices, .. } => Value::Cat(rng.random_range(0..choices.len())),
            Dim::Simplex { k, .. } => Value::Simplex(dirichlet(&vec![1.0; *k], rng)),
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Dim::Int { lo, hi, .. }, Value::Int(x)) => lo <= x && x <= hi,
            (Dim::Float { lo, hi, .. }, Value::Float(x)) => *lo <= *x && *x <= *hi,
            (Dim::Cat { choices, .. }, Value::Cat(i)) => *i < choices.len(),
            (Dim::Simplex { k, .. }, Value::Simplex(w)) => {
                w.len() == *k && w.iter().all(|&x| x >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9
            }
            _ => false,
        }
    }
}

/// A draw from Dirichlet(alpha) of any length, as normalized Gamma draws.
pub(crate) fn dirichlet(alpha: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter().map(|x| x / s).collect()
    } else {
        vec![1.0 / alpha.len() as f64; alpha.len()]
    }
}

/// Value of one dimension. Categorical values are choice indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    Float(f64),
    Cat(usize),
    Simplex(Vec<f64>),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(x) => Some(*x as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }
}

/// A point in a search space, one value per dimension in order.
pub type Point = Vec<Value>;

/// Ordered collection of search dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<Dim>,
}

impl SearchSpace {
    /// The pipeline search domain: window, embedding and tolerance
    /// parameters, quality gate and both weight simplices.
    pub fn pipeline() -> Self {
        let int = |name: &str, lo, hi| Dim::Int { name: name.into(), lo, hi };
        let float = |name: &str, lo, hi| Dim::Float { name: name.into(), lo, hi };
        SearchSpace {
            dims: vec![
                Dim::Cat { name: "window".into(), choices: WINDOW_CHOICES.iter().map(|&w| w as f64).collect() },
                int("m", 3, 10),
                int("tau", 1, 10),
                float("r_frac", 0.10, 0.30),
                int("k_max", 5, 20),
                int("m_lle", 3, 7),
                int("tau_lle", 1, 6),
                float("theta", 0.50, 0.99),
                Dim::Simplex { name: "cnl_weights".into(), k: 4 },
                Dim::Simplex { name: "outer_weights".into(), k: 6 },
            ],
        }
    }

    pub fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Point {
        self.dims.iter().map(|d| d.sample_uniform(rng)).collect()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.len() == self.dims.len() && self.dims.iter().zip(p).all(|(d, v)| d.contains(v))
    }

    /// Writes the pipeline dimensions of `p` onto a copy of `base`.
    pub fn apply(&self, p: &Point, base: &ParamConfig) -> Result<ParamConfig> {
        if !self.contains(p) {
            return Err(Error::Optimization("point outside the search space".into()));
        }
        let mut cfg = base.clone();
        for (dim, v) in self.dims.iter().zip(p) {
            match (dim, v) {
                (Dim::Cat { name, choices }, Value::Cat(i)) if name == "window" => cfg.window = choices[*i] as usize,
                (Dim::Int { name, .. }, Value::Int(x)) => {
                    let x = *x as usize;
                    match name.as_str() {
                        "m" => cfg.m = x,
                        "tau" => cfg.tau = x,
                        "k_max" => cfg.k_max = x,
                        "m_lle" => cfg.m_lle = x,
                        "tau_lle" => cfg.tau_lle = x,
                        other => return Err(Error::Optimization(format!("unknown dimension {other}"))),
                    }
                }
                (Dim::Float { name, .. }, Value::Float(x)) => match name.as_str() {
                    "r_frac" => cfg.r_frac = *x,
                    "theta" => cfg.theta = *x,
                    other => return Err(Error::Optimization(format!("unknown dimension {other}"))),
                },
                (Dim::Simplex { name, .. }, Value::Simplex(w)) => match name.as_str() {
                    "cnl_weights" => cfg.cnl_weights = CnlWeights::from_array([w[0], w[1], w[2], w[3]]),
                    "outer_weights" => {
                        cfg.outer_weights = OuterWeights::from_array([w[0], w[1], w[2], w[3], w[4], w[5]])
                    }
                    other => return Err(Error::Optimization(format!("unknown dimension {other}"))),
                },
                (d, _) => return Err(Error::Optimization(format!("unknown dimension {}", d.name()))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`SearchSpace::apply`] for the pipeline space.
    pub fn point_of(&self, cfg: &ParamConfig) -> Result<Point> {
        self.dims
            .iter()
            .map(|dim| {
                Ok(match dim {
                    Dim::Cat { name, choices } if name == "window" => Value::Cat(
                        choices
                            .iter()
                            .position(|&c| c as usize == cfg.window)
                            .ok_or_else(|| Error::Optimization(format!("window {} not a choice", cfg.window)))?,
                    ),
                    Dim::Int { name, .. } => Value::Int(match name.as_str() {
                        "m" => cfg.m,
                        "tau" => cfg.tau,
                        "k_max" => cfg.k_max,
                        "m_lle" => cfg.m_lle,
                        "tau_lle" => cfg.tau_lle,
                        other => return Err(Error::Optimization(format!("unknown dimension {other}"))),
                    } as i64),
                    Dim::Float { name, .. } => Value::Float(match name.as_str() {
                        "r_frac" => cfg.r_frac,
                        "theta" => cfg.theta,
                        other => return Err(Error::Optimization(format!("unknown dimension {other}"))),
                    }),
                    Dim::Simplex { name, .. } => Value::Simplex(match name.as_str() {
                        "cnl_weights" => cfg.cnl_weights.as_array().to_vec(),
                        "outer_weights" => cfg.outer_weights.as_array().to_vec(),
                        other => return Err(Error::Optimization(format!("unknown dimension {other}"))),
                    }),
                    d => return Err(Error::Optimization(format!("unknown dimension {}", d.name()))),
                })
            })
            .collect()
    }
}
