//! Embedded explicit Runge-Kutta pairs.
//!
//! | name         | stages | propagated order | error order | FSAL |
//! |--------------|--------|------------------|-------------|------|
//! | `dopri5`     | 7      | 5                | 4           | yes  |
//! | `bs32`       | 4      | 3                | 2           | yes  |
//! | `cash-karp`  | 6      | 5                | 4           | no   |
//! | `fehlberg45` | 6      | 5                | 4           | no   |
//!
//! The field is re-evaluated at every stage from the stage positions; nothing
//! is frozen across stages.

use crate::config::ErrorNorm;
use crate::error::Result;
use crate::params::{ParamMap, ParamReader};
use crate::registry::Registry;

/// Butcher tableau with an embedded error estimator.
#[derive(Debug, Clone)]
pub struct Tableau {
    pub c: Vec<f64>,
    /// Strictly lower-triangular stage coefficients; row `i` has `i` entries.
    pub a: Vec<Vec<f64>>,
    /// Weights of the propagated solution.
    pub b: Vec<f64>,
    /// Weights of the embedded solution.
    pub b_hat: Vec<f64>,
    pub order: u32,
    pub embedded_order: u32,
    /// Last stage is evaluated at the new solution.
    pub fsal: bool,
}

impl Tableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn dopri5() -> Self {
        Self {
            c: vec![0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
            a: vec![
                vec![],
                vec![1.0 / 5.0],
                vec![3.0 / 40.0, 9.0 / 40.0],
                vec![44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
                vec![19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
                vec![9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
                vec![35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
            ],
            b: vec![35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0],
            b_hat: vec![
                5179.0 / 57600.0,
                0.0,
                7571.0 / 16695.0,
                393.0 / 640.0,
                -92097.0 / 339200.0,
                187.0 / 2100.0,
                1.0 / 40.0,
            ],
            order: 5,
            embedded_order: 4,
            fsal: true,
        }
    }

    pub fn bogacki_shampine() -> Self {
        Self {
            c: vec![0.0, 0.5, 0.75, 1.0],
            a: vec![vec![], vec![0.5], vec![0.0, 0.75], vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0]],
            b: vec![2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0, 0.0],
            b_hat: vec![7.0 / 24.0, 0.25, 1.0 / 3.0, 0.125],
            order: 3,
            embedded_order: 2,
            fsal: true,
        }
    }

    pub fn cash_karp() -> Self {
        Self {
            c: vec![0.0, 0.2, 0.3, 0.6, 1.0, 7.0 / 8.0],
            a: vec![
                vec![],
                vec![0.2],
                vec![3.0 / 40.0, 9.0 / 40.0],
                vec![0.3, -0.9, 1.2],
                vec![-11.0 / 54.0, 2.5, -70.0 / 27.0, 35.0 / 27.0],
                vec![1631.0 / 55296.0, 175.0 / 512.0, 575.0 / 13824.0, 44275.0 / 110592.0, 253.0 / 4096.0],
            ],
            b: vec![37.0 / 378.0, 0.0, 250.0 / 621.0, 125.0 / 594.0, 0.0, 512.0 / 1771.0],
            b_hat: vec![2825.0 / 27648.0, 0.0, 18575.0 / 48384.0, 13525.0 / 55296.0, 277.0 / 14336.0, 0.25],
            order: 5,
            embedded_order: 4,
            fsal: false,
        }
    }

    pub fn fehlberg45() -> Self {
        Self {
            c: vec![0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5],
            a: vec![
                vec![],
                vec![0.25],
                vec![3.0 / 32.0, 9.0 / 32.0],
                vec![1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0],
                vec![439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0],
                vec![-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
            ],
            b: vec![16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0],
            b_hat: vec![25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0],
            order: 5,
            embedded_order: 4,
            fsal: false,
        }
    }
}

/// Right-hand side `y' = f(y)` of an autonomous system. `Err` marks a stage
/// the caller should treat as a rejected step (e.g. a particle inside the
/// closest-approach floor).
pub trait Rhs {
    fn eval(&mut self, y: &[f64], dy: &mut [f64]) -> std::result::Result<(), String>;
}

/// Result of one trial step.
#[derive(Debug)]
pub struct Trial {
    /// Scaled error norm; `INFINITY` when a stage failed.
    pub error: f64,
    pub stage_failure: Option<String>,
}

/// Scratch buffers reused across steps.
#[derive(Debug, Default)]
pub struct Workspace {
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    pub y_new: Vec<f64>,
    /// Derivative at `y_new` when the pair is FSAL and the trial succeeded.
    pub k_new: Vec<f64>,
}

pub trait Integrator: Send + Sync {
    fn name(&self) -> &'static str;
    fn tableau(&self) -> &Tableau;

    /// Exponent of the step-size controller.
    fn controller_exponent(&self) -> f64 {
        let t = self.tableau();
        1.0 / (t.order.min(t.embedded_order) as f64 + 1.0)
    }

    /// Attempts the step `y -> y + h Σ b_i k_i` given `k1 = f(y)`.
    fn attempt(
        &self,
        rhs: &mut dyn Rhs,
        y: &[f64],
        k1: &[f64],
        h: f64,
        atol: f64,
        rtol: f64,
        norm: ErrorNorm,
        ws: &mut Workspace,
    ) -> Trial {
        let tab = self.tableau();
        let s = tab.stages();
        let dim = y.len();
        ws.k.resize_with(s, Vec::new);
        for k in ws.k.iter_mut() {
            k.resize(dim, 0.0);
        }
        ws.stage.resize(dim, 0.0);
        ws.y_new.resize(dim, 0.0);
        ws.k[0].copy_from_slice(k1);
        for i in 1..s {
            let row = &tab.a[i];
            for d in 0..dim {
                let mut acc = 0.0;
                for (j, aij) in row.iter().enumerate() {
                    if *aij != 0.0 {
                        acc += aij * ws.k[j][d];
                    }
                }
                ws.stage[d] = y[d] + h * acc;
            }
            if let Err(msg) = rhs.eval(&ws.stage, &mut ws.k[i]) {
                return Trial { error: f64::INFINITY, stage_failure: Some(msg) };
            }
        }
        let mut sum = 0.0;
        let mut max: f64 = 0.0;
        for d in 0..dim {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for i in 0..s {
                let kd = ws.k[i][d];
                hi += tab.b[i] * kd;
                lo += tab.b_hat[i] * kd;
            }
            let yn = y[d] + h * hi;
            ws.y_new[d] = yn;
            let scale = atol + rtol * y[d].abs().max(yn.abs());
            let e = (h * (hi - lo) / scale).abs();
            sum += e * e;
            max = max.max(e);
        }
        if tab.fsal {
            ws.k_new.resize(dim, 0.0);
            ws.k_new.copy_from_slice(&ws.k[s - 1]);
        }
        let error = match norm {
            ErrorNorm::Max => max,
            ErrorNorm::Rms => (sum / dim.max(1) as f64).sqrt(),
        };
        Trial { error: if error.is_nan() { f64::INFINITY } else { error }, stage_failure: None }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddedRk {
    name: &'static str,
    tableau: Tableau,
}

impl EmbeddedRk {
    pub fn new(name: &'static str, tableau: Tableau) -> Self {
        Self { name, tableau }
    }
}

impl Integrator for EmbeddedRk {
    fn name(&self) -> &'static str {
        self.name
    }
    fn tableau(&self) -> &Tableau {
        &self.tableau
    }
}

pub const DEFAULT_INTEGRATOR: &str = "dopri5";

pub fn registry() -> Registry<dyn Integrator> {
    fn no_params(p: &ParamMap) -> Result<()> {
        ParamReader::new("integrator", p).finish()
    }
    let mut reg: Registry<dyn Integrator> = Registry::new("integrator");
    reg.register("dopri5", |p| {
        no_params(p)?;
        Ok(Box::new(EmbeddedRk::new("dopri5", Tableau::dopri5())))
    });
    reg.register("bs32", |p| {
        no_params(p)?;
        Ok(Box::new(EmbeddedRk::new("bs32", Tableau::bogacki_shampine())))
    });
    reg.register("cash-karp", |p| {
        no_params(p)?;
        Ok(Box::new(EmbeddedRk::new("cash-karp", Tableau::cash_karp())))
    });
    reg.register("fehlberg45", |p| {
        no_params(p)?;
        Ok(Box::new(EmbeddedRk::new("fehlberg45", Tableau::fehlberg45())))
    });
    reg
}

pub fn build(name: &str) -> Result<Box<dyn Integrator>> {
    registry().build(name, &ParamMap::new())
}
