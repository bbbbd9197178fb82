use serde::Serialize;

use super::SimulationTrace;
use crate::error::{Error, Result};
use crate::model::Tag;

/// Largest allowed gap between the recursive and the direct ratios.
pub const RECURSION_TOL: f64 = 1e-9;

/// Scaled state at the end of a trace; `(0, 0, None)` after extinction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Terminal {
    pub psi: f64,
    pub theta: f64,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedStats {
    /// `psi_n` from the stochastic-approximation recursion, `n = 1..`.
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    /// Running sample mean `S_bar_n = (sum (xi_i - 1) + x0 + y0) / n`.
    pub sample_mean: Vec<f64>,
    pub terminal: Terminal,
    /// Largest gap between the recursion and `S_n / n`, `X_n / n`.
    pub max_recursion_error: f64,
}

/// Recomputes `psi_n` and `theta_n` with the step `gamma_n = 1 / n`:
///
/// ```text
/// psi_n   = psi_{n-1}   + (xi_n - 1 - psi_{n-1}) / n
/// theta_n = theta_{n-1} + (dX_n - theta_{n-1}) / n
/// ```
///
/// where the initial copies enter at `n = 1`, and checks the result against
/// the direct ratios together with `X_n <= S_n <= n |S_bar_n|`.
pub fn embedded_chain_stats(trace: &SimulationTrace) -> Result<EmbeddedStats> {
    if trace.events.is_empty() {
        return Err(Error::param("trace", "trace has no events"));
    }
    let n_events = trace.events.len();
    let mut psi = Vec::with_capacity(n_events);
    let mut theta = Vec::with_capacity(n_events);
    let mut sample_mean = Vec::with_capacity(n_events);
    let (mut p, mut th) = (0.0f64, 0.0f64);
    let mut sum: i128 = i128::from(trace.init.total());
    let mut prev_s = trace.init.total();
    let mut max_err = 0.0f64;

    for (i, e) in trace.events.iter().enumerate() {
        let n = (i + 1) as u64;
        if e.n != n {
            return Err(Error::Invariant(format!("event {i} has epoch {}", e.n)));
        }
        let s = e.x + e.y;
        if s + 1 != prev_s + e.offspring {
            return Err(Error::Invariant(format!(
                "epoch {n}: S_n = {s} but S_(n-1) - 1 + xi_n = {}",
                (prev_s + e.offspring) as i128 - 1
            )));
        }
        let dx = e.offspring as f64 * f64::from(u8::from(e.tagged_fake))
            - f64::from(u8::from(e.waker == Tag::Fake));
        let gamma = 1.0 / n as f64;
        let (mass, fake_mass) = if n == 1 {
            (trace.init.total() as f64, trace.init.x as f64)
        } else {
            (0.0, 0.0)
        };
        p += gamma * (e.offspring as f64 - 1.0 + mass - p);
        th += gamma * (dx + fake_mass - th);
        sum += i128::from(e.offspring) - 1;

        let direct_psi = s as f64 / n as f64;
        let direct_theta = e.x as f64 / n as f64;
        let err = (p - direct_psi).abs().max((th - direct_theta).abs());
        max_err = max_err.max(err);
        if err > RECURSION_TOL * direct_psi.max(1.0) {
            return Err(Error::Invariant(format!(
                "epoch {n}: recursion gives ({p}, {th}), direct ratios ({direct_psi}, {direct_theta})"
            )));
        }
        let s_bar = sum as f64 / n as f64;
        if e.x > s || (s as f64) > n as f64 * s_bar.abs() * (1.0 + 1e-12) {
            return Err(Error::Invariant(format!(
                "epoch {n}: X_n = {}, S_n = {s}, n |S_bar_n| = {}",
                e.x,
                n as f64 * s_bar.abs()
            )));
        }
        psi.push(p);
        theta.push(th);
        sample_mean.push(s_bar);
        prev_s = s;
    }

    let terminal = if trace.survived() {
        Terminal {
            psi: *psi.last().expect("nonempty"),
            theta: *theta.last().expect("nonempty"),
            beta: trace.terminal_beta(),
        }
    } else {
        Terminal {
            psi: 0.0,
            theta: 0.0,
            beta: None,
        }
    };
    Ok(EmbeddedStats {
        psi,
        theta,
        sample_mean,
        terminal,
        max_recursion_error: max_err,
    })
}
