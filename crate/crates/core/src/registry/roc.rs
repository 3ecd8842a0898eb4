//! Threshold sweep over genuine and rogue similarity scores.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub tau: f64,
    pub genuine_accept_rate: f64,
    pub rogue_accept_rate: f64,
}

/// Accept rates (`score ≥ τ`) for τ = 0.5, 0.505, …, 1.0.
pub fn roc_sweep(genuine: &[f64], rogue: &[f64]) -> Vec<RocPoint> {
    let rate = |s: &[f64], t: f64| {
        if s.is_empty() {
            0.0
        } else {
            s.iter().filter(|&&v| v >= t).count() as f64 / s.len() as f64
        }
    };
    (0..=100)
        .map(|i| {
            let tau = (500 + 5 * i) as f64 / 1000.0;
            RocPoint {
                tau,
                genuine_accept_rate: rate(genuine, tau),
                rogue_accept_rate: rate(rogue, tau),
            }
        })
        .collect()
}

pub fn render_roc(points: &[RocPoint]) -> String {
    let mut s = String::from("tau\tgenuine_accept_rate\trogue_accept_rate\n");
    for p in points {
        writeln!(
            s,
            "{:.3}\t{}\t{}",
            p.tau, p.genuine_accept_rate, p.rogue_accept_rate
        )
        .unwrap();
    }
    s
}
