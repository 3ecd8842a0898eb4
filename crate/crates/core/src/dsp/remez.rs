//! Parks-McClellan equiripple FIR design by Remez exchange.
//!
//! Band edges are given in units of the Nyquist frequency (`[0, 1]`).
//! Internally the problem is solved on `x = cos(2πf)` with `f` in cycles per
//! sample, using barycentric Lagrange interpolation through the current
//! extremal set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-phase structure of the designed filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// Type III: odd length, antisymmetric taps, zero response at DC and Nyquist.
    Hilbert,
    /// Type I: odd length, symmetric taps.
    Lowpass,
}

/// One approximation band. Desired response varies linearly from
/// `desired.0` at `lo` to `desired.1` at `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub desired: (f64, f64),
    pub weight: f64,
}

impl Band {
    pub fn flat(lo: f64, hi: f64, desired: f64, weight: f64) -> Self {
        Band {
            lo,
            hi,
            desired: (desired, desired),
            weight,
        }
    }

    fn desired_at(&self, nyq: f64) -> f64 {
        if self.hi == self.lo {
            return self.desired.0;
        }
        let t = (nyq - self.lo) / (self.hi - self.lo);
        self.desired.0 + t * (self.desired.1 - self.desired.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirDesignSpec {
    pub kind: FilterKind,
    pub length: usize,
    pub bands: Vec<Band>,
    #[serde(default = "default_grid_density")]
    pub grid_density: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_grid_density() -> usize {
    32
}

fn default_max_iterations() -> usize {
    100
}

impl FirDesignSpec {
    /// Wideband Hilbert transformer: unit magnitude over `[lo, hi]`.
    pub fn hilbert(length: usize, lo: f64, hi: f64) -> Self {
        FirDesignSpec {
            kind: FilterKind::Hilbert,
            length,
            bands: vec![Band::flat(lo, hi, 1.0, 1.0)],
            grid_density: default_grid_density(),
            max_iterations: default_max_iterations(),
        }
    }

    /// Two-band lowpass with unit passband and zero stopband.
    pub fn lowpass(length: usize, pass_edge: f64, stop_edge: f64, stop_weight: f64) -> Self {
        FirDesignSpec {
            kind: FilterKind::Lowpass,
            length,
            bands: vec![
                Band::flat(0.0, pass_edge, 1.0, 1.0),
                Band::flat(stop_edge, 1.0, 0.0, stop_weight),
            ],
            grid_density: default_grid_density(),
            max_iterations: default_max_iterations(),
        }
    }

    /// Number of cosine basis functions in the approximation problem.
    pub fn basis_len(&self) -> usize {
        match self.kind {
            FilterKind::Lowpass => (self.length + 1) / 2,
            FilterKind::Hilbert => (self.length - 1) / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 3 || self.length % 2 == 0 {
            return Err(Error::validation(format!(
                "filter length must be odd and at least 3, got {}",
                self.length
            )));
        }
        if self.bands.is_empty() {
            return Err(Error::validation("at least one band is required"));
        }
        if self.grid_density == 0 || self.max_iterations == 0 {
            return Err(Error::validation(
                "grid density and iteration limit must be positive",
            ));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if !(b.lo.is_finite() && b.hi.is_finite() && b.weight.is_finite()) {
                return Err(Error::validation(format!(
                    "band {i} has non-finite parameters"
                )));
            }
            if b.lo < 0.0 || b.hi > 1.0 {
                return Err(Error::validation(format!(
                    "band {i} edges [{}, {}] outside [0, 1]",
                    b.lo, b.hi
                )));
            }
            if b.lo >= b.hi {
                return Err(Error::validation(format!(
                    "band {i} is empty: lower edge {} is not below upper edge {}",
                    b.lo, b.hi
                )));
            }
            if b.weight <= 0.0 {
                return Err(Error::validation(format!(
                    "band {i} weight must be positive"
                )));
            }
            if i > 0 && self.bands[i - 1].hi >= b.lo {
                return Err(Error::validation(format!(
                    "bands {} and {i} overlap or leave no transition band ({} >= {})",
                    i - 1,
                    self.bands[i - 1].hi,
                    b.lo
                )));
            }
        }
        Ok(())
    }
}

/// Result of a converged exchange.
#[derive(Debug, Clone)]
pub struct RemezDesign {
    pub taps: Vec<f64>,
    /// Achieved weighted ripple.
    pub delta: f64,
    /// Final extremal frequencies, Nyquist-normalized.
    pub extremal_freqs: Vec<f64>,
    pub iterations: usize,
}

struct Grid {
    /// Frequencies in cycles/sample, `[0, 0.5]`.
    freq: Vec<f64>,
    x: Vec<f64>,
    desired: Vec<f64>,
    weight: Vec<f64>,
    /// Band index of every grid point.
    band: Vec<usize>,
}

fn build_grid(spec: &FirDesignSpec, r: usize) -> Grid {
    let delf = 0.5 / (spec.grid_density as f64 * r as f64);
    let mut g = Grid {
        freq: Vec::new(),
        x: Vec::new(),
        desired: Vec::new(),
        weight: Vec::new(),
        band: Vec::new(),
    };
    for (bi, b) in spec.bands.iter().enumerate() {
        let mut lo = b.lo / 2.0;
        let mut hi = b.hi / 2.0;
        if spec.kind == FilterKind::Hilbert {
            // sin(ω) vanishes at the ends; keep the grid off them.
            lo = lo.max(delf);
            hi = hi.min(0.5 - delf);
        }
        if hi <= lo {
            continue;
        }
        let n = ((hi - lo) / delf).ceil().max(1.0) as usize;
        for i in 0..=n {
            let f = lo + (hi - lo) * i as f64 / n as f64;
            let mut d = b.desired_at(2.0 * f);
            let mut w = b.weight;
            if spec.kind == FilterKind::Hilbert {
                let s = (2.0 * PI * f).sin();
                d /= s;
                w *= s;
            }
            g.freq.push(f);
            g.x.push((2.0 * PI * f).cos());
            g.desired.push(d);
            g.weight.push(w);
            g.band.push(bi);
        }
    }
    g
}

/// Barycentric interpolant through the extremal set.
struct Interpolant {
    x: Vec<f64>,
    bw: Vec<f64>,
    c: Vec<f64>,
}

impl Interpolant {
    fn eval(&self, x: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..self.x.len() {
            let dx = x - self.x[k];
            if dx == 0.0 {
                return self.c[k];
            }
            let t = self.bw[k] / dx;
            num += t * self.c[k];
            den += t;
        }
        num / den
    }
}

fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|k| {
            let mut p = 1.0;
            for (j, xj) in x.iter().enumerate() {
                if j != k {
                    p *= 2.0 * (x[k] - xj);
                }
            }
            1.0 / p
        })
        .collect()
}

fn solve_on(grid: &Grid, ext: &[usize]) -> (f64, Interpolant) {
    let x: Vec<f64> = ext.iter().map(|&i| grid.x[i]).collect();
    let bw = barycentric_weights(&x);
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &i) in ext.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        num += bw[k] * grid.desired[i];
        den += sign * bw[k] / grid.weight[i];
    }
    let delta = num / den;
    let c = ext
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            grid.desired[i] - sign * delta / grid.weight[i]
        })
        .collect();
    (delta, Interpolant { x, bw, c })
}

/// Local extrema of the weighted error with magnitude at least `floor`,
/// reduced to an alternating sequence.
fn find_extrema(grid: &Grid, err: &[f64], floor: f64) -> Vec<usize> {
    let n = err.len();
    let mut cand: Vec<usize> = Vec::new();
    for i in 0..n {
        let e = err[i];
        if e.abs() < floor || e == 0.0 {
            continue;
        }
        let s = e.signum();
        let left_ok = i == 0 || grid.band[i - 1] != grid.band[i] || s * e >= s * err[i - 1];
        let right_ok = i + 1 == n || grid.band[i + 1] != grid.band[i] || s * e >= s * err[i + 1];
        if left_ok && right_ok {
            cand.push(i);
        }
    }
    let mut alt: Vec<usize> = Vec::with_capacity(cand.len());
    for i in cand {
        match alt.last() {
            Some(&j) if err[j].signum() == err[i].signum() => {
                if err[i].abs() > err[j].abs() {
                    *alt.last_mut().unwrap() = i;
                }
            }
            _ => alt.push(i),
        }
    }
    alt
}

/// Design an equiripple FIR filter.
pub fn remez(spec: &FirDesignSpec) -> Result<RemezDesign> {
    spec.validate()?;
    let r = spec.basis_len();
    let grid = build_grid(spec, r);
    if grid.freq.len() < r + 1 {
        return Err(Error::validation(format!(
            "dense grid has {} points, need at least {} extremal candidates",
            grid.freq.len(),
            r + 1
        )));
    }
    let g = grid.freq.len();
    let mut ext: Vec<usize> = (0..=r).map(|i| i * (g - 1) / r).collect();
    let mut err = vec![0.0; g];
    let mut delta = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut interp = None;

    for it in 1..=spec.max_iterations {
        iterations = it;
        let (d, ip) = solve_on(&grid, &ext);
        delta = d;
        for i in 0..g {
            err[i] = grid.weight[i] * (grid.desired[i] - ip.eval(grid.x[i]));
        }
        interp = Some(ip);
        let floor = delta.abs() * (1.0 - 1e-9);
        let mut next = find_extrema(&grid, &err, floor);
        if next.len() < r + 1 {
            // Numerical trouble: the current set still satisfies alternation.
            let max_err = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            if (max_err - delta.abs()) <= 1e-6 * delta.abs() {
                converged = true;
            }
            break;
        }
        while next.len() > r + 1 {
            let first = err[next[0]].abs();
            let last = err[*next.last().unwrap()].abs();
            if first < last {
                next.remove(0);
            } else {
                next.pop();
            }
        }
        let max_err = err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if next == ext || (max_err - delta.abs()) <= 1e-12 * delta.abs() {
            converged = true;
            break;
        }
        ext = next;
    }
    if !converged {
        return Err(Error::RemezNoConvergence {
            iterations,
            delta: delta.abs(),
        });
    }
    let ip = interp.expect("at least one iteration ran");
    let taps = impulse_response(spec, &ip);
    Ok(RemezDesign {
        taps,
        delta: delta.abs(),
        extremal_freqs: ext.iter().map(|&i| 2.0 * grid.freq[i]).collect(),
        iterations,
    })
}

/// Recover taps from the amplitude response by frequency sampling at
/// `ω_m = 2πm/L`, where the cosine (sine) basis is orthogonal.
fn impulse_response(spec: &FirDesignSpec, ip: &Interpolant) -> Vec<f64> {
    let l = spec.length;
    let m = (l - 1) / 2;
    let omega = |k: usize| 2.0 * PI * k as f64 / l as f64;
    let mut h = vec![0.0; l];
    match spec.kind {
        FilterKind::Lowpass => {
            let amp: Vec<f64> = (0..l).map(|k| ip.eval(omega(k).cos())).collect();
            for n in 0..=m {
                let s: f64 = amp
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * (n as f64 * omega(k)).cos())
                    .sum();
                if n == 0 {
                    h[m] = s / l as f64;
                } else {
                    let a = 2.0 * s / l as f64;
                    h[m - n] = a / 2.0;
                    h[m + n] = a / 2.0;
                }
            }
        }
        FilterKind::Hilbert => {
            let amp: Vec<f64> = (0..l)
                .map(|k| {
                    let w = omega(k);
                    w.sin() * ip.eval(w.cos())
                })
                .collect();
            for n in 1..=m {
                let s: f64 = amp
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * (n as f64 * omega(k)).sin())
                    .sum();
                let b = 2.0 * s / l as f64;
                // Response -j·sgn(ω)·A(ω) about the center tap.
                h[m - n] = -b / 2.0;
                h[m + n] = b / 2.0;
            }
        }
    }
    h
}

/// Amplitude response of a linear-phase design by direct summation about
/// the center tap, at Nyquist-normalized frequency `nyq`.
pub fn amplitude_response(taps: &[f64], kind: FilterKind, nyq: f64) -> f64 {
    let m = (taps.len() - 1) / 2;
    let w = PI * nyq;
    match kind {
        FilterKind::Lowpass => {
            taps[m]
                + (1..=m)
                    .map(|k| 2.0 * taps[m + k] * (k as f64 * w).cos())
                    .sum::<f64>()
        }
        FilterKind::Hilbert => (1..=m)
            .map(|k| 2.0 * taps[m + k] * (k as f64 * w).sin())
            .sum(),
    }
}

/// Dense-grid check of a finished design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquirippleAudit {
    pub max_weighted_error: f64,
    /// Sign-alternating extrema reaching the ripple level.
    pub alternations: usize,
    /// Basis size + 1, the count the alternation theorem requires.
    pub required: usize,
}

impl EquirippleAudit {
    pub fn passes(&self, delta: f64) -> bool {
        self.max_weighted_error <= delta * 1.01 && self.alternations >= self.required
    }
}

/// Evaluate the weighted error on a grid `oversample × length` points per
/// unit band and count its alternations at the ripple level `delta`.
pub fn audit_equiripple(
    spec: &FirDesignSpec,
    taps: &[f64],
    delta: f64,
    oversample: usize,
) -> EquirippleAudit {
    let r = spec.basis_len();
    let pts = oversample * spec.length;
    let mut errs = Vec::new();
    for b in &spec.bands {
        let (lo, hi) = match spec.kind {
            FilterKind::Hilbert => (
                b.lo.max(1.0 / (spec.grid_density * r) as f64),
                b.hi.min(1.0 - 1.0 / (spec.grid_density * r) as f64),
            ),
            FilterKind::Lowpass => (b.lo, b.hi),
        };
        let n = ((hi - lo) * pts as f64).ceil() as usize;
        let band_err: Vec<f64> = (0..=n)
            .map(|i| {
                let f = lo + (hi - lo) * i as f64 / n as f64;
                b.weight * (b.desired_at(f) - amplitude_response(taps, spec.kind, f))
            })
            .collect();
        errs.push(band_err);
    }
    let max = errs.iter().flatten().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut signs = Vec::new();
    for be in &errs {
        for i in 0..be.len() {
            let e = be[i];
            if e.abs() < delta * 0.99 {
                continue;
            }
            let s = e.signum();
            let l = i == 0 || s * e >= s * be[i - 1];
            let rr = i + 1 == be.len() || s * e >= s * be[i + 1];
            if l && rr && signs.last() != Some(&s) {
                signs.push(s);
            }
        }
    }
    EquirippleAudit {
        max_weighted_error: max,
        alternations: signs.len(),
        required: r + 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_alternation(spec: &FirDesignSpec, d: &RemezDesign) {
        let a = audit_equiripple(spec, &d.taps, d.delta, 16);
        assert!(
            a.max_weighted_error <= d.delta * 1.01,
            "max weighted error {} exceeds delta {}",
            a.max_weighted_error,
            d.delta
        );
        assert!(
            a.alternations >= a.required,
            "only {} alternations, need {}",
            a.alternations,
            a.required
        );
    }

    #[test]
    fn hilbert_101_is_equiripple_type3() {
        let spec = FirDesignSpec::hilbert(101, 0.03, 0.97);
        let d = remez(&spec).unwrap();
        assert_eq!(d.taps.len(), 101);
        for k in 0..101 {
            assert_eq!(d.taps[k], -d.taps[100 - k]);
        }
        for k in (0..101).step_by(2) {
            assert!(d.taps[k].abs() < 1e-12, "tap {k} = {}", d.taps[k]);
        }
        let mid = amplitude_response(&d.taps, FilterKind::Hilbert, 0.5);
        assert!((mid - 1.0).abs() <= d.delta * (1.0 + 1e-9));
        check_alternation(&spec, &d);
    }

    #[test]
    fn lowpass_31_meets_alternation() {
        let spec = FirDesignSpec::lowpass(31, 0.2, 0.3, 10.0);
        let d = remez(&spec).unwrap();
        for k in 0..31 {
            assert_eq!(d.taps[k], d.taps[30 - k]);
        }
        check_alternation(&spec, &d);
    }

    #[test]
    fn inverted_band_edges_rejected() {
        let spec = FirDesignSpec::lowpass(31, 0.3, 0.2, 1.0);
        assert!(matches!(remez(&spec), Err(Error::Validation(_))));
        let spec = FirDesignSpec::lowpass(31, 0.3, 0.3, 1.0);
        assert!(matches!(remez(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn even_length_rejected() {
        let spec = FirDesignSpec::hilbert(100, 0.05, 0.95);
        assert!(matches!(remez(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn iteration_cap_reports_last_delta() {
        let mut spec = FirDesignSpec::hilbert(101, 0.03, 0.97);
        spec.max_iterations = 1;
        match remez(&spec) {
            Err(Error::RemezNoConvergence { iterations, delta }) => {
                assert_eq!(iterations, 1);
                assert!(delta > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
