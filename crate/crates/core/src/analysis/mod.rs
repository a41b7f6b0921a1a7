//! Dynamical zeta functions, entropy and pressure estimates, trace-formula
//! pairings, orbit separation, and the point-spectrum arithmetic.

mod testfn;

pub use testfn::TestFunction;

use crate::error::{Error, Result};
use crate::geometry::MetricModel;
use crate::numeric::{kahan_sum, linear_fit};
use crate::orbits::ClosedGeodesic;
use crate::spectrum::{CountingConvention, LengthSpectrum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Half-plane gap beyond the entropy estimate inside which zeta tail bounds
/// are reported as finite.
pub const ZETA_TAIL_GAP: f64 = 0.1;

/// A (possibly truncated) zeta evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ZetaValue {
    pub s: Complex64,
    pub value: Complex64,
    pub truncation_t: f64,
    pub k_max: usize,
    /// Heuristic bound on the truncation error of the value; finite only when
    /// Re(s) exceeds the growth estimate by [`ZETA_TAIL_GAP`].
    pub tail_bound: f64,
    /// False when Re(s) lies at or below the estimated abscissa of absolute
    /// convergence; the value is then only a truncated sum.
    pub convergent: bool,
}

/// Entropy from the growth of the counting function.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyEstimate {
    pub h: f64,
    pub window: (f64, f64),
    pub stderr: f64,
    pub convention: CountingConvention,
}

/// Orbit-integral potentials for the pressure estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    Zero,
    Constant(f64),
    /// -(1/2) log of the expanding eigenvalue over the orbit (the unstable
    /// expansion integral), recovered from the stored determinant weight.
    SrbHalf,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PressureEstimate {
    pub p: f64,
    pub potential: Potential,
    pub window: (f64, f64),
    pub stderr: f64,
    /// Bin width in length (empty bins are merged rightward).
    pub epsilon: f64,
}

/// Growth estimate used by zeta tail bounds: entropy when the spectrum
/// supports a fit, zero for (at most) single-primitive spectra.
pub fn default_entropy(spec: &LengthSpectrum) -> f64 {
    if spec.primitive_count() <= 1 {
        return 0.0;
    }
    let hi = spec.max_length;
    for window in [(hi / 2.0, hi), (0.0, hi)] {
        if let Ok(est) = estimate_entropy(spec, window) {
            return est.h.max(0.0);
        }
    }
    0.0
}

fn fit_window_count_constant(spec: &LengthSpectrum, h: f64) -> f64 {
    // Smallest C with (#primitives in (j, j+1]) <= C e^{h (j+1)} over the
    // data horizon (the spectrum horizon may be far beyond the data).
    let data_end = spec
        .entries()
        .iter()
        .map(|e| e.primitive_length)
        .fold(0.0f64, f64::max);
    let mut c: f64 = 0.0;
    let mut j = 0usize;
    while (j as f64) < spec.max_length.min(data_end + 1.0) {
        let lo = j as f64;
        let hi = lo + 1.0;
        let n = spec
            .entries()
            .iter()
            .filter(|e| e.k == 1 && e.primitive_length > lo && e.primitive_length <= hi)
            .count();
        c = c.max(n as f64 / (h * hi).exp());
        j += 1;
    }
    c
}

/// Z(s) = exp( sum over primitives l_p <= T of sum_{k <= k_max}
/// e^{-k s l_p} / k ), T the spectrum horizon.
pub fn zeta(spec: &LengthSpectrum, s: Complex64, k_max: usize) -> Result<ZetaValue> {
    zeta_truncated(spec, s, k_max, spec.max_length)
}

/// Zeta with an explicit primitive-length truncation (for tail studies).
pub fn zeta_truncated(
    spec: &LengthSpectrum,
    s: Complex64,
    k_max: usize,
    t_cut: f64,
) -> Result<ZetaValue> {
    if k_max < 1 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    if t_cut > spec.max_length {
        return Err(Error::IncompleteHorizon {
            requested: t_cut,
            horizon: spec.max_length,
        });
    }
    let mut log_z = Complex64::new(0.0, 0.0);
    let mut l_min = f64::INFINITY;
    for e in spec.entries().iter().filter(|e| e.k == 1) {
        let l = e.primitive_length;
        if l > t_cut {
            break;
        }
        l_min = l_min.min(l);
        for k in 1..=k_max {
            let term = (-(k as f64) * s * l).exp() / k as f64;
            log_z += term;
            if term.norm() < 1e-300 {
                break;
            }
        }
    }
    let value = log_z.exp();
    let h = default_entropy(spec);
    let sigma = s.re;
    let convergent = sigma > h;
    let tail_bound = if sigma > h + ZETA_TAIL_GAP {
        let c = fit_window_count_constant(spec, h);
        let gap = sigma - h;
        // Missing primitives beyond the truncation (k >= 1 summed crudely)...
        let miss = c * h.exp() * (-gap * t_cut).exp() / (1.0 - (-gap).exp())
            / (1.0 - (-sigma * t_cut.max(1.0)).exp());
        // ... plus the k-truncation of the primitives kept.
        let ktail = if l_min.is_finite() {
            let kk = (k_max + 1) as f64;
            spec.entries()
                .iter()
                .filter(|e| e.k == 1 && e.primitive_length <= t_cut)
                .map(|e| {
                    (-kk * sigma * e.primitive_length).exp()
                        / (kk * (1.0 - (-sigma * e.primitive_length).exp()))
                })
                .sum::<f64>()
        } else {
            0.0
        };
        let log_tail = miss + ktail;
        value.norm() * (log_tail.exp() - 1.0)
    } else {
        f64::INFINITY
    };
    Ok(ZetaValue {
        s,
        value,
        truncation_t: t_cut,
        k_max,
        tail_bound,
        convergent,
    })
}

/// Weighted zeta: exp of the sum over stored (orbit, iterate) entries with
/// k <= k_max of e^{-s k l_p} / (k * weight).
pub fn weighted_zeta(spec: &LengthSpectrum, s: Complex64, k_max: usize) -> Result<ZetaValue> {
    if k_max < 1 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    let mut log_z = Complex64::new(0.0, 0.0);
    for e in spec.entries() {
        if e.k > k_max {
            continue;
        }
        if !(e.weight > 0.0) || !e.weight.is_finite() {
            return Err(Error::Data(format!(
                "entry {} (k={}) carries invalid weight {}",
                e.word, e.k, e.weight
            )));
        }
        log_z += (-s * e.total_length).exp() / (e.k as f64 * e.weight);
    }
    let value = log_z.exp();
    let h = default_entropy(spec);
    // Heuristic convergence threshold p(-H/2); on nearly constant curvature
    // this is h - 1/2.
    let p_threshold = estimate_pressure(spec, Potential::SrbHalf, (spec.max_length / 2.0, spec.max_length))
        .map(|p| p.p)
        .unwrap_or(h - 0.5);
    let sigma = s.re;
    let convergent = sigma > p_threshold;
    let tail_bound = if sigma > p_threshold + ZETA_TAIL_GAP {
        let c = fit_window_count_constant(spec, h);
        let gap = sigma - p_threshold;
        let miss = c * h.exp() * (-gap * spec.max_length).exp() / (1.0 - (-gap).exp());
        value.norm() * (miss.exp() - 1.0)
    } else {
        f64::INFINITY
    };
    Ok(ZetaValue {
        s,
        value,
        truncation_t: spec.max_length,
        k_max,
        tail_bound,
        convergent,
    })
}

/// Entropy from the least-squares slope of log(T N(T)) against T at the
/// counting-function jump points inside `window`.
///
/// A spectrum with at most one primitive orbit has polynomially growing
/// N(T); its entropy is 0 exactly, not a regression output.
pub fn estimate_entropy(spec: &LengthSpectrum, window: (f64, f64)) -> Result<EntropyEstimate> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Config("empty entropy window".into()));
    }
    if hi > spec.max_length * (1.0 + 1e-12) {
        return Err(Error::IncompleteHorizon {
            requested: hi,
            horizon: spec.max_length,
        });
    }
    if spec.primitive_count() <= 1 {
        return Ok(EntropyEstimate {
            h: 0.0,
            window,
            stderr: 0.0,
            convention: spec.convention,
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut count = 0usize;
    let mut last_t = f64::NEG_INFINITY;
    for e in spec.counted_entries() {
        count += 1;
        let t = e.total_length;
        if t < lo || t > hi {
            last_t = t;
            continue;
        }
        if (t - last_t).abs() < 1e-12 {
            // Coinciding jump: keep the latest count at this abscissa.
            if let Some(y) = ys.last_mut() {
                *y = (t * count as f64).ln();
            }
        } else {
            xs.push(t);
            ys.push((t * count as f64).ln());
        }
        last_t = t;
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateEstimate(format!(
            "only {} counting steps in window [{lo}, {hi}]",
            xs.len()
        )));
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(EntropyEstimate {
        h: fit.slope,
        window,
        stderr: fit.slope_stderr,
        convention: spec.convention,
    })
}

/// Pressure of the named potential from binned orbit sums: the slope of
/// log(T_j * S_j) over bin right-endpoints T_j, where
/// S_j = sum over entries in the bin of exp(orbit integral of f).
/// The T normalization matches the entropy estimator so that p(0) = h.
pub fn estimate_pressure(
    spec: &LengthSpectrum,
    potential: Potential,
    window: (f64, f64),
) -> Result<PressureEstimate> {
    let epsilon = 0.5;
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Config("empty pressure window".into()));
    }
    if hi > spec.max_length * (1.0 + 1e-12) {
        return Err(Error::IncompleteHorizon {
            requested: hi,
            horizon: spec.max_length,
        });
    }
    let entries: Vec<_> = spec
        .counted_entries()
        .filter(|e| e.total_length > lo && e.total_length <= hi)
        .collect();
    if entries.is_empty() {
        return Err(Error::Binning {
            message: "no orbits in pressure window".into(),
            suggested_epsilon: (hi - lo) / 2.0,
        });
    }
    let f_integral = |e: &crate::spectrum::SpectrumEntry| -> f64 {
        match potential {
            Potential::Zero => 0.0,
            Potential::Constant(c) => c * e.total_length,
            // integral of H over the k-iterate is k chi = 2 asinh(w/2).
            Potential::SrbHalf => -(e.weight / 2.0).asinh(),
        }
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut bin_lo = lo;
    let mut idx = 0usize;
    while bin_lo < hi && idx < entries.len() {
        let mut bin_hi = (bin_lo + epsilon).min(hi);
        // Merge empty bins rightward.
        loop {
            let any = entries[idx..]
                .iter()
                .take_while(|e| e.total_length <= bin_hi)
                .count();
            if any > 0 || bin_hi >= hi {
                break;
            }
            bin_hi = (bin_hi + epsilon).min(hi);
        }
        let in_bin: Vec<_> = entries[idx..]
            .iter()
            .take_while(|e| e.total_length <= bin_hi)
            .collect();
        if !in_bin.is_empty() {
            let s_j = kahan_sum(in_bin.iter().map(|e| f_integral(e).exp()));
            xs.push(bin_hi);
            ys.push((bin_hi * s_j).ln());
        }
        idx += in_bin.len();
        bin_lo = bin_hi;
    }
    if xs.len() < 2 {
        return Err(Error::Binning {
            message: format!("only {} populated pressure bins in window", xs.len()),
            suggested_epsilon: (hi - lo) / 4.0,
        });
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(PressureEstimate {
        p: fit.slope,
        potential,
        window,
        stderr: fit.slope_stderr,
        epsilon,
    })
}

/// Dynamical side of the trace formula paired with a test function:
/// sum over stored entries with total length in supp(phi) of
/// l_p * phi(k l_p) / weight.
pub fn dynamical_trace(spec: &LengthSpectrum, phi: &TestFunction) -> Result<f64> {
    let (_, sup_hi) = phi.support();
    if sup_hi > spec.max_length {
        return Err(Error::IncompleteHorizon {
            requested: sup_hi,
            horizon: spec.max_length,
        });
    }
    Ok(kahan_sum(spec.entries().iter().filter_map(|e| {
        let v = phi.eval(e.total_length);
        (v != 0.0).then(|| e.primitive_length * v / e.weight)
    })))
}

/// Minimum sampled Sasaki separation for one orbit pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairSeparation {
    pub word1: String,
    pub word2: String,
    pub min_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub t: f64,
    pub delta: f64,
    pub b: f64,
    /// Disjointness threshold 2 e^{-B T}.
    pub threshold: f64,
    pub pairs: Vec<PairSeparation>,
    pub min_distance: f64,
    /// threshold / min_distance: below 1 passes; decreases as B grows.
    pub margin: f64,
    pub pass: bool,
}

/// Check that lifted `orbits` with length in [T - delta, T] are pairwise
/// separated by more than 2 e^{-B T} in the Sasaki metric, sampling `samples`
/// phase points per orbit and minimizing over a small ball of deck
/// transformations (quotient distance).
pub fn separation_check(
    orbits: &[ClosedGeodesic],
    model: &MetricModel,
    t: f64,
    delta: f64,
    b: f64,
    samples: usize,
) -> Result<SeparationReport> {
    if delta <= 0.0 || b <= 0.0 || samples == 0 {
        return Err(Error::Config("separation needs delta, B, samples > 0".into()));
    }
    let threshold = 2.0 * (-b * t).exp();
    let in_window: Vec<&ClosedGeodesic> = orbits
        .iter()
        .filter(|o| o.length >= t - delta && o.length <= t)
        .collect();
    for o in &in_window {
        if o.nodes.is_empty() {
            return Err(Error::Data(format!(
                "orbit {} carries no phase samples",
                o.word
            )));
        }
    }
    let decks = deck_ball(model)?;
    let sampled: Vec<Vec<crate::geometry::PhasePoint>> = in_window
        .iter()
        .map(|o| o.phase_samples(model, samples))
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    let mut global_min = f64::INFINITY;
    for i in 0..in_window.len() {
        for j in (i + 1)..in_window.len() {
            let a = &sampled[i];
            let bb = &sampled[j];
            let mut min_d = f64::INFINITY;
            // Sasaki >= base distance, so full (transport) evaluations are
            // needed only while a pair's base distance undercuts the best.
            let mut cands: Vec<(f64, usize, usize, usize)> = Vec::new();
            for (di, deck) in decks.iter().enumerate() {
                for (ai, xa) in a.iter().enumerate() {
                    for (bi, xb) in bb.iter().enumerate() {
                        let xb_moved = deck.apply_phase(xb);
                        let dbase = model.distance(&xa.base, &xb_moved.base)?;
                        cands.push((dbase, di, ai, bi));
                    }
                }
            }
            cands.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
            for (dbase, di, ai, bi) in cands {
                if dbase >= min_d {
                    break;
                }
                let xb_moved = decks[di].apply_phase(&bb[bi]);
                let d = model.sasaki_distance(&a[ai], &xb_moved)?;
                min_d = min_d.min(d);
            }
            global_min = global_min.min(min_d);
            pairs.push(PairSeparation {
                word1: in_window[i].word.to_string(),
                word2: in_window[j].word.to_string(),
                min_distance: min_d,
            });
        }
    }
    let pass = pairs.iter().all(|p| p.min_distance > threshold);
    Ok(SeparationReport {
        t,
        delta,
        b,
        threshold,
        pairs,
        min_distance: global_min,
        margin: threshold / global_min,
        pass,
    })
}

/// Deck transformations of word length <= 2 (plus identity), the ball used
/// for quotient-distance minimization in separation checks.
fn deck_ball(model: &MetricModel) -> Result<Vec<crate::geometry::Deck>> {
    use crate::geometry::{Deck, ModelKind};
    match &model.kind {
        ModelKind::Schottky { generators } => {
            let mut out = vec![Deck::Identity];
            let rank = generators.len();
            let letters: Vec<i32> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
            for &l1 in &letters {
                let w = crate::schottky::Word::new(vec![l1]);
                out.push(model.deck(&w)?);
                for &l2 in &letters {
                    if l2 == -l1 {
                        continue;
                    }
                    let w = crate::schottky::Word::new(vec![l1, l2]);
                    out.push(model.deck(&w)?);
                }
            }
            Ok(out)
        }
        ModelKind::Cylinder { .. } => Ok((-2..=2).map(Deck::Rotate).collect()),
        ModelKind::Perturbed { base, .. } => match base.as_ref() {
            ModelKind::Cylinder { .. } => Ok((-2..=2).map(Deck::Rotate).collect()),
            _ => Ok(vec![Deck::Identity]),
        },
        ModelKind::HalfPlane => Ok(vec![Deck::Identity]),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PotRatioReport {
    pub h: f64,
    /// (T, h T N(T) / e^{h T}); tends to 1 under the prime orbit asymptotic
    /// N(T) ~ e^{hT} / (hT).
    pub rows: Vec<(f64, f64)>,
    /// Set when the asymptotic is vacuous (h <= 0 or at most one primitive).
    pub vacuous: bool,
}

pub fn pot_ratio(spec: &LengthSpectrum, h: f64, t_values: &[f64]) -> Result<PotRatioReport> {
    if h <= 0.0 || spec.primitive_count() <= 1 {
        return Ok(PotRatioReport {
            h,
            rows: Vec::new(),
            vacuous: true,
        });
    }
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let n = spec.count(t)?;
        rows.push((t, h * t * n as f64 / (h * t).exp()));
    }
    Ok(PotRatioReport {
        h,
        rows,
        vacuous: false,
    })
}

/// Outcome of the entropy/curvature point-spectrum arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "classification", rename_all = "snake_case")]
pub enum SpectralClassification {
    /// h > n k1 / 2: point spectrum exists with s0 >= h + n(1 - k1)/2.
    PointSpectrum { s0_lower: f64 },
    /// h <= n k2 / 2: the point spectrum is empty.
    EmptyPointSpectrum,
    /// Between the thresholds nothing follows.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorollaryReport {
    pub h: f64,
    pub k1: f64,
    pub k2: f64,
    pub n: usize,
    pub upper_threshold: f64,
    pub lower_threshold: f64,
    #[serde(flatten)]
    pub classification: SpectralClassification,
}

/// Three-branch classification of the point spectrum from entropy and
/// curvature pinching alone.
pub fn corollary_arithmetic(h: f64, k1: f64, k2: f64, n: usize) -> CorollaryReport {
    let nf = n as f64;
    let upper = nf * k1 / 2.0;
    let lower = nf * k2 / 2.0;
    let classification = if h > upper {
        SpectralClassification::PointSpectrum {
            s0_lower: h + nf * (1.0 - k1) / 2.0,
        }
    } else if h <= lower {
        SpectralClassification::EmptyPointSpectrum
    } else {
        SpectralClassification::Inconclusive
    };
    CorollaryReport {
        h,
        k1,
        k2,
        n,
        upper_threshold: upper,
        lower_threshold: lower,
        classification,
    }
}

#[cfg(test)]
mod tests;
