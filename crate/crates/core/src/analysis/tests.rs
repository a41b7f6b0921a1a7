use super::*;
use crate::numeric::kahan_sum;
use crate::schottky::{self, MobiusGenerator, Word};
use crate::spectrum::{
    synthetic_pot_spectrum, CountingConvention, LengthSpectrum, SpectrumEntry,
};
use approx::assert_relative_eq;
use num_complex::Complex64;

fn convention(s: &str) -> CountingConvention {
    CountingConvention::parse(s).unwrap()
}

fn single_primitive(l: f64, horizon: f64) -> LengthSpectrum {
    let mut spec = LengthSpectrum::new(convention("with-iterates/unoriented"), horizon);
    spec.insert(SpectrumEntry::new(
        Word::parse("a").unwrap(),
        l,
        1,
        2.0 * (l / 2.0).sinh(),
        0.0,
    ))
    .unwrap();
    spec.extend_iterates(None).unwrap();
    spec
}

fn rank2_gens() -> Vec<MobiusGenerator> {
    vec![
        MobiusGenerator::axis_standard(1.0, 0.0),
        MobiusGenerator::axis_standard(1.0, 4.4),
    ]
}

/// Exact-length Schottky spectrum up to the given word length, horizon from
/// the first missing layer.
fn schottky_spectrum(max_len: usize) -> LengthSpectrum {
    let gens = rank2_gens();
    let classes = schottky::enumerate_classes(&gens, max_len, true).unwrap();
    let horizon = schottky::enumerate_classes_free(2, max_len + 1, true)
        .into_iter()
        .filter(|w| w.len() == max_len + 1)
        .map(|w| schottky::exact_length(&w, &gens).unwrap())
        .fold(f64::INFINITY, f64::min);
    let mut spec = LengthSpectrum::new(convention("with-iterates/unoriented"), horizon);
    for w in classes {
        let l = schottky::exact_length(&w, &gens).unwrap();
        spec.insert(SpectrumEntry::new(w, l, 1, 2.0 * (l / 2.0).sinh(), 0.0))
            .unwrap();
    }
    spec.extend_iterates(None).unwrap();
    spec
}

#[test]
fn zeta_single_primitive_closed_form_value() {
    let spec = single_primitive(2.0, 10.0);
    let z = zeta(&spec, Complex64::new(1.0, 0.0), 200).unwrap();
    let expect = 1.0 / (1.0 - (-2.0f64).exp());
    assert_relative_eq!(z.value.re, expect, epsilon = 1e-7);
    assert_relative_eq!(z.value.re, 1.1565176, epsilon = 1e-6);
    assert!(z.value.im.abs() < 1e-14);
    assert!(z.convergent);
    assert!(z.tail_bound.is_finite());
}

#[test]
fn zeta_empty_spectrum_is_one() {
    let spec = LengthSpectrum::new(convention("with-iterates/unoriented"), 10.0);
    let z = zeta(&spec, Complex64::new(1.0, 0.0), 50).unwrap();
    assert_eq!(z.value, Complex64::new(1.0, 0.0));
}

#[test]
fn zeta_single_primitive_closed_form_sweep() {
    // Z(s) = (1 - e^{-s l})^{-1} for one primitive orbit.
    for l in [0.7, 2.0, 3.5] {
        for s in [0.3, 1.0, 2.4] {
            if s * l < 0.2 {
                continue;
            }
            let spec = single_primitive(l, 40.0);
            let k_max = ((200.0 / (s * l)).ceil() as usize).max(1);
            let z = zeta(&spec, Complex64::new(s, 0.0), k_max).unwrap();
            let expect = 1.0 / (1.0 - (-s * l).exp());
            assert_relative_eq!(z.value.re, expect, max_relative = 1e-10);
        }
    }
}

#[test]
fn zeta_truncation_stability_and_tail_bound() {
    let spec = schottky_spectrum(7);
    let s = Complex64::new(2.0, 0.0);
    let horizon = spec.max_length;
    let z_full = zeta(&spec, s, 200).unwrap();
    let z_cut = zeta_truncated(&spec, s, 200, horizon - 1.0).unwrap();
    // Stability under widening the truncation horizon.
    assert!((z_full.value - z_cut.value).norm() < 1e-8);
    // The reported tail bound dominates the observed truncation gap.
    assert!((z_full.value - z_cut.value).norm() <= z_cut.tail_bound);
}

#[test]
fn zeta_flags_divergence_at_small_re() {
    let spec = schottky_spectrum(6);
    let z = zeta(&spec, Complex64::new(0.05, 0.0), 50).unwrap();
    assert!(!z.convergent);
    assert!(!z.tail_bound.is_finite());
}

#[test]
fn weighted_zeta_first_term_value() {
    let spec = single_primitive(2.0, 10.0);
    let z = weighted_zeta(&spec, Complex64::new(1.0, 0.0), 1).unwrap();
    // Single k = 1 term: e^{-2} / (2 sinh 1).
    let term = (-2.0f64).exp() / (2.0 * 1.0f64.sinh());
    assert_relative_eq!(z.value.re.ln(), term, epsilon = 1e-12);
    assert_relative_eq!(term, 0.0575797, epsilon = 1e-7);
}

#[test]
fn weighted_zeta_with_unit_weights_is_zeta() {
    let k_max = 60;
    let mut spec = LengthSpectrum::new(convention("with-iterates/unoriented"), 1e9);
    for k in 1..=k_max {
        spec.insert(SpectrumEntry::new(
            Word::parse("a").unwrap(),
            1.3,
            k,
            1.0,
            0.0,
        ))
        .unwrap();
    }
    let s = Complex64::new(0.9, 0.2);
    let zw = weighted_zeta(&spec, s, k_max).unwrap();
    let z = zeta(&spec, s, k_max).unwrap();
    assert!((zw.value - z.value).norm() < 1e-12);
}

#[test]
fn weighted_zeta_cylinder_matches_direct_summation() {
    // Full weighted sum at s = 0 with k_max = 400 against an independent
    // compensated summation of e^{0} / (k * 2 sinh k).
    let mut spec = single_primitive(2.0, 10.0);
    spec.extend_iterates(Some(400)).unwrap();
    let z = weighted_zeta(&spec, Complex64::new(0.0, 0.0), 400).unwrap();
    let mut terms: Vec<f64> = (1..=400u32)
        .map(|k| 1.0 / (k as f64 * 2.0 * (k as f64).sinh()))
        .collect();
    terms.reverse(); // ascending magnitude
    let oracle = kahan_sum(terms).exp();
    assert_relative_eq!(z.value.re, oracle, max_relative = 1e-10);
}

#[test]
fn zero_weight_data_is_rejected_at_the_source() {
    // Entries are validated on insert, so weighted evaluations can only meet
    // bad weights through corrupted files; those fail at parse time.
    let text = format!(
        "# geodlab spectrum v1\n# max_length=1e1\n{}\na,2.0,1,2.0,0.0,0.0\n",
        crate::spectrum::CSV_HEADER
    );
    assert!(crate::spectrum::LengthSpectrum::from_csv(&text).is_err());
}

#[test]
fn entropy_single_primitive_is_zero() {
    let spec = single_primitive(2.0, 40.0);
    let est = estimate_entropy(&spec, (20.0, 40.0)).unwrap();
    assert_eq!(est.h, 0.0);
    assert!(est.h.abs() <= est.stderr + 1e-15);
}

#[test]
fn entropy_recovers_synthetic_rate() {
    let spec = synthetic_pot_spectrum(0.5, 25.0).unwrap();
    let est = estimate_entropy(&spec, (12.5, 25.0)).unwrap();
    assert!(
        (est.h - 0.5).abs() < 0.05,
        "h = {} +- {}",
        est.h,
        est.stderr
    );
}

#[test]
fn entropy_stable_under_window_shifts_on_synthetic() {
    let spec = synthetic_pot_spectrum(0.5, 25.0).unwrap();
    let base = estimate_entropy(&spec, (12.5, 24.0)).unwrap();
    for shift in [-1.0, 1.0] {
        let est = estimate_entropy(&spec, (12.5 + shift, 24.0 + shift)).unwrap();
        assert!((est.h - base.h).abs() < 0.05);
    }
}

#[test]
fn entropy_window_beyond_horizon_errors() {
    let spec = single_primitive(2.0, 10.0);
    assert!(matches!(
        estimate_entropy(&spec, (5.0, 11.0)),
        Err(crate::Error::IncompleteHorizon { .. })
    ));
}

#[test]
fn entropy_needs_counting_steps() {
    let spec = schottky_spectrum(2);
    // A window inside the horizon but below the shortest orbit has no steps.
    assert!(matches!(
        estimate_entropy(&spec, (0.1, 1.0)),
        Err(crate::Error::DegenerateEstimate(_))
    ));
}

#[test]
fn pressure_zero_potential_reproduces_entropy() {
    let spec = synthetic_pot_spectrum(0.5, 25.0).unwrap();
    let window = (12.5, 25.0);
    let h = estimate_entropy(&spec, window).unwrap();
    let p = estimate_pressure(&spec, Potential::Zero, window).unwrap();
    assert!(
        (p.p - h.h).abs() <= p.stderr + h.stderr + 0.02,
        "p = {} vs h = {}",
        p.p,
        h.h
    );
}

#[test]
fn pressure_constant_shift_identity() {
    let spec = synthetic_pot_spectrum(0.5, 25.0).unwrap();
    let window = (12.5, 25.0);
    let p0 = estimate_pressure(&spec, Potential::Zero, window).unwrap();
    for c in [-0.5, -0.3, 0.2] {
        let pc = estimate_pressure(&spec, Potential::Constant(c), window).unwrap();
        assert!(
            (pc.p - p0.p - c).abs() <= 2.0 * (pc.stderr + p0.stderr) + 1e-9,
            "c = {c}: {} vs {}",
            pc.p - p0.p,
            c
        );
    }
}

#[test]
fn pressure_srb_half_on_constant_curvature() {
    // lambda = e^l, so the unstable integral is l and the srb_half potential
    // shifts the pressure by exactly -1/2.
    let spec = schottky_spectrum(8);
    let window = (spec.max_length / 2.0, spec.max_length);
    let p0 = estimate_pressure(&spec, Potential::Zero, window).unwrap();
    let ps = estimate_pressure(&spec, Potential::SrbHalf, window).unwrap();
    assert!(
        (ps.p - (p0.p - 0.5)).abs() <= 2.0 * (ps.stderr + p0.stderr) + 1e-9,
        "srb {} vs zero-potential {} - 1/2",
        ps.p,
        p0.p
    );
}

#[test]
fn pressure_empty_window_is_binning_error() {
    let spec = schottky_spectrum(3);
    assert!(matches!(
        estimate_pressure(&spec, Potential::Zero, (0.1, 1.5)),
        Err(crate::Error::Binning { .. })
    ));
}

#[test]
fn trace_cylinder_bump_value() {
    let spec = single_primitive(2.0, 10.0);
    let phi = TestFunction::bump(2.0, 1.0).unwrap();
    let v = dynamical_trace(&spec, &phi).unwrap();
    assert_relative_eq!(v, 1.0 / 1.0f64.sinh(), epsilon = 1e-6);
    assert_relative_eq!(v, 0.850918, epsilon = 1e-6);
}

#[test]
fn trace_below_shortest_length_is_zero() {
    let spec = single_primitive(2.0, 10.0);
    let phi = TestFunction::bump(1.0, 1.0).unwrap();
    assert_eq!(dynamical_trace(&spec, &phi).unwrap(), 0.0);
}

#[test]
fn trace_matches_term_by_term_oracle() {
    let spec = schottky_spectrum(5);
    let phi = TestFunction::bump(4.5, 7.0).unwrap();
    let v = dynamical_trace(&spec, &phi).unwrap();
    // Independent summation straight off the entry list.
    let mut oracle = 0.0;
    for e in spec.entries() {
        oracle += e.primitive_length * phi.eval(e.total_length) / e.weight;
    }
    assert_relative_eq!(v, oracle, max_relative = 1e-10);
}

#[test]
fn trace_support_beyond_horizon_errors() {
    let spec = single_primitive(2.0, 10.0);
    let phi = TestFunction::bump(10.0, 1.0).unwrap();
    assert!(matches!(
        dynamical_trace(&spec, &phi),
        Err(crate::Error::IncompleteHorizon { .. })
    ));
}

#[test]
fn trace_is_linear_and_monotone() {
    let spec = schottky_spectrum(4);
    let narrow = TestFunction::bump(6.0, 1.0).unwrap();
    let wide = TestFunction::bump(6.0, 3.0).unwrap();
    let v_narrow = dynamical_trace(&spec, &narrow).unwrap();
    let v_wide = dynamical_trace(&spec, &wide).unwrap();
    // Monotone: the wide bump dominates the narrow one pointwise.
    for t in [5.0, 5.5, 6.0, 6.5, 7.0] {
        assert!(wide.eval(t) >= narrow.eval(t) - 1e-15);
    }
    assert!(v_wide >= v_narrow);
    // Linearity in phi: pairing against (a phi) equals a times the pairing.
    let scaled: f64 = spec
        .entries()
        .iter()
        .map(|e| e.primitive_length * 0.3 * narrow.eval(e.total_length) / e.weight)
        .sum();
    assert_relative_eq!(scaled, 0.3 * v_narrow, max_relative = 1e-12);
}

fn exact_orbits(words: &[&str]) -> Vec<crate::orbits::ClosedGeodesic> {
    let gens = rank2_gens();
    let model = crate::geometry::MetricModel::schottky(gens.clone()).unwrap();
    words
        .iter()
        .map(|n| {
            schottky::exact_closed_geodesic(&Word::parse(n).unwrap(), &gens, &model).unwrap()
        })
        .collect()
}

#[test]
fn separation_single_orbit_passes_vacuously() {
    let gens = rank2_gens();
    let model = crate::geometry::MetricModel::schottky(gens).unwrap();
    let orbits = exact_orbits(&["a"]);
    let report = separation_check(&orbits, &model, 2.0, 0.5, 2.5, 16).unwrap();
    assert!(report.pass);
    assert!(report.pairs.is_empty());
}

#[test]
fn separation_fails_on_duplicate_orbit() {
    let gens = rank2_gens();
    let model = crate::geometry::MetricModel::schottky(gens).unwrap();
    let orbits = exact_orbits(&["a", "a"]);
    let report = separation_check(&orbits, &model, 2.0, 0.5, 2.5, 16).unwrap();
    assert!(!report.pass);
    assert!(report.min_distance < 1e-12);
}

#[test]
fn separation_passes_for_distinct_words() {
    let gens = rank2_gens();
    let model = crate::geometry::MetricModel::schottky(gens).unwrap();
    // a and b have equal lengths here; check their window.
    let orbits = exact_orbits(&["a", "b"]);
    let report = separation_check(&orbits, &model, 2.0, 0.5, 2.5, 32).unwrap();
    assert!(report.pass, "margin {}", report.margin);
    assert!(report.min_distance > 0.1);
}

#[test]
fn separation_margin_decreases_with_b() {
    let gens = rank2_gens();
    let model = crate::geometry::MetricModel::schottky(gens).unwrap();
    let orbits = exact_orbits(&["a", "b"]);
    let mut margins = Vec::new();
    for b in [1.0, 2.0, 3.0] {
        let report = separation_check(&orbits, &model, 2.0, 0.5, b, 16).unwrap();
        margins.push(report.margin);
    }
    assert!(margins[0] > margins[1] && margins[1] > margins[2]);
}

#[test]
fn pot_ratio_synthetic_near_one() {
    let spec = synthetic_pot_spectrum(0.5, 25.0).unwrap();
    let report = pot_ratio(&spec, 0.5, &[20.0, 22.0, 25.0]).unwrap();
    assert!(!report.vacuous);
    let (_, last) = *report.rows.last().unwrap();
    assert!((0.9..=1.1).contains(&last), "ratio {last}");
}

#[test]
fn pot_ratio_cylinder_is_vacuous() {
    let spec = single_primitive(2.0, 10.0);
    let report = pot_ratio(&spec, 0.3, &[5.0]).unwrap();
    assert!(report.vacuous);
    let report = pot_ratio(&schottky_spectrum(3), -0.1, &[5.0]).unwrap();
    assert!(report.vacuous);
}

#[test]
fn corollary_thresholds() {
    let r = corollary_arithmetic(0.7, 1.0, 1.0, 1);
    match r.classification {
        SpectralClassification::PointSpectrum { s0_lower } => {
            assert_relative_eq!(s0_lower, 0.7, epsilon = 1e-15);
        }
        other => panic!("expected point spectrum, got {other:?}"),
    }
    let r = corollary_arithmetic(0.3, 1.0, 1.0, 1);
    assert_eq!(r.classification, SpectralClassification::EmptyPointSpectrum);
    let r = corollary_arithmetic(0.6, 1.4, 0.8, 1);
    assert_eq!(r.classification, SpectralClassification::Inconclusive);
}

#[test]
fn default_entropy_cascade() {
    let empty = LengthSpectrum::new(convention("with-iterates/unoriented"), 10.0);
    assert_eq!(default_entropy(&empty), 0.0);
    assert_eq!(default_entropy(&single_primitive(2.0, 10.0)), 0.0);
    let spec = schottky_spectrum(6);
    assert!(default_entropy(&spec) > 0.1);
}
