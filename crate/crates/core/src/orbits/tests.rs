use super::*;
use crate::geometry::{ChartPoint, MetricModel, ModelKind};
use crate::schottky::{self, MobiusGenerator, Word};
use approx::assert_relative_eq;

fn cylinder(l: f64) -> MetricModel {
    MetricModel::cylinder(l).unwrap()
}

fn rank2_gens() -> Vec<MobiusGenerator> {
    vec![
        MobiusGenerator::axis_standard(1.0, 0.0),
        MobiusGenerator::axis_standard(1.0, 5.0),
    ]
}

fn perturbed_cylinder(amplitude: f64) -> MetricModel {
    MetricModel::perturbed(
        ModelKind::Cylinder { core_length: 2.0 },
        [0.15, 1.0],
        0.8,
        amplitude,
    )
    .unwrap()
}

#[test]
fn shorten_leaves_core_circle_alone() {
    let model = cylinder(2.0);
    let seed = schottky::seed_loop(&Word::generator(0), &[], &model).unwrap();
    let out = shorten_loop(&model, &seed, 50, 1e-9).unwrap();
    assert_relative_eq!(out.length, 2.0, epsilon = 1e-9);
}

#[test]
fn shorten_recovers_core_from_radial_perturbation() {
    let model = cylinder(2.0);
    // 16 vertices displaced radially by up to 0.3.
    let n = 16;
    let vertices: Vec<ChartPoint> = (0..n)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            let r = 0.3 * (3.0 * theta).cos();
            ChartPoint::cylinder(r, theta)
        })
        .collect();
    let lp = Loop::new(&model, vertices, Word::generator(0)).unwrap();
    assert!(lp.length > 2.0);
    let out = shorten_loop(&model, &lp, 20000, 1e-13).unwrap();
    assert_relative_eq!(out.length, 2.0, epsilon = 1e-6);
}

#[test]
fn shorten_monotone_length_sequence() {
    let model = cylinder(2.0);
    let n = 16;
    let vertices: Vec<ChartPoint> = (0..n)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            ChartPoint::cylinder(0.25 * (2.0 * theta).sin(), theta)
        })
        .collect();
    let mut lp = Loop::new(&model, vertices, Word::generator(0)).unwrap();
    let mut prev = lp.length;
    for _ in 0..40 {
        lp = shorten_loop(&model, &lp, 1, 0.0).unwrap();
        assert!(
            lp.length <= prev + 1e-12,
            "length increased: {prev} -> {}",
            lp.length
        );
        prev = lp.length;
    }
}

#[test]
fn shorten_contractible_polygon_errors() {
    let model = MetricModel::half_plane();
    let vertices: Vec<ChartPoint> = (0..12)
        .map(|j| {
            let a = 2.0 * std::f64::consts::PI * j as f64 / 12.0;
            ChartPoint::half_plane(2.0 + 0.5 * a.sin(), 0.5 * a.cos())
        })
        .collect();
    // The half-plane is simply connected: the only available word is empty.
    let lp = Loop::new(&model, vertices, Word::empty()).unwrap();
    assert!(matches!(
        shorten_loop(&model, &lp, 100, 1e-9),
        Err(crate::Error::ContractibleClass(_))
    ));
}

#[test]
fn refine_cylinder_core_to_high_accuracy() {
    let model = cylinder(2.0);
    let seed = schottky::seed_loop(&Word::generator(0), &[], &model).unwrap();
    let short = shorten_loop(&model, &seed, 30, 1e-7).unwrap();
    let orbit = refine_newton(&model, &short, 1e-10).unwrap();
    assert_relative_eq!(orbit.length, 2.0, epsilon = 1e-8);
    assert!(orbit.residual <= 1e-10);
}

#[test]
fn refine_matches_schottky_exact_lengths() {
    let gens = rank2_gens();
    let model = MetricModel::schottky(gens.clone()).unwrap();
    for name in ["a", "ab", "aB", "abb"] {
        let w = Word::parse(name).unwrap();
        let orbit = search_closed_geodesic(&model, &w, &gens, &SearchOptions::default()).unwrap();
        let exact = schottky::exact_length(&w, &gens).unwrap();
        assert_relative_eq!(orbit.length, exact, max_relative = 1e-6, epsilon = 1e-6);
    }
}

#[test]
fn refine_perturbed_cylinder_reproducible() {
    let model = perturbed_cylinder(0.05);
    let opts = SearchOptions::default();
    let orbit = search_closed_geodesic(&model, &Word::generator(0), &[], &opts).unwrap();
    // The conformal factor moves the length by at most (e^{|a|} - 1) l.
    assert!((orbit.length - 2.0).abs() < 0.05 * 2.2);
    // Doubled discretization: rebuild the seed with twice the vertices.
    let seed = schottky::seed_loop(&Word::generator(0), &[], &model).unwrap();
    let dense: Vec<ChartPoint> = (0..2 * seed.vertices.len())
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / (2 * seed.vertices.len()) as f64;
            ChartPoint::cylinder(0.0, theta)
        })
        .collect();
    let seed2 = Loop::new(&model, dense, Word::generator(0)).unwrap();
    let short2 = shorten_loop(&model, &seed2, opts.shorten_max_iters, opts.shorten_tol).unwrap();
    let orbit2 = refine_newton_opts(&model, &short2, &opts).unwrap();
    assert_relative_eq!(orbit.length, orbit2.length, epsilon = 1e-6);
}

#[test]
fn refine_reports_nonconvergence() {
    let model = cylinder(2.0);
    // A wild loop far from any geodesic, with an unreachable tolerance.
    let n = 12;
    let vertices: Vec<ChartPoint> = (0..n)
        .map(|j| {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            ChartPoint::cylinder(1.5 * (5.0 * theta).sin(), theta)
        })
        .collect();
    let lp = Loop::new(&model, vertices, Word::generator(0)).unwrap();
    let res = refine_newton_opts(
        &model,
        &lp,
        &SearchOptions {
            newton_tol: 1e-30,
            ..SearchOptions::default()
        },
    );
    assert!(matches!(
        res,
        Err(crate::Error::NonConvergence { .. }) | Err(crate::Error::DegenerateOrbit { .. })
    ));
}

#[test]
fn poincare_constant_curvature_eigenvalues() {
    let model = cylinder(1.0);
    let seed = schottky::seed_loop(&Word::generator(0), &[], &model).unwrap();
    let short = shorten_loop(&model, &seed, 20, 1e-7).unwrap();
    let orbit = refine_newton(&model, &short, 1e-10).unwrap();
    let m = poincare_map(&model, &orbit, 1).unwrap();
    let (le, ls) = m.eigenvalues.unwrap();
    assert_relative_eq!(le, 1f64.exp(), epsilon = 1e-6);
    assert_relative_eq!(ls, (-1f64).exp(), epsilon = 1e-6);
}

#[test]
fn poincare_det_and_power_consistency() {
    let model = perturbed_cylinder(0.06);
    let orbit =
        search_closed_geodesic(&model, &Word::generator(0), &[], &SearchOptions::default())
            .unwrap();
    let m1 = poincare_map(&model, &orbit, 1).unwrap();
    for k in 1..=3usize {
        let mk = poincare_map(&model, &orbit, k).unwrap();
        assert!((mk.det() - 1.0).abs() < 1e-8, "det = {}", mk.det());
        let mut pw = nalgebra::Matrix2::identity();
        for _ in 0..k {
            pw = m1.matrix * pw;
        }
        let scale = pw.amax();
        assert!(
            (mk.matrix - pw).amax() / scale < 1e-6,
            "k-period map differs from the 1-period power at k = {k}"
        );
    }
}

#[test]
fn eigenvalue_band_for_perturbed_orbits() {
    for (amp, center_r) in [(0.05, 0.0), (-0.08, 0.2), (0.1, -0.25)] {
        let model = MetricModel::perturbed(
            ModelKind::Cylinder { core_length: 2.0 },
            [center_r, 2.0],
            0.8,
            amp,
        )
        .unwrap();
        let region = model.perturbation_support_box().unwrap();
        let bounds = model.curvature_bounds(&region, 64).unwrap();
        let orbit =
            search_closed_geodesic(&model, &Word::generator(0), &[], &SearchOptions::default())
                .unwrap();
        let lambda = orbit.eigenvalues.0;
        let l = orbit.length;
        assert!(
            (bounds.k2 * l).exp() <= lambda && lambda <= (bounds.k1 * l).exp(),
            "eigenvalue {lambda} outside band [{}, {}]",
            (bounds.k2 * l).exp(),
            (bounds.k1 * l).exp()
        );
        // Reciprocity.
        assert!((orbit.eigenvalues.0 * orbit.eigenvalues.1 - 1.0).abs() < 1e-8);
    }
}

#[test]
fn det_weight_constant_curvature_values() {
    let (ch, sh) = (1f64.cosh(), 1f64.sinh());
    let m = crate::geometry::Monodromy::from_matrix(nalgebra::Matrix2::new(ch, sh, sh, ch), 1.0);
    assert_relative_eq!(det_weight(&m, 1).unwrap(), 2.0 * 0.5f64.sinh(), epsilon = 1e-10);
    assert_relative_eq!(det_weight(&m, 2).unwrap(), 2.0 * 1.0f64.sinh(), epsilon = 1e-10);
    // Reference decimal values.
    assert_relative_eq!(det_weight(&m, 1).unwrap(), 1.042190610987495, epsilon = 1e-8);
    assert_relative_eq!(det_weight(&m, 2).unwrap(), 2.350402387287603, epsilon = 1e-8);
}

#[test]
fn det_weight_rejects_degenerate() {
    // Elliptic matrix: |trace| < 2.
    let m = crate::geometry::Monodromy::from_matrix(
        nalgebra::Matrix2::new(0.5f64.cos(), -(0.5f64.sin()), 0.5f64.sin(), 0.5f64.cos()),
        1.0,
    );
    assert!(matches!(
        det_weight(&m, 1),
        Err(crate::Error::DegenerateOrbit { .. })
    ));
}

#[test]
fn det_weight_matches_eigenvalue_identity() {
    // sqrt|det(I - P^k)| equals |lambda^{k/2} - lambda^{-k/2}|.
    let lambda: f64 = 3.7;
    for k in 1..=4usize {
        let direct = ((1.0 - lambda.powi(k as i32)) * (1.0 - lambda.powi(-(k as i32))))
            .abs()
            .sqrt();
        assert_relative_eq!(
            det_weight_from_expanding(lambda, k),
            direct,
            max_relative = 1e-12
        );
    }
}

#[test]
fn det_weight_band_from_curvature_bounds() {
    // e^{k2 k l}(1 - e^{-k2 k l})^2 <= |det(I - P^k)| <= e^{k1 k l}.
    let model = perturbed_cylinder(0.08);
    let region = model.perturbation_support_box().unwrap();
    let bounds = model.curvature_bounds(&region, 64).unwrap();
    let orbit =
        search_closed_geodesic(&model, &Word::generator(0), &[], &SearchOptions::default())
            .unwrap();
    let l = orbit.length;
    for k in 1..=3usize {
        let w = det_weight(&orbit.monodromy, k).unwrap();
        let det = w * w;
        let kl = k as f64 * l;
        let lower = (bounds.k2 * kl).exp() * (1.0 - (-bounds.k2 * kl).exp()).powi(2);
        let upper = (bounds.k1 * kl).exp();
        assert!(
            lower <= det && det <= upper,
            "det {det} outside band [{lower}, {upper}] at k = {k}"
        );
    }
}

#[test]
fn iterate_consistency_of_weights() {
    let gens = rank2_gens();
    let model = MetricModel::schottky(gens.clone()).unwrap();
    let orbit = search_closed_geodesic(
        &model,
        &Word::parse("ab").unwrap(),
        &gens,
        &SearchOptions::default(),
    )
    .unwrap();
    let m1 = poincare_map(&model, &orbit, 1).unwrap();
    for k in 2..=3usize {
        let mk = poincare_map(&model, &orbit, k).unwrap();
        let from_power = det_weight(&m1, k).unwrap();
        let direct = det_weight(&mk, 1).unwrap();
        assert_relative_eq!(from_power, direct, max_relative = 1e-6);
    }
}

#[test]
fn expanding_from_weight_round_trip() {
    for lambda in [1.5, 7.0, 123.0] {
        for k in 1..=3usize {
            let w = det_weight_from_expanding(lambda, k);
            let rec = expanding_from_weight(w, k).unwrap();
            assert_relative_eq!(rec, lambda, max_relative = 1e-12);
        }
    }
    assert!(expanding_from_weight(-1.0, 1).is_err());
}

#[test]
fn loop_length_is_segment_sum() {
    let model = cylinder(2.0);
    let seed = schottky::seed_loop(&Word::generator(0), &[], &model).unwrap();
    let deck = model.deck(&seed.word).unwrap();
    let mut total = 0.0;
    for i in 0..seed.vertices.len() {
        let next = if i + 1 < seed.vertices.len() {
            seed.vertices[i + 1]
        } else {
            deck.apply_point(&seed.vertices[0])
        };
        total += model.distance(&seed.vertices[i], &next).unwrap();
    }
    assert_relative_eq!(seed.length, total, epsilon = 1e-9);
}
