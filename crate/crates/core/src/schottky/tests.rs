use super::*;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rank2() -> Vec<MobiusGenerator> {
    vec![
        MobiusGenerator::axis_standard(1.0, 0.0),
        MobiusGenerator::axis_standard(1.0, 5.0),
    ]
}

fn diag_generator(l: f64) -> MobiusGenerator {
    MobiusGenerator::new(Matrix2::new((l / 2.0).exp(), 0.0, 0.0, (-l / 2.0).exp())).unwrap()
}

#[test]
fn word_reduction_and_display() {
    let w = Word::new(vec![1, -1, 2, 1, -1, -2, 2]);
    assert_eq!(w.to_string(), "b");
    let w = Word::new(vec![1, 2, -1]);
    assert_eq!(w.to_string(), "abA");
    assert_eq!(w.cyclic_reduce().to_string(), "b");
    assert_eq!(Word::parse("abA").unwrap(), w);
    assert_eq!(w.inverse().to_string(), "aBA");
}

#[test]
fn canonical_forms_identify_rotations_and_inversion() {
    let w1 = Word::parse("abb").unwrap();
    let w2 = Word::parse("bba").unwrap();
    assert_eq!(w1.canonical(false), w2.canonical(false));
    let inv = w1.inverse();
    assert_ne!(w1.canonical(false), inv.canonical(false));
    assert_eq!(w1.canonical(true), inv.canonical(true));
}

#[test]
fn primitivity() {
    assert!(Word::parse("ab").unwrap().is_primitive());
    assert!(!Word::parse("abab").unwrap().is_primitive());
    assert!(!Word::parse("aaa").unwrap().is_primitive());
    assert!(Word::parse("aab").unwrap().is_primitive());
    assert!(!Word::empty().is_primitive());
}

#[test]
fn enumerate_rank1_excludes_iterates() {
    let gens = vec![diag_generator(2.0)];
    let classes = enumerate_classes(&gens, 3, true).unwrap();
    assert_eq!(classes.len(), 1);
    assert_eq!(classes[0].to_string(), "a");
}

#[test]
fn enumerate_rank2_length1_unoriented() {
    let classes = enumerate_classes(&rank2(), 1, true).unwrap();
    let names: Vec<String> = classes.iter().map(|w| w.to_string()).collect();
    assert_eq!(names, vec!["a", "b"]);
}

#[test]
fn enumerate_rank2_length2_unoriented_brute_force() {
    let classes = enumerate_classes(&rank2(), 2, true).unwrap();
    let names: Vec<String> = classes.iter().map(|w| w.to_string()).collect();
    assert_eq!(names, vec!["a", "b", "ab", "aB"]);
}

/// Brute-force conjugacy-class counter, independently re-deriving the
/// rotation/inversion closure from raw letter strings.
fn brute_force_oriented_count(rank: usize, m: usize) -> usize {
    let letters: Vec<i32> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
    let mut words: Vec<Vec<i32>> = vec![vec![]];
    for _ in 0..m {
        let mut next = Vec::new();
        for w in &words {
            for &l in &letters {
                if w.last().is_some_and(|&p| p == -l) {
                    continue;
                }
                let mut w2 = w.clone();
                w2.push(l);
                next.push(w2);
            }
        }
        words = next;
    }
    let mut classes = std::collections::BTreeSet::new();
    'word: for w in words {
        if w.len() != m || (m > 1 && w[0] == -w[m - 1]) {
            continue;
        }
        // Primitive check by direct repetition comparison.
        for d in 1..m {
            if m % d == 0 && (0..m).all(|i| w[i] == w[i % d]) {
                continue 'word;
            }
        }
        let mut best: Option<Vec<i32>> = None;
        for k in 0..m {
            let rot: Vec<i32> = (0..m).map(|i| w[(i + k) % m]).collect();
            let key: Vec<i64> = rot
                .iter()
                .map(|&l| 2 * (l.abs() as i64 - 1) + i64::from(l < 0))
                .collect();
            let best_key: Option<Vec<i64>> = best.as_ref().map(|b| {
                b.iter()
                    .map(|&l| 2 * (l.abs() as i64 - 1) + i64::from(l < 0))
                    .collect()
            });
            if best_key.map_or(true, |bk| key < bk) {
                best = Some(rot);
            }
        }
        classes.insert(best.unwrap());
    }
    classes.len()
}

#[test]
fn oriented_class_counts_match_brute_force() {
    for m in 1..=8 {
        let ours = enumerate_classes_free(2, m, false)
            .into_iter()
            .filter(|w| w.len() == m)
            .count();
        let brute = brute_force_oriented_count(2, m);
        assert_eq!(ours, brute, "class count mismatch at length {m}");
    }
}

#[test]
fn exact_length_diagonal() {
    let gens = vec![diag_generator(2.0)];
    let w = Word::generator(0);
    assert_relative_eq!(exact_length(&w, &gens).unwrap(), 2.0, epsilon = 1e-12);
}

#[test]
fn exact_length_inversion_invariance() {
    let gens = rank2();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let len = rng.random_range(1..=6);
        let mut letters = Vec::new();
        for _ in 0..len {
            letters.push(*[1i32, -1, 2, -2].get(rng.random_range(0..4)).unwrap());
        }
        let w = Word::new(letters);
        if w.is_empty() {
            continue;
        }
        let l = exact_length(&w, &gens);
        let li = exact_length(&w.inverse(), &gens);
        match (l, li) {
            (Ok(a), Ok(b)) => assert_relative_eq!(a, b, epsilon = 1e-12),
            (Err(_), Err(_)) => {}
            _ => panic!("inversion changed hyperbolicity"),
        }
    }
}

#[test]
fn exact_length_conjugacy_invariance() {
    let gens = rank2();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let w = Word::parse("ab").unwrap();
    let l = exact_length(&w, &gens).unwrap();
    for _ in 0..20 {
        let len = rng.random_range(1..=3);
        let mut letters = Vec::new();
        for _ in 0..len {
            letters.push(*[1i32, -1, 2, -2].get(rng.random_range(0..4)).unwrap());
        }
        let u = Word::new(letters);
        let conj = u.concat(&w).concat(&u.inverse());
        assert_relative_eq!(
            exact_length(&conj, &gens).unwrap(),
            l,
            epsilon = 1e-12,
            max_relative = 1e-12
        );
    }
}

#[test]
fn exact_length_iterate_law() {
    let gens = rank2();
    for name in ["a", "ab", "aB", "aab"] {
        let w = Word::parse(name).unwrap();
        let l = exact_length(&w, &gens).unwrap();
        for k in 2..=5 {
            let lk = exact_length(&w.power(k), &gens).unwrap();
            assert_relative_eq!(lk, k as f64 * l, epsilon = 1e-10, max_relative = 1e-10);
        }
    }
}

/// Iterated Mobius-action oracle: the translation length is the limit of
/// d(z, M^n z) - d(z, M^{n-1} z), which converges exponentially fast.
#[test]
fn exact_length_matches_iterated_action_oracle() {
    let gens = rank2();
    let w = Word::parse("ab").unwrap();
    let l = exact_length(&w, &gens).unwrap();
    let m = word_matrix(&w, &gens).unwrap();
    // Apply M^n to z = i by hand and measure hyperbolic distance from i.
    let dist = |n: u32| -> f64 {
        let mut mp = Matrix2::identity();
        for _ in 0..n {
            mp *= m;
        }
        let (a, b, c, d): (f64, f64, f64, f64) = (mp[(0, 0)], mp[(0, 1)], mp[(1, 0)], mp[(1, 1)]);
        let den = c * c + d * d;
        let re = (b * d + a * c) / den;
        let im = 1.0 / den; // ad - bc = 1
        (1.0 + (re * re + (im - 1.0) * (im - 1.0)) / (2.0 * im)).acosh()
    };
    let n = 26;
    let oracle = dist(n) - dist(n - 1);
    assert_relative_eq!(l, oracle, epsilon = 1e-6);
}

#[test]
fn schottky_validation_rejects_overlapping_circles() {
    // Two generators with the same axis: isometric circles coincide.
    let gens = vec![
        MobiusGenerator::axis_standard(1.0, 0.0),
        MobiusGenerator::axis_standard(1.2, 0.0),
    ];
    assert!(matches!(
        validate_schottky(&gens),
        Err(crate::Error::SchottkyValidation(_))
    ));
    assert!(validate_schottky(&rank2()).is_ok());
}

#[test]
fn generator_validation() {
    assert!(MobiusGenerator::from_rows([[1.0, 1.0], [0.0, 1.0]]).is_err()); // parabolic
    assert!(MobiusGenerator::from_rows([[2.0, 0.0], [0.0, 2.0]]).is_err()); // det 4
    assert!(MobiusGenerator::from_rows([[2.0, 0.0], [0.0, 0.5]]).is_ok());
}

#[test]
fn seed_loop_cylinder_core() {
    let model = crate::geometry::MetricModel::cylinder(2.0).unwrap();
    let gens: Vec<MobiusGenerator> = Vec::new();
    let lp = seed_loop(&Word::generator(0), &gens, &model).unwrap();
    assert_relative_eq!(lp.length, 2.0, epsilon = 1e-9);
    assert!(lp.vertices.iter().all(|p| p.coords[0] == 0.0));
}

#[test]
fn seed_loop_empty_word_errors() {
    let model = crate::geometry::MetricModel::cylinder(2.0).unwrap();
    assert!(matches!(
        seed_loop(&Word::empty(), &[], &model),
        Err(crate::Error::ContractibleClass(_))
    ));
}

#[test]
fn seed_loop_axis_length_matches_exact_length() {
    let gens = rank2();
    let model = crate::geometry::MetricModel::schottky(gens.clone()).unwrap();
    for name in ["a", "ab", "aB", "abb"] {
        let w = Word::parse(name).unwrap();
        let lp = seed_loop(&w, &gens, &model).unwrap();
        let exact = exact_length(&w, &gens).unwrap();
        // Vertices sit on the axis at equal arclength, so the polyline length
        // is the translation length itself.
        assert_relative_eq!(lp.length, exact, epsilon = 1e-9, max_relative = 1e-9);
    }
}

#[test]
fn axis_phase_points_are_unit_and_translate() {
    let gens = rank2();
    let model = crate::geometry::MetricModel::schottky(gens.clone()).unwrap();
    let w = Word::parse("ab").unwrap();
    let samples = axis_phase_samples(&w, &gens, 16).unwrap();
    for xi in &samples {
        assert!(model.unit_speed_error(xi).unwrap() < 1e-10);
    }
    // Flowing the first sample by the translation length lands on the deck
    // image of itself.
    let l = exact_length(&w, &gens).unwrap();
    let end = model.flow_cover(&samples[0], l, 1e-12, false).unwrap();
    let deck = model.deck(&w).unwrap();
    let expect = deck.apply_phase(&samples[0]);
    assert!((end.base.coords - expect.base.coords).norm() < 1e-7);
    assert!((end.velocity - expect.velocity).norm() < 1e-7);
}
