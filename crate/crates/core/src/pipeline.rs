//! Enumerate / analyze / validate drivers behind the CLI: orbit pipelines,
//! spectrum persistence, and JSON result records.

use crate::analysis::{self, Potential, TestFunction};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{MetricModel, ModelKind};
use crate::orbits::{self, ClosedGeodesic, SearchOptions};
use crate::schottky::{self, Word};
use crate::spectrum::{
    IterateMode, LengthSpectrum, OrientationMode, SpectrumEntry,
};
use serde::Serialize;
use serde_json::json;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct EnumerateSummary {
    pub orbits: usize,
    pub horizon: f64,
}

/// Sidecar record for one computed orbit.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct OrbitRecord {
    pub word: String,
    pub length: f64,
    pub residual: f64,
    pub eigenvalues: (f64, f64),
    /// Row-major monodromy matrix entries.
    pub monodromy: [[f64; 2]; 2],
    /// Stable (segment-product) monodromy determinant.
    pub monodromy_det: f64,
    /// (u, v, du, dv, segment time) per shooting node, cover chart.
    pub nodes: Vec<[f64; 5]>,
    /// Orbit polyline vertices in the cover chart.
    pub vertices: Vec<[f64; 2]>,
}

impl OrbitRecord {
    fn from_orbit(o: &ClosedGeodesic) -> Self {
        let m = o.monodromy.matrix;
        OrbitRecord {
            word: o.word.to_string(),
            length: o.length,
            residual: o.residual,
            eigenvalues: o.eigenvalues,
            monodromy: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
            monodromy_det: o.monodromy_det,
            nodes: o
                .nodes
                .iter()
                .map(|n| {
                    [
                        n.phase.base.coords[0],
                        n.phase.base.coords[1],
                        n.phase.velocity[0],
                        n.phase.velocity[1],
                        n.time,
                    ]
                })
                .collect(),
            vertices: o
                .loop_
                .vertices
                .iter()
                .map(|p| [p.coords[0], p.coords[1]])
                .collect(),
        }
    }
}

fn search_options(config: &RunConfig) -> SearchOptions {
    SearchOptions {
        shorten_max_iters: 60,
        shorten_tol: config.tolerance("shorten"),
        newton_tol: config.tolerance("newton"),
        integrator_tol: config.tolerance("integrator"),
    }
}

/// The words to search and the completeness horizon for the model.
///
/// Rank-one models (cylinder charts) carry a single primitive class; the
/// horizon is max_word_length periods of it. Schottky models enumerate
/// classes up to max_word_length; the horizon is the shortest exact length in
/// layer max_word_length + 1 (every missing class is at least that long).
fn enumeration_plan(config: &RunConfig, model: &MetricModel) -> Result<(Vec<Word>, Option<f64>)> {
    let oriented = config.counting_convention.orientation == OrientationMode::Oriented;
    match &model.kind {
        ModelKind::HalfPlane => Ok((Vec::new(), Some(f64::INFINITY))),
        ModelKind::Cylinder { .. } => {
            let mut words = vec![Word::generator(0)];
            if oriented {
                words.push(Word::generator(0).inverse());
            }
            Ok((words, None))
        }
        ModelKind::Perturbed { base, .. } => match base.as_ref() {
            ModelKind::HalfPlane => Ok((Vec::new(), Some(f64::INFINITY))),
            ModelKind::Cylinder { .. } => {
                let mut words = vec![Word::generator(0)];
                if oriented {
                    words.push(Word::generator(0).inverse());
                }
                Ok((words, None))
            }
            _ => Err(Error::Config("unsupported perturbation base".into())),
        },
        ModelKind::Schottky { generators } => {
            let words =
                schottky::enumerate_classes(generators, config.max_word_length, !oriented)?;
            let boundary =
                schottky::enumerate_classes_free(generators.len(), config.max_word_length + 1, true)
                    .into_iter()
                    .filter(|w| w.len() == config.max_word_length + 1);
            let mut horizon = f64::INFINITY;
            for w in boundary {
                horizon = horizon.min(schottky::exact_length(&w, generators)?);
            }
            Ok((words, Some(horizon)))
        }
    }
}

/// Run the enumerate pipeline: search every class, build the spectrum (with
/// iterates when the convention asks for them), write `spectrum.csv` and the
/// `orbits.json` sidecar under `out_dir`.
pub fn cmd_enumerate(
    config: &RunConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<EnumerateSummary> {
    let model = MetricModel::new(config.model.clone())?;
    let (words, horizon_hint) = enumeration_plan(config, &model)?;
    let opts = search_options(config);
    let generators: Vec<schottky::MobiusGenerator> = match &model.kind {
        ModelKind::Schottky { generators } => generators.clone(),
        _ => Vec::new(),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let results: Vec<(Word, Result<ClosedGeodesic>)> = pool.install(|| {
        use rayon::prelude::*;
        words
            .par_iter()
            .map(|w| {
                (
                    w.clone(),
                    orbits::search_closed_geodesic(&model, w, &generators, &opts),
                )
            })
            .collect()
    });

    let mut orbit_list: Vec<ClosedGeodesic> = Vec::with_capacity(results.len());
    let mut failures: Vec<String> = Vec::new();
    for (w, r) in results {
        match r {
            Ok(o) => orbit_list.push(o),
            Err(e) => failures.push(format!("{w}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::OrbitFailures(failures.join("; ")));
    }

    // Completeness horizon.
    let horizon = match horizon_hint {
        Some(h) => h,
        None => {
            // Rank one: max_word_length periods of the (unique) primitive.
            let l = orbit_list
                .iter()
                .map(|o| o.length)
                .fold(f64::INFINITY, f64::min);
            config.max_word_length as f64 * l
        }
    };

    let mut spec = LengthSpectrum::new(config.counting_convention, horizon);
    spec.seed = config.seed;
    spec.config_hash = config.hash();
    for o in &orbit_list {
        let weight = orbits::det_weight(&o.monodromy, 1)?;
        spec.insert(SpectrumEntry::new(
            o.word.clone(),
            o.length,
            1,
            weight,
            o.residual,
        ))?;
        if config.counting_convention.iterates == IterateMode::WithIterates {
            let lambda = o.eigenvalues.0;
            let mut k = 2usize;
            while k as f64 * o.length <= horizon {
                spec.insert(SpectrumEntry::new(
                    o.word.clone(),
                    o.length,
                    k,
                    orbits::det_weight_from_expanding(lambda, k),
                    o.residual,
                ))?;
                k += 1;
            }
        }
    }

    std::fs::create_dir_all(out_dir)?;
    spec.save(&out_dir.join("spectrum.csv"))?;
    let records: Vec<OrbitRecord> = orbit_list.iter().map(OrbitRecord::from_orbit).collect();
    std::fs::write(
        out_dir.join("orbits.json"),
        serde_json::to_string_pretty(&records)?,
    )?;

    Ok(EnumerateSummary {
        orbits: orbit_list.len(),
        horizon,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeSummary {
    pub task: String,
    pub records: usize,
}

/// Analysis tasks driven from a saved spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeTask {
    Zeta,
    Entropy,
    Pressure,
    Trace,
    Pot,
    Separation,
    Corollary,
}

impl AnalyzeTask {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "zeta" => AnalyzeTask::Zeta,
            "entropy" => AnalyzeTask::Entropy,
            "pressure" => AnalyzeTask::Pressure,
            "trace" => AnalyzeTask::Trace,
            "pot" => AnalyzeTask::Pot,
            "separation" => AnalyzeTask::Separation,
            "corollary" => AnalyzeTask::Corollary,
            _ => return Err(Error::Config(format!("unknown analyze task '{s}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyzeTask::Zeta => "zeta",
            AnalyzeTask::Entropy => "entropy",
            AnalyzeTask::Pressure => "pressure",
            AnalyzeTask::Trace => "trace",
            AnalyzeTask::Pot => "pot",
            AnalyzeTask::Separation => "separation",
            AnalyzeTask::Corollary => "corollary",
        }
    }
}

fn default_window(spec: &LengthSpectrum) -> (f64, f64) {
    (spec.max_length / 2.0, spec.max_length)
}

/// Run one analysis task; writes `analysis_<task>.json` (an array of records,
/// each carrying the config hash and seed) plus `pot_ratio.csv` for the pot
/// task. Deterministic given identical config and seed.
pub fn cmd_analyze(
    config: &RunConfig,
    spectrum_path: &Path,
    task: AnalyzeTask,
    out_dir: &Path,
) -> Result<AnalyzeSummary> {
    let spec = LengthSpectrum::load(spectrum_path)?;
    let hash = config.hash();
    let a = &config.analysis;
    let mut records: Vec<serde_json::Value> = Vec::new();
    let mut pot_csv: Option<String> = None;

    match task {
        AnalyzeTask::Zeta => {
            let s = a.s.unwrap_or([1.0, 0.0]);
            let s = num_complex::Complex64::new(s[0], s[1]);
            let k_max = a.k_max.unwrap_or(200);
            let weighted = a.weighted.unwrap_or(false);
            let z = if weighted {
                analysis::weighted_zeta(&spec, s, k_max)?
            } else {
                match a.truncation {
                    Some(t) => analysis::zeta_truncated(&spec, s, k_max, t)?,
                    None => analysis::zeta(&spec, s, k_max)?,
                }
            };
            records.push(json!({
                "task": "zeta",
                "config_hash": hash,
                "seed": config.seed,
                "weighted": weighted,
                "s": [z.s.re, z.s.im],
                "value": [z.value.re, z.value.im],
                "truncation_t": z.truncation_t,
                "k_max": z.k_max,
                "tail_bound": finite_or_null(z.tail_bound),
                "convergent": z.convergent,
            }));
        }
        AnalyzeTask::Entropy => {
            let window = a.window.unwrap_or_else(|| default_window(&spec));
            let est = analysis::estimate_entropy(&spec, window)?;
            records.push(json!({
                "task": "entropy",
                "config_hash": hash,
                "seed": config.seed,
                "h": est.h,
                "stderr": est.stderr,
                "window": est.window,
                "convention": est.convention.to_string(),
            }));
        }
        AnalyzeTask::Pressure => {
            let window = a.window.unwrap_or_else(|| default_window(&spec));
            let potential = a.potential.unwrap_or(Potential::Zero);
            let est = analysis::estimate_pressure(&spec, potential, window)?;
            records.push(json!({
                "task": "pressure",
                "config_hash": hash,
                "seed": config.seed,
                "p": est.p,
                "stderr": est.stderr,
                "potential": est.potential,
                "window": est.window,
                "epsilon": est.epsilon,
            }));
        }
        AnalyzeTask::Trace => {
            let center = a.bump_center.unwrap_or(2.0);
            let width = a.bump_width.unwrap_or(1.0);
            let phi = TestFunction::bump(center, width)?;
            let value = analysis::dynamical_trace(&spec, &phi)?;
            records.push(json!({
                "task": "trace",
                "config_hash": hash,
                "seed": config.seed,
                "bump_center": center,
                "bump_width": width,
                "support": phi.support(),
                "value": value,
            }));
        }
        AnalyzeTask::Pot => {
            let h = match a.pot_h {
                Some(h) => h,
                None => analysis::estimate_entropy(&spec, default_window(&spec))?.h,
            };
            let t_values: Vec<f64> = a.pot_t_values.clone().unwrap_or_else(|| {
                let (lo, hi) = default_window(&spec);
                (0..8).map(|i| lo + (hi - lo) * i as f64 / 7.0).collect()
            });
            let report = analysis::pot_ratio(&spec, h, &t_values)?;
            let mut csv = String::from("# geodlab pot ratio v1\n");
            csv.push_str(&format!("# seed={}\n# config_hash={}\n", config.seed, hash));
            csv.push_str("T,ratio\n");
            for (t, r) in &report.rows {
                csv.push_str(&format!(
                    "{},{}\n",
                    crate::spectrum::fmt_f64(*t),
                    crate::spectrum::fmt_f64(*r)
                ));
            }
            pot_csv = Some(csv);
            records.push(json!({
                "task": "pot",
                "config_hash": hash,
                "seed": config.seed,
                "h": report.h,
                "vacuous": report.vacuous,
                "rows": report.rows,
            }));
        }
        AnalyzeTask::Separation => {
            let model = MetricModel::new(config.model.clone())?;
            let t = a
                .separation_t
                .unwrap_or_else(|| (spec.max_length * 0.8).max(1.0));
            let delta = a.separation_delta.unwrap_or(0.5);
            let b = a.separation_b.unwrap_or(2.5);
            let samples = a.separation_samples.unwrap_or(64);
            let orbit_list = reconstruct_orbits(&spec, &model, spectrum_path)?;
            let report = analysis::separation_check(&orbit_list, &model, t, delta, b, samples)?;
            records.push(json!({
                "task": "separation",
                "config_hash": hash,
                "seed": config.seed,
                "report": report,
            }));
        }
        AnalyzeTask::Corollary => {
            let h = match a.corollary_h {
                Some(h) => h,
                None => analysis::estimate_entropy(&spec, default_window(&spec))?.h,
            };
            let k1 = a.corollary_k1.unwrap_or(1.0);
            let k2 = a.corollary_k2.unwrap_or(1.0);
            let n = a.corollary_n.unwrap_or(1);
            let report = analysis::corollary_arithmetic(h, k1, k2, n);
            records.push(json!({
                "task": "corollary",
                "config_hash": hash,
                "seed": config.seed,
                "report": report,
            }));
        }
    }

    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("analysis_{}.json", task.name()));
    std::fs::write(&path, serde_json::to_string_pretty(&records)?)?;
    if let Some(csv) = pot_csv {
        std::fs::write(out_dir.join("pot_ratio.csv"), csv)?;
    }
    Ok(AnalyzeSummary {
        task: task.name().to_string(),
        records: records.len(),
    })
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Orbit data for separation: exact axis reconstruction on Schottky models,
/// sidecar nodes elsewhere.
fn reconstruct_orbits(
    spec: &LengthSpectrum,
    model: &MetricModel,
    spectrum_path: &Path,
) -> Result<Vec<ClosedGeodesic>> {
    match &model.kind {
        ModelKind::Schottky { generators } => {
            let mut out = Vec::new();
            for e in spec.entries().iter().filter(|e| e.k == 1) {
                out.push(schottky::exact_closed_geodesic(&e.word, generators, model)?);
            }
            Ok(out)
        }
        _ => {
            let sidecar = spectrum_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join("orbits.json");
            if !sidecar.exists() {
                return Err(Error::Data(format!(
                    "separation on this model needs the orbit sidecar at {}",
                    sidecar.display()
                )));
            }
            let records: Vec<OrbitRecord> =
                serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?;
            let mut out = Vec::new();
            for r in records {
                out.push(orbit_from_record(model, &r)?);
            }
            Ok(out)
        }
    }
}

fn orbit_from_record(model: &MetricModel, r: &OrbitRecord) -> Result<ClosedGeodesic> {
    use crate::geometry::{ChartPoint, Monodromy, PhasePoint};
    use nalgebra::{Matrix2, Vector2};
    let chart = model.chart();
    let word = Word::parse(&r.word)?;
    let vertices: Vec<ChartPoint> = r
        .vertices
        .iter()
        .map(|v| ChartPoint {
            coords: Vector2::new(v[0], v[1]),
            chart,
        })
        .collect();
    let loop_ = crate::orbits::Loop::new(model, vertices, word.clone())?;
    let nodes: Vec<crate::orbits::ShootingNode> = r
        .nodes
        .iter()
        .map(|n| crate::orbits::ShootingNode {
            phase: PhasePoint {
                base: ChartPoint {
                    coords: Vector2::new(n[0], n[1]),
                    chart,
                },
                velocity: Vector2::new(n[2], n[3]),
            },
            time: n[4],
        })
        .collect();
    let m = Matrix2::new(
        r.monodromy[0][0],
        r.monodromy[0][1],
        r.monodromy[1][0],
        r.monodromy[1][1],
    );
    Ok(ClosedGeodesic {
        word,
        length: r.length,
        loop_,
        nodes,
        monodromy: Monodromy::from_matrix(m, r.length),
        monodromy_det: r.monodromy_det,
        eigenvalues: r.eigenvalues,
        residual: r.residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub valid: bool,
    pub chart: String,
    pub injectivity_radius_lower_bound: f64,
    pub curvature_bounds: Option<(f64, f64)>,
}

/// Construct and validate the configured model; perturbed models also get a
/// curvature-bound sweep over the bump support.
pub fn cmd_validate_model(config: &RunConfig) -> Result<ValidationSummary> {
    let model = MetricModel::new(config.model.clone())?;
    let bounds = match model.perturbation_support_box() {
        Some(region) => {
            let b = model.curvature_bounds(&region, 64)?;
            Some((b.k1, b.k2))
        }
        None => None,
    };
    Ok(ValidationSummary {
        valid: true,
        chart: format!("{:?}", model.chart()),
        injectivity_radius_lower_bound: model.injectivity_radius_lower_bound,
        curvature_bounds: bounds,
    })
}
