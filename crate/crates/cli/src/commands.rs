//! The `check`, `decompose`, `gen` and `roundtrip` commands.
//!
//! Each command returns an [`Outcome`]: the report plus the process exit
//! code. Exit codes: 0 success, 1 I/O or input error, 2 the property or
//! recovery fails, 3 the map is not invertible.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bisep_core::funcalg::{self, BigSuperoperator};
use bisep_core::harness::{self, InstanceBundle};
use bisep_core::linalg::Matrix;
use bisep_core::separating::{self, Direction, Status, Verdict};
use bisep_core::structure;
use bisep_core::superop::compose;
use bisep_core::{Field, FieldConfig, Superoperator};
use rayon::prelude::*;

use crate::instance::{instance_to_json, parse_instance, read_instance, Instance, InstanceMap};
use crate::json::{json_to_matrix, PerPoint, F17};
use crate::report::{CounterexampleOut, Report, Summary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_PROPERTY: i32 = 2;
pub const EXIT_NOT_INVERTIBLE: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub exit: i32,
}

fn input_error(command: &str, cfg: &FieldConfig, message: impl Into<String>) -> Outcome {
    let mut report = Report::new(command, "error", cfg);
    report.error = Some(message.into());
    Outcome {
        report,
        exit: EXIT_INPUT,
    }
}

fn finish(mut outcome: Outcome, started: Instant) -> Outcome {
    outcome.report.elapsed_ms = F17(started.elapsed().as_secs_f64() * 1e3);
    outcome
}

fn config(tol: Option<f64>) -> Result<FieldConfig, String> {
    let cfg = FieldConfig::default();
    match tol {
        Some(t) => cfg.with_tol_rel(t).map_err(|e| format!("--tol: {e}")),
        None => Ok(cfg),
    }
}

fn status_exit(status: Status) -> i32 {
    match status {
        Status::Biseparating | Status::Separating => EXIT_OK,
        Status::NotSeparating => EXIT_PROPERTY,
        Status::NotInvertible => EXIT_NOT_INVERTIBLE,
    }
}

fn sampled_biseparating(t: &Superoperator, trials: usize, seed: u64, cfg: &FieldConfig) -> Verdict {
    if t.n_in() != t.n_out() {
        return Verdict::not_invertible();
    }
    let Ok((inv, _)) = t.inverse() else {
        return Verdict::not_invertible();
    };
    for (map, direction) in [(t, Direction::Forward), (&inv, Direction::Inverse)] {
        if let Some(cx) = separating::is_separating_sampled(map, trials, seed, cfg).counterexample {
            return Verdict::fail(cx, Some(direction));
        }
    }
    Verdict::pass(Status::Biseparating)
}

/// Biseparating check on a parsed instance.
pub fn check_instance(inst: &Instance, cfg: &FieldConfig, sampled: Option<usize>) -> Outcome {
    check_instance_seeded(inst, cfg, sampled, 0)
}

fn check_instance_seeded(inst: &Instance, cfg: &FieldConfig, sampled: Option<usize>, seed: u64) -> Outcome {
    let cfg = cfg.with_field(inst.field);
    let mut report = Report::new("check", "", &cfg);
    report.kind = Some(inst.kind().to_string());
    let exit = match &inst.map {
        InstanceMap::Superop(t) => {
            let v = match sampled {
                Some(trials) => {
                    report.seed = Some(seed);
                    sampled_biseparating(t, trials, seed, &cfg)
                }
                None => separating::is_biseparating(t, &cfg),
            };
            report.status = v.status.as_str().to_string();
            report.counterexample = v
                .counterexample
                .as_ref()
                .map(|cx| CounterexampleOut::from_matrix_pair(cx, v.direction, inst.field));
            status_exit(v.status)
        }
        InstanceMap::Big(t) => {
            if sampled.is_some() {
                return input_error("check", &cfg, "--sampled applies to superop files only");
            }
            let v = funcalg::is_biseparating_fn(t, &cfg);
            let strict = funcalg::is_strictly_separating(t, &cfg);
            report.strictly_separating = Some(strict.is_pass());
            report.status = v.status.as_str().to_string();
            report.counterexample = v
                .counterexample
                .as_ref()
                .map(|cx| CounterexampleOut::from_functions(cx, v.direction, inst.field));
            match (v.status, strict.counterexample) {
                (Status::Biseparating, Some(cx)) => {
                    report.status = "not_strictly_separating".to_string();
                    report.counterexample = Some(CounterexampleOut::from_functions(&cx, None, inst.field));
                    EXIT_PROPERTY
                }
                (status, _) => status_exit(status),
            }
        }
    };
    Outcome { report, exit }
}

pub fn cmd_check(path: &Path, tol: Option<f64>, sampled: Option<usize>, seed: u64) -> Outcome {
    let started = Instant::now();
    let cfg = match config(tol) {
        Ok(c) => c,
        Err(e) => return input_error("check", &FieldConfig::default(), e),
    };
    if sampled == Some(0) {
        return input_error("check", &cfg, "--sampled must be at least 1");
    }
    let outcome = match read_instance(path, &cfg) {
        Ok(inst) => check_instance_seeded(&inst, &cfg, sampled, seed),
        Err(e) => input_error("check", &cfg, e.to_string()),
    };
    finish(outcome, started)
}

/// Structure recovery on a parsed instance.
pub fn decompose_instance(inst: &Instance, cfg: &FieldConfig) -> Outcome {
    let cfg = cfg.with_field(inst.field);
    let mut report = Report::new("decompose", "decomposed", &cfg);
    report.kind = Some(inst.kind().to_string());
    let failure = |mut report: Report, step: &str, message: String| {
        report.status = "not_standard_form".to_string();
        report.failed_step = Some(step.to_string());
        report.error = Some(message);
        Outcome {
            report,
            exit: EXIT_PROPERTY,
        }
    };
    match &inst.map {
        InstanceMap::Superop(t) => match structure::recover_conjugation(t, &cfg) {
            Ok(form) => {
                let residual = structure::verify_form(t, &form, &cfg).unwrap_or(f64::NAN);
                report = report.with_conjugation(&form, inst.field);
                report.residual = Some(F17(residual));
                Outcome { report, exit: EXIT_OK }
            }
            Err(e) => failure(report, e.step().as_str(), e.to_string()),
        },
        InstanceMap::Big(t) => match funcalg::recover_pointwise(t, &cfg) {
            Ok(form) => {
                let residual = funcalg::verify_pointwise(t, &form, &cfg).unwrap_or(f64::NAN);
                report = report.with_pointwise(&form, inst.field);
                report.residual = Some(F17(residual));
                Outcome { report, exit: EXIT_OK }
            }
            Err(e) => failure(report, e.step(), e.to_string()),
        },
    }
}

pub fn cmd_decompose(path: &Path, tol: Option<f64>) -> Outcome {
    let started = Instant::now();
    let cfg = match config(tol) {
        Ok(c) => c,
        Err(e) => return input_error("decompose", &FieldConfig::default(), e),
    };
    let outcome = match read_instance(path, &cfg) {
        Ok(inst) => decompose_instance(&inst, &cfg),
        Err(e) => input_error("decompose", &cfg, e.to_string()),
    };
    finish(outcome, started)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Superop,
    BigSuperop,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Negative {
    /// Transpose (block files: transpose inside the first output block).
    Transpose,
    /// One output point averages two input points.
    Mixing,
    /// Seeded unit-norm perturbation of size `eps`.
    Perturb(f64),
}

impl Negative {
    pub fn parse(s: &str) -> Result<Negative, String> {
        match s {
            "transpose" => Ok(Negative::Transpose),
            "mixing" => Ok(Negative::Mixing),
            _ => {
                let eps = s
                    .strip_prefix("perturb:")
                    .ok_or_else(|| format!("expected transpose, mixing or perturb:<eps>, found {s:?}"))?;
                match eps.parse::<f64>() {
                    Ok(e) if e.is_finite() && e >= 0.0 => Ok(Negative::Perturb(e)),
                    _ => Err(format!("perturbation size must be a finite number >= 0, found {eps:?}")),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenOptions {
    pub kind: GenKind,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub field: Field,
    pub alpha_range: (f64, f64),
    pub cond_cap: f64,
    pub negative: Option<Negative>,
    pub out: PathBuf,
}

/// Sibling path holding the ground truth: `inst.json` → `inst.truth.json`.
pub fn truth_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.truth.json"))
}

/// Writes through a temporary sibling and a rename.
fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

/// Instance and optional ground-truth report for generator options.
pub fn generate(opts: &GenOptions) -> Result<(Instance, Option<Report>), String> {
    let cfg = FieldConfig::default().with_field(opts.field);
    let err = |e: harness::HarnessError| e.to_string();
    if opts.n == 0 || opts.k == 0 {
        return Err("n and k must be at least 1".into());
    }
    let truth_report = |bundle: &InstanceBundle| {
        let mut r = Report::new("gen", "ground_truth", &cfg);
        r = match (bundle.conjugation(), bundle.pointwise()) {
            (Some(f), _) => r.with_conjugation(f, opts.field),
            (_, Some(f)) => r.with_pointwise(f, opts.field),
            _ => r,
        };
        r.kind = Some(if bundle.superop().is_some() { "superop" } else { "big_superop" }.to_string());
        r.residual = bundle.ground_truth_residual().map(F17);
        r.seed = Some(bundle.seed);
        r
    };
    let (map, truth) = match opts.kind {
        GenKind::Superop => {
            let bundle = harness::gen_conjugation(opts.n, opts.seed, opts.alpha_range, opts.cond_cap, &cfg).map_err(err)?;
            let t = bundle.superop().expect("superop").clone();
            match opts.negative {
                None | Some(Negative::Perturb(0.0)) => (InstanceMap::Superop(t), Some(truth_report(&bundle))),
                Some(Negative::Perturb(eps)) => (InstanceMap::Superop(harness::perturb(&t, eps, opts.seed)), None),
                Some(Negative::Transpose) => (InstanceMap::Superop(harness::gen_transpose(opts.n, &cfg)), None),
                Some(Negative::Mixing) => return Err("--negative mixing needs kind big_superop".into()),
            }
        }
        GenKind::BigSuperop => {
            let bundle =
                harness::gen_pointwise(opts.k, opts.n, opts.seed, opts.alpha_range, opts.cond_cap, &cfg).map_err(err)?;
            let t = bundle.big().expect("block map").clone();
            match opts.negative {
                None | Some(Negative::Perturb(0.0)) => (InstanceMap::Big(t), Some(truth_report(&bundle))),
                Some(Negative::Perturb(eps)) => (InstanceMap::Big(harness::perturb_big(&t, eps, opts.seed)), None),
                Some(Negative::Mixing) => (
                    InstanceMap::Big(harness::gen_point_mixing(opts.k, opts.n, opts.seed, &cfg).map_err(err)?),
                    None,
                ),
                Some(Negative::Transpose) => (InstanceMap::Big(transpose_first_block(t, &cfg)?), None),
            }
        }
    };
    Ok((
        Instance {
            field: opts.field,
            map,
        },
        truth,
    ))
}

fn transpose_first_block(mut t: BigSuperoperator, cfg: &FieldConfig) -> Result<BigSuperoperator, String> {
    let x1 = (0..t.x_in().len())
        .find(|&x1| t.block(0, x1).mat().iter().any(|z| z.norm() != 0.0))
        .unwrap_or(0);
    let block = compose(&harness::gen_transpose(t.m(), cfg), t.block(0, x1)).map_err(|e| e.to_string())?;
    t.set_block(0, x1, block).map_err(|e| e.to_string())?;
    Ok(t)
}

pub fn cmd_gen(opts: &GenOptions) -> Outcome {
    let started = Instant::now();
    let cfg = FieldConfig::default().with_field(opts.field);
    let (inst, truth) = match generate(opts) {
        Ok(x) => x,
        Err(e) => return finish(input_error("gen", &cfg, e), started),
    };
    let mut files = BTreeMap::new();
    if let Err(e) = write_atomic(&opts.out, &instance_to_json(&inst)) {
        return finish(input_error("gen", &cfg, format!("cannot write {}: {e}", opts.out.display())), started);
    }
    files.insert("instance".to_string(), opts.out.display().to_string());
    if let Some(truth) = truth {
        let path = truth_path(&opts.out);
        if let Err(e) = write_atomic(&path, &truth.to_json()) {
            return finish(input_error("gen", &cfg, format!("cannot write {}: {e}", path.display())), started);
        }
        files.insert("truth".to_string(), path.display().to_string());
    }
    let mut report = Report::new("gen", "generated", &cfg);
    report.kind = Some(inst.kind().to_string());
    report.seed = Some(opts.seed);
    report.files = Some(files);
    finish(Outcome { report, exit: EXIT_OK }, started)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripOptions {
    pub max_n: usize,
    pub max_k: usize,
    pub seeds: u64,
    pub tol: f64,
    pub field: Field,
}

impl Default for RoundtripOptions {
    fn default() -> Self {
        RoundtripOptions {
            max_n: 6,
            max_k: 4,
            seeds: 25,
            tol: 1e-8,
            field: Field::Real,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Case {
    Conjugation { n: usize, seed: u64 },
    Pointwise { k: usize, n: usize, seed: u64 },
    Transpose { n: usize },
    Mixing { k: usize, n: usize, seed: u64 },
}

#[derive(Debug, Default, Clone)]
struct CaseResult {
    ok: bool,
    residual: f64,
    alpha_error: f64,
    s_error: f64,
    note: String,
}

fn cases(opts: &RoundtripOptions) -> Vec<Case> {
    let mut out = Vec::new();
    for n in 1..=opts.max_n {
        out.extend((0..opts.seeds).map(|seed| Case::Conjugation { n, seed }));
    }
    for k in 1..=opts.max_k {
        for n in 1..=opts.max_n {
            out.extend((0..opts.seeds).map(|seed| Case::Pointwise { k, n, seed }));
        }
    }
    if opts.seeds > 0 {
        out.extend((2..=opts.max_n).map(|n| Case::Transpose { n }));
        for k in 2..=opts.max_k {
            out.extend((0..opts.seeds).map(|seed| Case::Mixing { k, n: 2.min(opts.max_n), seed }));
        }
    }
    out
}

fn per_point<T: Clone>(p: &PerPoint<T>) -> Vec<(String, T)> {
    match p {
        PerPoint::Single(v) => vec![(String::new(), v.clone())],
        PerPoint::Points(m) => m.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
    }
}

/// Largest relative α error and Frobenius `S` error between two reports.
fn compare_forms(got: &Report, truth: &Report) -> Option<(f64, f64)> {
    let (ga, ta) = (per_point(got.alpha.as_ref()?), per_point(truth.alpha.as_ref()?));
    let (gs, ts) = (per_point(got.s.as_ref()?), per_point(truth.s.as_ref()?));
    if ga.len() != ta.len() || gs.len() != ts.len() || got.phi != truth.phi {
        return None;
    }
    let mut alpha_err: f64 = 0.0;
    for ((gl, g), (tl, t)) in ga.iter().zip(&ta) {
        if gl != tl {
            return None;
        }
        let (g, t) = (g.to_scalar(), t.to_scalar());
        alpha_err = alpha_err.max((g - t).norm() / t.norm());
    }
    let mut s_err: f64 = 0.0;
    for ((gl, g), (tl, t)) in gs.iter().zip(&ts) {
        let (g, t): (Matrix, Matrix) = (json_to_matrix(g)?, json_to_matrix(t)?);
        if gl != tl || g.shape() != t.shape() {
            return None;
        }
        s_err = s_err.max((g - t).norm());
    }
    Some((alpha_err, s_err))
}

/// Serializes the instance and its ground truth to text and parses them
/// back, so cases exercise the file formats end to end.
fn through_text(inst: &Instance, truth: Option<&Report>, cfg: &FieldConfig) -> Result<(Instance, Option<Report>), String> {
    let parsed = parse_instance(&instance_to_json(inst), cfg).map_err(|e| e.to_string())?;
    let truth = match truth {
        Some(t) => Some(serde_json::from_str::<Report>(&t.to_json()).map_err(|e| e.to_string())?),
        None => None,
    };
    Ok((parsed, truth))
}

fn run_case(case: Case, opts: &RoundtripOptions) -> CaseResult {
    let cfg = FieldConfig::default().with_field(opts.field);
    let gen = |kind, n, k, seed, negative| GenOptions {
        kind,
        n,
        k,
        seed,
        field: opts.field,
        alpha_range: harness::DEFAULT_ALPHA_RANGE,
        cond_cap: harness::DEFAULT_COND_CAP,
        negative,
        out: PathBuf::new(),
    };
    let (gen_opts, expect_exit) = match case {
        Case::Conjugation { n, seed } => (gen(GenKind::Superop, n, 1, seed, None), EXIT_OK),
        Case::Pointwise { k, n, seed } => (gen(GenKind::BigSuperop, n, k, seed, None), EXIT_OK),
        Case::Transpose { n } => (gen(GenKind::Superop, n, 1, 0, Some(Negative::Transpose)), EXIT_PROPERTY),
        Case::Mixing { k, n, seed } => (gen(GenKind::BigSuperop, n, k, seed, Some(Negative::Mixing)), EXIT_PROPERTY),
    };
    let fail = |note: String| CaseResult {
        ok: false,
        note: format!("{case:?}: {note}"),
        ..CaseResult::default()
    };
    let (inst, truth) = match generate(&gen_opts).and_then(|(i, t)| through_text(&i, t.as_ref(), &cfg)) {
        Ok(x) => x,
        Err(e) => return fail(e),
    };
    let check = check_instance(&inst, &cfg, None);
    if check.exit != expect_exit {
        return fail(format!("check exited {} (status {}), expected {expect_exit}", check.exit, check.report.status));
    }
    if expect_exit != EXIT_OK {
        return CaseResult {
            ok: true,
            ..CaseResult::default()
        };
    }
    let dec = decompose_instance(&inst, &cfg);
    if dec.exit != EXIT_OK {
        return fail(format!("decompose failed: {}", dec.report.error.unwrap_or_default()));
    }
    let residual = dec.report.residual.map_or(f64::NAN, |r| r.0);
    let Some((alpha_error, s_error)) = truth.as_ref().and_then(|t| compare_forms(&dec.report, t)) else {
        return fail("recovered form does not match the ground-truth layout".into());
    };
    let ok = residual <= opts.tol && alpha_error <= opts.tol && s_error <= opts.tol;
    CaseResult {
        ok,
        residual,
        alpha_error,
        s_error,
        note: if ok {
            String::new()
        } else {
            format!("{case:?}: residual {residual:e}, alpha error {alpha_error:e}, S error {s_error:e}")
        },
    }
}

pub fn cmd_roundtrip(opts: &RoundtripOptions) -> Outcome {
    let started = Instant::now();
    let cfg = FieldConfig::default().with_field(opts.field);
    if opts.max_n == 0 || opts.max_k == 0 {
        return finish(input_error("roundtrip", &cfg, "--max-n and --max-k must be at least 1"), started);
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return finish(input_error("roundtrip", &cfg, "--tol must be a positive number"), started);
    }
    let all = cases(opts);
    let results: Vec<CaseResult> = all.par_iter().map(|&c| run_case(c, opts)).collect();
    let passed = results.iter().filter(|r| r.ok).count();
    let worst = |f: fn(&CaseResult) -> f64| results.iter().map(f).fold(0.0, f64::max);
    let summary = Summary {
        cases: results.len(),
        passed,
        failed: results.len() - passed,
        zero_cases: results.is_empty(),
        worst_residual: F17(worst(|r| if r.residual.is_nan() { f64::INFINITY } else { r.residual })),
        worst_alpha_error: F17(worst(|r| r.alpha_error)),
        worst_s_error: F17(worst(|r| r.s_error)),
        failures: results.iter().filter(|r| !r.ok).take(20).map(|r| r.note.clone()).collect(),
    };
    let ok = summary.failed == 0;
    let mut report = Report::new("roundtrip", if ok { "pass" } else { "fail" }, &cfg);
    report.summary = Some(summary);
    let exit = if ok { EXIT_OK } else { EXIT_PROPERTY };
    finish(Outcome { report, exit }, started)
}
