//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p bisep-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bisep_cli::json::{json_to_matrix, JsonScalar, PerPoint};
use bisep_cli::report::Report;
use bisep_core::funcalg::{
    ai_membership, is_separating_fn, is_strictly_separating, recover_pointwise, support, verify_pointwise,
    BigSuperoperator, DiscreteSpace, MatrixFunction,
};
use bisep_core::harness::{
    brute_force_left_in_right, brute_force_separating_oracle, gen_candidate, gen_conjugation, gen_point_mixing,
    gen_pointwise, gen_transpose, perturb, perturb_big, CandidateKind, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP,
};
use bisep_core::linalg::Matrix;
use bisep_core::sampling::{random_matrix, rng_from_seed};
use bisep_core::separating::{is_biseparating, is_separating_exact, Status};
use bisep_core::structure::{recover_conjugation, verify_form};
use bisep_core::FieldConfig;

type Outcome = Result<String, String>;

fn field_for(seed: u64) -> FieldConfig {
    if seed % 2 == 0 {
        FieldConfig::real()
    } else {
        FieldConfig::complex()
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() <= limit_s {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64()))
    }
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let (mut worst_alpha, mut worst_s, mut worst_res) = (0.0f64, 0.0f64, 0.0f64);
    for n in 1..=8 {
        for seed in 0..25 {
            let cfg = field_for(seed);
            let b = gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).map_err(|e| e.to_string())?;
            let t = b.superop().unwrap();
            let truth = b.conjugation().unwrap();
            let form = recover_conjugation(t, &cfg).map_err(|e| format!("n={n} seed={seed}: {e}"))?;
            worst_alpha = worst_alpha.max((form.alpha() - truth.alpha()).norm() / truth.alpha().norm());
            worst_s = worst_s.max((form.s() - truth.s()).norm());
            worst_res = worst_res.max(verify_form(t, &form, &cfg).map_err(|e| e.to_string())?);
        }
    }
    within(started.elapsed(), 30.0)?;
    let detail = format!("200 instances; worst alpha {worst_alpha:.1e}, S {worst_s:.1e}, residual {worst_res:.1e}");
    if worst_alpha <= 1e-8 && worst_s <= 1e-8 && worst_res <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    for i in 0..200u64 {
        let n = 1 + (i as usize % 6);
        let cfg = field_for(i);
        let b = gen_conjugation(n, i, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).map_err(|e| e.to_string())?;
        if !is_separating_exact(b.superop().unwrap(), &cfg).is_pass() {
            return Err(format!("conjugation n={n} seed={i} rejected"));
        }
    }
    let cfg = FieldConfig::real();
    for n in 2..=6 {
        let t = gen_transpose(n, &cfg);
        let v = is_separating_exact(&t, &cfg);
        let cx = v.counterexample.ok_or(format!("transpose n={n} passed"))?;
        let scale = t.max_image_norm().powi(2);
        let prod = (&cx.a * &cx.b).norm();
        let img = (t.apply(&cx.a).unwrap() * t.apply(&cx.b).unwrap()).norm();
        if prod > 1e-13 * cx.a.norm() * cx.b.norm() || img <= 1e-6 * scale {
            return Err(format!("transpose n={n}: witness does not verify ({prod:e}, {img:e})"));
        }
    }
    within(started.elapsed(), 20.0)?;
    Ok("200 conjugations accepted; transpose n=2..6 rejected with verified witnesses".into())
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let mut disagreements = Vec::new();
    let mut separating = 0;
    for i in 0..200u64 {
        let n = 2 + (i as usize % 2);
        let kind = CandidateKind::ALL[(i as usize / 2) % CandidateKind::ALL.len()];
        let cfg = field_for(i / 2);
        let t = gen_candidate(kind, n, i, &cfg);
        let exact = is_separating_exact(&t, &cfg).status;
        let oracle = brute_force_separating_oracle(&t, 10_000, 0xacc3 + i, &cfg).status;
        separating += (exact == Status::Separating) as usize;
        if exact != oracle {
            disagreements.push(format!("{kind:?} n={n} seed={i}"));
        }
    }
    within(started.elapsed(), 60.0)?;
    let detail = format!("200 maps ({separating} separating), {} disagreements", disagreements.len());
    if disagreements.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", disagreements.join(", ")))
    }
}

fn criterion_4() -> Outcome {
    let mut passing = 0;
    let mut worst: f64 = 0.0;
    for i in 0..500u64 {
        let n = 1 + (i as usize % 4);
        let kind = CandidateKind::ALL[(i as usize / 4) % CandidateKind::ALL.len()];
        let cfg = field_for(i / 4);
        let t = gen_candidate(kind, n, i, &cfg);
        if is_biseparating(&t, &cfg).status != Status::Biseparating {
            continue;
        }
        passing += 1;
        let form = recover_conjugation(&t, &cfg).map_err(|e| format!("{kind:?} n={n} seed={i}: {e}"))?;
        let res = verify_form(&t, &form, &cfg).map_err(|e| e.to_string())?;
        if res > 1e-8 {
            return Err(format!("{kind:?} n={n} seed={i}: residual {res:e}"));
        }
        worst = worst.max(res);
    }
    if passing == 0 {
        return Err("no candidate passed the biseparating check".into());
    }
    Ok(format!("500 candidates, {passing} biseparating, all recovered (worst residual {worst:.1e})"))
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let mut cases = 0;
    for k in 1..=5 {
        for n in 1..=3 {
            for seed in 0..10 {
                let cfg = field_for(seed);
                let b = gen_pointwise(k, n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).map_err(|e| e.to_string())?;
                let t = b.big().unwrap();
                let truth = b.pointwise().unwrap();
                let tag = format!("k={k} n={n} seed={seed}");
                let rec = recover_pointwise(t, &cfg).map_err(|e| format!("{tag}: {e}"))?;
                if rec.phi() != truth.phi() {
                    return Err(format!("{tag}: phi {:?} vs {:?}", rec.phi(), truth.phi()));
                }
                for x in 0..k {
                    let (r, g) = (rec.form(x), truth.form(x));
                    if (r.alpha() - g.alpha()).norm() > 1e-8 * g.alpha().norm() || (r.s() - g.s()).norm() > 1e-8 {
                        return Err(format!("{tag}: point {x} mismatch"));
                    }
                    if n == 1 && (r.s() != &Matrix::identity(1, 1) || r.alpha().norm() == 0.0) {
                        return Err(format!("{tag}: scalar fibre is not a weighted composition"));
                    }
                }
                if verify_pointwise(t, &rec, &cfg).map_err(|e| e.to_string())? > 1e-8 {
                    return Err(format!("{tag}: residual too large"));
                }
                cases += 1;
            }
        }
    }
    within(started.elapsed(), 60.0)?;
    Ok(format!("{cases} instances, phi exact, alpha and S within 1e-8"))
}

/// The witness pair really has disjoint supports and overlapping images.
fn strict_witness_holds(t: &BigSuperoperator, f1: &MatrixFunction, f2: &MatrixFunction, point: &str, cfg: &FieldConfig) -> bool {
    let s1 = support(f1, cfg);
    let s2 = support(f2, cfg);
    let disjoint = s1.iter().all(|x| !s2.contains(x));
    let g1 = support(&t.apply_fn(f1).unwrap(), cfg);
    let g2 = support(&t.apply_fn(f2).unwrap(), cfg);
    disjoint && g1.iter().any(|x| x == point) && g2.iter().any(|x| x == point)
}

fn criterion_6() -> Outcome {
    let mut bridged = 0;
    let mut mixing = 0;
    for i in 0..100u64 {
        let cfg = field_for(i / 4);
        let k = 2 + (i as usize % 4);
        let n = 1 + (i as usize % 3);
        let t = match i % 4 {
            0 | 1 => gen_pointwise(k, n, i, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg)
                .map_err(|e| e.to_string())?
                .big()
                .unwrap()
                .clone(),
            2 => gen_point_mixing(k, n, i, &cfg).map_err(|e| e.to_string())?,
            _ => perturb_big(
                gen_pointwise(k, n, i, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg)
                    .map_err(|e| e.to_string())?
                    .big()
                    .unwrap(),
                1e-3,
                i,
            ),
        };
        let strict = is_strictly_separating(&t, &cfg);
        if let Ok((inv, _)) = t.inverse() {
            if is_separating_fn(&t, &cfg).is_pass() && is_separating_fn(&inv, &cfg).is_pass() {
                if !strict.is_pass() {
                    return Err(format!("instance {i}: biseparating but not strictly separating"));
                }
                bridged += 1;
            }
        }
        if i % 4 == 2 {
            let cx = strict.counterexample.ok_or(format!("mixing instance {i} passed"))?;
            if !strict_witness_holds(&t, &cx.f1, &cx.f2, &cx.point, &cfg) {
                return Err(format!("mixing instance {i}: witness does not verify"));
            }
            mixing += 1;
        }
    }
    Ok(format!("100 instances: {bridged} biseparating all strictly separating, {mixing} mixing all caught"))
}

fn criterion_7() -> Outcome {
    let cfg = FieldConfig::real();
    let space = DiscreteSpace::numbered("x", 2);
    let mut rng = rng_from_seed(0xa1);
    let mut counts = [0usize; 2];
    for i in 0..120u64 {
        // even: every value zero or invertible; odd: one singular nonzero value
        let mut values: Vec<Matrix> = (0..2).map(|_| random_matrix(&mut rng, 2, 2, cfg.field())).collect();
        if i % 3 == 0 {
            values[(i as usize / 3) % 2] = Matrix::zeros(2, 2);
        }
        if i % 2 == 1 {
            let rank_one = random_matrix(&mut rng, 2, 1, cfg.field()) * random_matrix(&mut rng, 1, 2, cfg.field());
            values[(i as usize / 2) % 2] = rank_one;
        }
        let h = MatrixFunction::new(space.clone(), values).unwrap();
        let by_definition = h
            .values()
            .iter()
            .enumerate()
            .all(|(x, hx)| brute_force_left_in_right(hx, 10_000, i * 2 + x as u64, &cfg));
        let member = ai_membership(&h, &cfg);
        if member != by_definition {
            return Err(format!("H #{i}: ai_membership {member}, definition {by_definition}"));
        }
        counts[member as usize] += 1;
    }
    if counts[0] < 50 || counts[1] < 50 {
        return Err(format!("class sizes {counts:?} below 50"));
    }
    Ok(format!("{} members, {} non-members, zero disagreements", counts[1], counts[0]))
}

fn criterion_8() -> Outcome {
    let mut flagged = 0;
    for seed in 0..100u64 {
        let n = 2 + (seed as usize % 3);
        let cfg = field_for(seed);
        let b = gen_conjugation(n, seed, DEFAULT_ALPHA_RANGE, DEFAULT_COND_CAP, &cfg).map_err(|e| e.to_string())?;
        let t = b.superop().unwrap();
        if !is_separating_exact(&perturb(t, 0.0, seed), &cfg).is_pass() {
            return Err(format!("seed {seed}: unperturbed instance flagged"));
        }
        if is_separating_exact(&perturb(t, 1e-3, seed), &cfg).status == Status::NotSeparating {
            flagged += 1;
        }
    }
    let detail = format!("{flagged}/100 perturbed flagged, 0/100 unperturbed");
    if flagged >= 95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn bisep(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bisep")).args(args).output().expect("run bisep");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn read_report(path: &Path) -> Result<Report, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn form_errors(got: &Report, truth: &Report) -> Result<(f64, f64), String> {
    let points = |a: &PerPoint<JsonScalar>| match a {
        PerPoint::Single(v) => vec![(String::new(), *v)],
        PerPoint::Points(m) => m.iter().map(|(k, v)| (k.clone(), *v)).collect(),
    };
    let mats = |s: &PerPoint<Vec<Vec<JsonScalar>>>| match s {
        PerPoint::Single(v) => vec![(String::new(), json_to_matrix(v).unwrap())],
        PerPoint::Points(m) => m.iter().map(|(k, v)| (k.clone(), json_to_matrix(v).unwrap())).collect(),
    };
    if got.phi != truth.phi {
        return Err(format!("phi {:?} vs {:?}", got.phi, truth.phi));
    }
    let ga = points(got.alpha.as_ref().ok_or("no alpha")?);
    let ta = points(truth.alpha.as_ref().ok_or("no alpha in truth")?);
    let gs = mats(got.s.as_ref().ok_or("no S")?);
    let ts = mats(truth.s.as_ref().ok_or("no S in truth")?);
    let mut worst = (0.0f64, 0.0f64);
    for ((gl, g), (tl, t)) in ga.iter().zip(&ta) {
        if gl != tl {
            return Err("alpha labels differ".into());
        }
        worst.0 = worst.0.max((g.to_scalar() - t.to_scalar()).norm() / t.to_scalar().norm());
    }
    for ((gl, g), (tl, t)) in gs.iter().zip(&ts) {
        if gl != tl {
            return Err("S labels differ".into());
        }
        worst.1 = worst.1.max((g - t).norm());
    }
    Ok(worst)
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name);

    let valid = r#"{"kind":"superop","field":"real","n_in":1,"n_out":1,"vec_convention":"column-major","matrix":[[2.0]]}"#;
    let broken = [
        (valid.replace("column-major", "row-major"), "vec_convention"),
        (valid.replace("[[2.0]]", "[[2.0],[1.0]]"), "matrix"),
        (valid.replace("\"n_out\":1,", ""), "n_out"),
        (valid.replace("\"real\"", "\"complex\""), "matrix[0][0]"),
        (valid.replace("superop", "hyperop"), "kind"),
    ];
    for (i, (text, field)) in broken.iter().enumerate() {
        let p = path(&format!("broken{i}.json"));
        std::fs::write(&p, text).unwrap();
        let (code, _, stderr) = bisep(&["check", p.to_str().unwrap()]);
        if code != 1 || !stderr.contains(&format!("`{field}`")) {
            return Err(format!("broken file {i}: exit {code}, stderr {stderr:?}"));
        }
    }
    let truncated = path("truncated.json");
    std::fs::write(&truncated, &valid[..30]).unwrap();
    if bisep(&["check", truncated.to_str().unwrap()]).0 != 1 {
        return Err("truncated file did not exit 1".into());
    }

    let mut worst = (0.0f64, 0.0f64);
    let mut runs = 0;
    let mut pipeline = |args: Vec<String>, name: &str| -> Result<(), String> {
        let out = path(name);
        let out_s = out.to_str().unwrap().to_string();
        let mut gen_args: Vec<&str> = vec!["gen"];
        gen_args.extend(args.iter().map(String::as_str));
        gen_args.push(&out_s);
        let (code, _, err) = bisep(&gen_args);
        if code != 0 {
            return Err(format!("gen {args:?} exited {code}: {err}"));
        }
        let (code, _, _) = bisep(&["check", &out_s]);
        if code != 0 {
            return Err(format!("check {args:?} exited {code}"));
        }
        let (code, stdout, _) = bisep(&["decompose", &out_s]);
        if code != 0 {
            return Err(format!("decompose {args:?} exited {code}"));
        }
        let got: Report = serde_json::from_str(&stdout).map_err(|e| e.to_string())?;
        let truth = read_report(&out.with_file_name(name.replace(".json", ".truth.json")))?;
        let (a, s) = form_errors(&got, &truth).map_err(|e| format!("{args:?}: {e}"))?;
        let residual = got.residual.map_or(f64::NAN, |r| r.0);
        if !(a <= 1e-8 && s <= 1e-8 && residual <= 1e-8) {
            return Err(format!("{args:?}: alpha {a:e}, S {s:e}, residual {residual:e}"));
        }
        worst = (worst.0.max(a), worst.1.max(s));
        runs += 1;
        Ok(())
    };
    for n in 1..=8 {
        for seed in 0..3u64 {
            let field = if seed % 2 == 0 { "real" } else { "complex" };
            let args = ["superop", "--n", &n.to_string(), "--seed", &seed.to_string(), "--field", field];
            pipeline(args.iter().map(|s| s.to_string()).collect(), &format!("c{n}_{seed}.json"))?;
        }
    }
    for k in 1..=5 {
        for n in 1..=3 {
            for seed in 0..2u64 {
                let field = if seed % 2 == 0 { "real" } else { "complex" };
                let args = [
                    "big_superop",
                    "--k",
                    &k.to_string(),
                    "--n",
                    &n.to_string(),
                    "--seed",
                    &seed.to_string(),
                    "--field",
                    field,
                ];
                pipeline(args.iter().map(|s| s.to_string()).collect(), &format!("p{k}_{n}_{seed}.json"))?;
            }
        }
    }
    Ok(format!(
        "schema errors exit 1 naming the field; {runs} file pipelines reproduce ground truth (alpha {:.1e}, S {:.1e})",
        worst.0, worst.1
    ))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 9] = [
        (1, "conjugation round-trip", criterion_1),
        (2, "separating checker soundness", criterion_2),
        (3, "exact checker vs sampling oracle", criterion_3),
        (4, "biseparating maps are standard", criterion_4),
        (5, "pointwise round-trip", criterion_5),
        (6, "algebraic implies strict separation", criterion_6),
        (7, "zero-or-invertible characterization", criterion_7),
        (8, "perturbation detection", criterion_8),
        (9, "command-line contract", criterion_9),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let started = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id} ({name}): PASS [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
