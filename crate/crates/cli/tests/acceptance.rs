//! Acceptance criteria, one line of output per criterion. Every oracle here
//! is computed independently of the library code it checks.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mvtm::corpus::{generate_lda_corpus, normalize_counts, DocLengths};
use mvtm::model::{match_topics, perplexity};
use mvtm::projection::fit_subspace_with;
use mvtm::proxops::{project_min_singular, project_simplex, prox_hinge_scalar};
use mvtm::solver::{self, frozen_basis_gamma_step, init_state};
use mvtm::{
    BasisMode, Corpus, DocMatrix64, LdaConfig, ProjectedDocs64, SolverConfig64, TopicModel64,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_secs as f64, || {
        format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn lda(k: usize, v: usize, m: usize, n: usize, alpha: f64, eta: f64, seed: u64) -> LdaConfig {
    LdaConfig {
        k,
        vocab_size: v,
        docs: m,
        doc_len: DocLengths::Constant(n),
        alpha,
        eta,
        seed,
    }
}

fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in all_permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

// ---------------------------------------------------------------- 1

/// Golden-section minimizer of `c·max(−x, 0) + ½(x − p)²` on `[lo, hi]`,
/// comparing points through the closed-form difference of the objective.
fn golden_prox(p: f64, c: f64, mut lo: f64, mut hi: f64) -> f64 {
    let diff =
        |a: f64, b: f64| c * ((-a).max(0.0) - (-b).max(0.0)) + 0.5 * (a - b) * (a + b - 2.0 * p);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    while hi - lo > 1e-13 {
        if diff(x1, x2) <= 0.0 {
            hi = x2;
            x2 = x1;
            x1 = hi - r * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + r * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Nearest simplex point by enumerating every candidate support.
fn active_set_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let tau = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        let mut feasible = true;
        for &i in &support {
            x[i] = v[i] - tau;
            feasible &= x[i] >= 0.0;
        }
        if !feasible {
            continue;
        }
        let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, x));
        }
    }
    best.expect("the full support with its own shift is always a candidate")
        .1
}

fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.min()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let mut prox_err = 0f64;
    for _ in 0..1000 {
        let p = rng.random_range(-3.0..3.0);
        let c = rng.random_range(1e-6..2.0);
        prox_err = prox_err.max((prox_hinge_scalar(p, c) - golden_prox(p, c, -6.0, 6.0)).abs());
    }
    check(prox_err < 1e-8, || {
        format!("prox_hinge off by {prox_err:e}")
    })?;

    let mut simplex_err = 0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = project_simplex(&v);
        for (a, b) in got.iter().zip(active_set_simplex(&v)) {
            simplex_err = simplex_err.max((a - b).abs());
        }
    }
    check(simplex_err < 1e-10, || {
        format!("project_simplex off by {simplex_err:e}")
    })?;

    let mut worst_floor = f64::INFINITY;
    let mut worst_fixed = 0f64;
    for _ in 0..500 {
        let x = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-2.0..2.0));
        let zeta = rng.random_range(0.05..1.5);
        let y = project_min_singular(&x, zeta).map_err(|e| e.to_string())?;
        worst_floor = worst_floor.min(min_singular_value(&y) - zeta);
        let yy = project_min_singular(&y, zeta).map_err(|e| e.to_string())?;
        worst_fixed = worst_fixed.max((&yy - &y).abs().max());
        if min_singular_value(&x) >= zeta {
            check(y == x, || "feasible input was changed".into())?;
        }
    }
    check(worst_floor >= -1e-10, || {
        format!("sigma_min below zeta by {:e}", -worst_floor)
    })?;
    check(worst_fixed < 1e-10, || {
        format!("projection not idempotent: {worst_fixed:e}")
    })?;
    within(start.elapsed(), 10)?;
    Ok(format!(
        "prox {prox_err:.1e}, simplex {simplex_err:.1e}, fixed point {worst_fixed:.1e}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut root_err, mut deriv_err, mut cons_err) = (0f64, 0f64, 0f64);
    for _ in 0..100 {
        let (m, k) = (20, 3);
        let mut random =
            |r: usize, c: usize, s: f64| DMatrix::from_fn(r, c, |_, _| rng.random_range(-s..s));
        let w = random(m, k, 1.0);
        let cfg = SolverConfig64::default();
        let projected = ProjectedDocs64::new(w.clone()).map_err(|e| e.to_string())?;
        let mut st = init_state(&projected, &cfg).map_err(|e| e.to_string())?;
        st.v1 = random(m, k, 1.0);
        st.v2 = DMatrix::identity(k, k) + random(k, k, 0.5);
        st.lambda1 = random(m, k, 0.3);
        st.lambda2 = random(k, k, 0.3);
        let step = frozen_basis_gamma_step(&st, &w, &cfg).map_err(|e| e.to_string())?;

        let rho = cfg.rho;
        for i in 0..k {
            let (d, e, f) = (step.d_hat[i], step.e_diag[i], step.f_diag[i]);
            // ρe·d² − ρf·d − 2 = 0 is the stationarity condition of the surrogate
            root_err = root_err.max((rho * e * d * d - rho * f * d - 2.0).abs());
            let surrogate = |x: f64| -2.0 * x.ln() + rho / 2.0 * (e * x * x - 2.0 * f * x);
            let h = 1e-5;
            deriv_err = deriv_err.max(((surrogate(d + h) - surrogate(d - h)) / (2.0 * h)).abs());
        }
        let ones = DVector::from_element(k, 1.0);
        cons_err = cons_err.max((&step.gamma * ones - &st.a_vec).amax());
    }
    check(root_err < 1e-10, || {
        format!("quadratic residual {root_err:e}")
    })?;
    check(deriv_err < 1e-8, || {
        format!("surrogate derivative {deriv_err:e}")
    })?;
    check(cons_err < 1e-10, || {
        format!("constraint residual {cons_err:e}")
    })?;
    Ok(format!(
        "root {root_err:.1e}, derivative {deriv_err:.1e}, constraint {cons_err:.1e}"
    ))
}

// ---------------------------------------------------------------- 3, 4

struct Fit {
    model: TopicModel64,
    result: mvtm::FitResult64,
    beta_true: DMatrix<f64>,
}

fn fit_synthetic(config: &LdaConfig, solver_cfg: &SolverConfig64) -> Result<Fit, String> {
    let data = generate_lda_corpus(config).map_err(|e| e.to_string())?;
    let docs = normalize_counts(&data.corpus).map_err(|e| e.to_string())?;
    let subspace =
        fit_subspace_with(&docs, config.k, BasisMode::AffineHull).map_err(|e| e.to_string())?;
    let projected = subspace.project(&docs).map_err(|e| e.to_string())?;
    let result = solver::run(&projected, solver_cfg).map_err(|e| e.to_string())?;
    let model = TopicModel64::from_fit(subspace, &result, solver_cfg).map_err(|e| e.to_string())?;
    Ok(Fit {
        model,
        result,
        beta_true: data.beta_true,
    })
}

/// Relative Frobenius distance to `truth`, minimized over topic relabelings
/// (column permutations of `γ`).
fn gamma_error(gamma: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    let k = truth.ncols();
    all_permutations(k)
        .iter()
        .map(|p| {
            let permuted = DMatrix::from_fn(k, k, |i, j| gamma[(i, p[j])]);
            (permuted - truth).norm() / truth.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let fit = fit_synthetic(
        &lda(3, 300, 500, 500, 0.1, 0.1, 7),
        &SolverConfig64::default(),
    )?;
    let records = &fit.result.trace.records;
    let first = records
        .iter()
        .find(|r| r.r1 < 1e-4 && r.r2 < 1e-4)
        .map(|r| r.iter);
    check(first.is_some_and(|t| t <= 500), || {
        let at = records.get(499).map_or(f64::NAN, |r| r.r1.max(r.r2));
        format!("residuals not below 1e-4 by iteration 500 (max(r1, r2) = {at:e} there)")
    })?;

    let gamma_true = (&fit.beta_true * fit.model.subspace.basis())
        .try_inverse()
        .ok_or("true topics are degenerate in the fitted subspace")?;
    let k = gamma_true.nrows();
    let e0 = gamma_error(&DMatrix::identity(k, k), &gamma_true);
    let e1 = gamma_error(&fit.result.gamma_hat, &gamma_true);
    let ratio = e0 / e1;
    check(ratio >= 10.0, || {
        format!("error only fell from {e0:.3} to {e1:.3}")
    })?;
    within(start.elapsed(), 60)?;
    Ok(format!(
        "r1, r2 < 1e-4 at iteration {}, gamma error {e0:.3} -> {e1:.4} ({ratio:.1}x), {:.2}s",
        first.unwrap_or_default(),
        start.elapsed().as_secs_f64()
    ))
}

/// Best mean L1 over all relabelings, by enumeration.
fn brute_force_l1(beta_hat: &DMatrix<f64>, beta_true: &DMatrix<f64>) -> f64 {
    let k = beta_true.nrows();
    all_permutations(k)
        .iter()
        .map(|p| {
            (0..k)
                .map(|t| (beta_true.row(t) - beta_hat.row(p[t])).abs().sum())
                .sum::<f64>()
                / k as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn matched_l1(fit: &Fit) -> Result<f64, String> {
    let m = match_topics(&fit.model.beta, &fit.beta_true).map_err(|e| e.to_string())?;
    let oracle = brute_force_l1(&fit.model.beta, &fit.beta_true);
    check((m.mean_l1 - oracle).abs() < 1e-12, || {
        format!(
            "match_topics reports {} but the best relabeling gives {oracle}",
            m.mean_l1
        )
    })?;
    Ok(m.mean_l1)
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let separable = fit_synthetic(
        &lda(3, 300, 500, 500, 0.1, 0.1, 11),
        &SolverConfig64::default(),
    )?;
    let l1_a = matched_l1(&separable)?;
    check(l1_a < 0.15, || {
        format!("(a) mean L1 {l1_a:.3} at alpha = 0.1")
    })?;

    let mut sweep = Vec::new();
    for mu in [0.1, 1.0, 10.0] {
        let cfg = SolverConfig64 {
            mu,
            ..SolverConfig64::default()
        };
        let fit = fit_synthetic(&lda(3, 300, 500, 500, 3.0, 0.1, 11), &cfg)?;
        sweep.push((mu, matched_l1(&fit)?));
    }
    let (best_mu, l1_b) =
        sweep.iter().copied().fold(
            (f64::NAN, f64::INFINITY),
            |a, b| if b.1 < a.1 { b } else { a },
        );
    check(l1_b < 0.25, || {
        format!("(b) best mean L1 {l1_b:.3} at alpha = 3 ({sweep:?})")
    })?;
    within(start.elapsed(), 300)?;
    Ok(format!(
        "(a) L1 {l1_a:.3}; (b) L1 {l1_b:.3} at mu = {best_mu}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 5

fn random_stochastic(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(r, c, |_, _| rng.random_range(0.01..1.0));
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut uniform_err = 0f64;
    for seed in 0..5 {
        let v = [7, 30, 120, 500, 1000][seed as usize];
        let data = generate_lda_corpus(&lda(4, v, 25, 60 + 10 * seed as usize, 0.5, 0.2, seed))
            .map_err(|e| e.to_string())?;
        let beta = DMatrix::from_element(4, v, 1.0 / v as f64);
        let theta = random_stochastic(&mut rng, 25, 4);
        let p = perplexity(&beta, &theta, &data.corpus).map_err(|e| e.to_string())?;
        uniform_err = uniform_err.max((p - v as f64).abs());
    }
    check(uniform_err < 1e-9, || {
        format!("uniform model off by {uniform_err:e}")
    })?;

    let counts = DMatrix::from_row_slice(3, 5, &[3u32, 0, 1, 2, 0, 0, 5, 0, 0, 1, 1, 1, 1, 1, 1]);
    let corpus = Corpus::from_dense(&counts).map_err(|e| e.to_string())?;
    let beta = random_stochastic(&mut rng, 2, 5);
    let theta = random_stochastic(&mut rng, 3, 2);
    let (mut ll, mut tokens) = (0.0, 0.0);
    for d in 0..3 {
        for w in 0..5 {
            let n = counts[(d, w)] as f64;
            let p = theta[(d, 0)] * beta[(0, w)] + theta[(d, 1)] * beta[(1, w)];
            ll += n * p.ln();
            tokens += n;
        }
    }
    let oracle = (-ll / tokens).exp();
    let got = perplexity(&beta, &theta, &corpus).map_err(|e| e.to_string())?;
    check((got - oracle).abs() < 1e-10, || {
        format!("3-doc case: {got} vs {oracle}")
    })?;
    Ok(format!(
        "uniform {uniform_err:.1e}, hand oracle {:.1e}",
        (got - oracle).abs()
    ))
}

// ---------------------------------------------------------------- 6

fn dense_covariance(w: &DMatrix<f64>) -> DMatrix<f64> {
    let m = w.nrows();
    let mean = w.row_mean();
    let mut x = w.clone();
    for mut row in x.row_iter_mut() {
        row -= &mean;
    }
    x.transpose() * &x / (m as f64 - 1.0)
}

fn criterion_6() -> Outcome {
    let (mut ortho, mut ones_err, mut rowsum, mut eig_err) = (0f64, 0f64, 0f64, 0f64);
    let cases = [(20, 15, 3), (20, 200, 3), (12, 40, 4), (300, 500, 3)];
    for (i, &(v, m, k)) in cases.iter().enumerate() {
        let data = generate_lda_corpus(&lda(k, v, m, 150, 0.3, 0.3, 60 + i as u64))
            .map_err(|e| e.to_string())?;
        let docs: DocMatrix64 = normalize_counts(&data.corpus).map_err(|e| e.to_string())?;
        let w = docs.rows();
        let oracle = (v <= 20).then(|| {
            let cov = dense_covariance(w);
            let eig = SymmetricEigen::new(cov.clone());
            let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            (cov, vals)
        });

        for mode in [BasisMode::Covariance, BasisMode::AffineHull] {
            let s = fit_subspace_with(&docs, k, mode).map_err(|e| e.to_string())?;
            let e = s.basis();
            ortho = ortho.max((e.transpose() * e - DMatrix::identity(k, k)).abs().max());
            ones_err = ones_err.max((e.transpose() * DVector::from_element(v, 1.0)).amax());

            let coords = s.project(&docs).map_err(|e| e.to_string())?;
            let back = s
                .reconstruct_rows(&coords.coords)
                .map_err(|e| e.to_string())?;
            for row in back.row_iter() {
                rowsum = rowsum.max((row.sum() - 1.0).abs());
            }

            if let Some((cov, vals)) = &oracle {
                let got = s.eigenvalues();
                let checked = if mode == BasisMode::Covariance {
                    k
                } else {
                    k - 1
                };
                for j in 0..checked {
                    eig_err = eig_err.max((got[j] - vals[j]).abs());
                }
                if mode == BasisMode::AffineHull {
                    // the last axis reports the variance along itself
                    let u = e.column(k - 1);
                    eig_err = eig_err.max((got[k - 1] - (u.transpose() * cov * u)[0]).abs());
                }
            }
        }
    }
    check(ortho < 1e-10, || {
        format!("basis not orthonormal: {ortho:e}")
    })?;
    check(ones_err < 1e-8, || {
        format!("basis not orthogonal to 1: {ones_err:e}")
    })?;
    check(rowsum < 1e-9, || {
        format!("reconstruction row sums off by {rowsum:e}")
    })?;
    check(eig_err < 1e-8, || format!("eigenvalues off by {eig_err:e}"))?;
    Ok(format!(
        "orthonormality {ortho:.1e}, E'1 {ones_err:.1e}, row sums {rowsum:.1e}, eigenvalues {eig_err:.1e}"
    ))
}

// ---------------------------------------------------------------- 7

fn run_binary(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mvtm"))
        .args(args)
        .env("MVTM_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(0 | 2) => Ok(()),
        code => Err(format!(
            "`mvtm {}` exited with {code:?}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )),
    }
}

fn generate_and_fit(dir: &Path, threads: &str) -> Result<(), String> {
    let d = dir.to_str().ok_or("non-UTF-8 temp path")?;
    run_binary(
        &[
            "generate",
            "--k",
            "3",
            "--vocab",
            "300",
            "--docs",
            "500",
            "--doc-len",
            "500",
            "--seed",
            "7",
            "--out",
            d,
        ],
        threads,
    )?;
    let input = dir.join("counts.bow");
    let model = dir.join("model.json");
    let trace = dir.join("trace.csv");
    run_binary(
        &[
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--k",
            "3",
            "--out",
            model.to_str().unwrap(),
            "--trace",
            trace.to_str().unwrap(),
        ],
        threads,
    )
}

fn criterion_7() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [("a", "1"), ("b", "1"), ("c", "4"), ("d", "0")];
    for (name, threads) in runs {
        generate_and_fit(&root.path().join(name), threads)?;
    }
    let files = [
        "counts.bow",
        "beta_true.csv",
        "theta_true.csv",
        "model.json",
        "trace.csv",
    ];
    for f in files {
        let reference = std::fs::read(root.path().join("a").join(f)).map_err(|e| e.to_string())?;
        for (name, threads) in &runs[1..] {
            let other = std::fs::read(root.path().join(name).join(f)).map_err(|e| e.to_string())?;
            check(other == reference, || {
                format!("{f} differs with MVTM_THREADS={threads}")
            })?;
        }
    }
    Ok(format!(
        "{} files identical across 4 runs (threads 1, 1, 4, auto)",
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("operator oracles", criterion_1),
        ("gamma update", criterion_2),
        ("convergence", criterion_3),
        ("recovery", criterion_4),
        ("perplexity identities", criterion_5),
        ("projection invariants", criterion_6),
        ("determinism", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
