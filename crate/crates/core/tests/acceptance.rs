//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dmap_core::classify::{lda_fit, lda_predict, ClassifierKind};
use dmap_core::data::{generate_phantoms, Dataset, Label, PhantomConfig};
use dmap_core::ensemble::{
    aggregate_votes, build_fold_plan, cross_validate, write_metrics_csv, write_votes_csv, CrossValReport, FoldPlan,
    Subject, TestSelection, COMBOS,
};
use dmap_core::features::Features;
use dmap_core::kernel::{build_kernel, build_markov, pairwise_sq_distances, KernelConfig, KernelMatrix};
use dmap_core::manifold::{EmbedderSpec, IsomapSpace, KpcaSpace, LleSpace, Method};
use dmap_core::nystrom::TrainedSpace;
use dmap_core::spectral::decompose;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn phantoms(n_per_class: usize, seed: u64) -> Dataset {
    generate_phantoms(&PhantomConfig {
        n_per_class,
        shape: PhantomConfig::default_shape(),
        noise_sigma: 0.3,
        seed,
    })
    .expect("phantoms")
    .standardized()
    .expect("standardize")
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Features {
    let values = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
    Features::from_rows(n, dim, values)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let ds = phantoms(100, 11);
    let space = TrainedSpace::fit(&ds, KernelConfig::new(8.0, 1).unwrap(), 50).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (i, s) in ds.samples().iter().enumerate() {
        let ext = space.extend(s).map_err(|e| e.to_string())?;
        for (l, v) in ext.coords.iter().enumerate() {
            worst = worst.max((v - space.coords().coords[(i, l)]).abs());
        }
    }
    let elapsed = start.elapsed();
    check(worst < 1e-10, || format!("max error {worst:e}"))?;
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("200 training copies, k = 50, max error {worst:.2e}, {:.2?}", elapsed))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_row, mut worst_top, mut worst_const, mut worst_res) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let n = rng.random_range(3..=100);
        let dim = rng.random_range(1..=8);
        let alpha = rng.random_range(0.5..20.0);
        let f = random_points(&mut rng, n, dim);
        let graph = build_markov(build_kernel(&pairwise_sq_distances(&f), KernelConfig::new(alpha, 1).unwrap()));
        let p = graph.step();
        for i in 0..n {
            worst_row = worst_row.max((p.row(i).sum() - 1.0).abs());
        }
        let basis = decompose(&graph, n - 1).map_err(|e| e.to_string())?;
        let lam = basis.eigenvalues();
        let psi = basis.eigenvectors();
        worst_top = worst_top.max((lam[0] - 1.0).abs());
        let c = psi.column(0);
        worst_const = worst_const.max(c.max() - c.min());
        for l in 0..=basis.k() {
            let r = p * psi.column(l) - psi.column(l) * lam[l];
            worst_res = worst_res.max(r.amax());
        }
    }
    check(worst_row <= 1e-12, || format!("row sum error {worst_row:e}"))?;
    check(worst_top <= 1e-10, || format!("lambda_0 error {worst_top:e}"))?;
    check(worst_const <= 1e-10, || format!("psi_0 spread {worst_const:e}"))?;
    check(worst_res < 1e-8, || format!("eigen residual {worst_res:e}"))?;
    Ok(format!(
        "50 graphs: row sums {worst_row:.1e}, lambda_0 {worst_top:.1e}, psi_0 spread {worst_const:.1e}, residual {worst_res:.1e}"
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let n = rng.random_range(2..=40);
        let f = random_points(&mut rng, n, 3);
        let alpha = rng.random_range(0.5..10.0);
        let t = 1 + trial % 3;
        let graph = build_markov(build_kernel(&pairwise_sq_distances(&f), KernelConfig::new(alpha, t).unwrap()));
        // Independent P^t: kernel rows divided by their sums, multiplied naively.
        let k = graph.kernel().values();
        let p1 = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (0..n).map(|c| k[(i, c)]).sum::<f64>());
        let mut pt = p1.clone();
        for _ in 1..t {
            pt = DMatrix::from_fn(n, n, |i, j| (0..n).map(|m| pt[(i, m)] * p1[(m, j)]).sum());
        }
        for i in 0..n {
            for j in 0..n {
                let expected = (0..n).map(|c| (pt[(i, c)] - pt[(j, c)]).powi(2)).sum::<f64>().sqrt();
                let got = graph.diffusion_distance(i, j).map_err(|e| e.to_string())?;
                worst = worst.max((got - expected).abs());
            }
        }
    }
    check(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("20 random instances, t in 1..=3, max deviation {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let kernel = KernelMatrix::from_values(k, KernelConfig::new(1.0, 1).unwrap()).map_err(|e| e.to_string())?;
    let graph = build_markov(kernel);
    let expected_p = [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0];
    let p = graph.step();
    for (idx, e) in expected_p.iter().enumerate() {
        let got = p[(idx / 2, idx % 2)];
        check((got - e).abs() <= 1e-12, || format!("P[{idx}] = {got}"))?;
    }
    let basis = decompose(&graph, 1).map_err(|e| e.to_string())?;
    let lam = basis.eigenvalues();
    check((lam[0] - 1.0).abs() <= 1e-12 && (lam[1] - 1.0 / 3.0).abs() <= 1e-12, || {
        format!("eigenvalues {lam:?}")
    })?;
    let d = graph.diffusion_distance(0, 1).map_err(|e| e.to_string())?;
    check((d - 2f64.sqrt() / 3.0).abs() <= 1e-12, || format!("D(0,1) = {d}"))?;
    Ok(format!("P, eigenvalues {{1, 1/3}} and D(0,1) = {d:.12} match"))
}

/// Two-dimensional LDA written out by hand: explicit 2x2 inverse, no linear algebra library.
fn brute_force_lda(x: &[[f64; 2]], y: &[Label], queries: &[[f64; 2]]) -> Vec<Label> {
    let mut mean = [[0.0; 2]; 2];
    let mut count = [0.0; 2];
    for (p, &l) in x.iter().zip(y) {
        let c = l as usize;
        mean[c][0] += p[0];
        mean[c][1] += p[1];
        count[c] += 1.0;
    }
    for c in 0..2 {
        mean[c][0] /= count[c];
        mean[c][1] /= count[c];
    }
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (p, &l) in x.iter().zip(y) {
        let dx = p[0] - mean[l as usize][0];
        let dy = p[1] - mean[l as usize][1];
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let dof = (x.len() - 2) as f64;
    let (sxx, sxy, syy) = (sxx / dof, sxy / dof, syy / dof);
    let gamma = 1e-4;
    let target = (sxx + syy) / 2.0;
    let a = (1.0 - gamma) * sxx + gamma * target;
    let b = (1.0 - gamma) * sxy;
    let d = (1.0 - gamma) * syy + gamma * target;
    let det = a * d - b * b;
    let dm = [mean[1][0] - mean[0][0], mean[1][1] - mean[0][1]];
    let w = [(d * dm[0] - b * dm[1]) / det, (-b * dm[0] + a * dm[1]) / det];
    let mid = [(mean[0][0] + mean[1][0]) / 2.0, (mean[0][1] + mean[1][1]) / 2.0];
    let bias = -(w[0] * mid[0] + w[1] * mid[1]);
    queries
        .iter()
        .map(|q| (w[0] * q[0] + w[1] * q[1] + bias > 0.0) as Label)
        .collect()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut compared = 0;
    for instance in 0..100 {
        let n0 = rng.random_range(3..40);
        let n1 = rng.random_range(3..40);
        let shift = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let corr: f64 = rng.random_range(-0.8..0.8);
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (label, n) in [(0u8, n0), (1u8, n1)] {
            for _ in 0..n {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                let off = if label == 1 { shift } else { [0.0, 0.0] };
                pts.push([a + off[0], corr * a + (1.0 - corr * corr).sqrt() * b + off[1]]);
                labels.push(label);
            }
        }
        let queries: Vec<[f64; 2]> = (0..50)
            .map(|_| [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)])
            .collect();
        let x = DMatrix::from_fn(pts.len(), 2, |i, j| pts[i][j]);
        let q = DMatrix::from_fn(queries.len(), 2, |i, j| queries[i][j]);
        let model = lda_fit(&x, &labels).map_err(|e| e.to_string())?;
        let got = lda_predict(&model, &q).map_err(|e| e.to_string())?.labels;
        let expected = brute_force_lda(&pts, &labels, &queries);
        check(got == expected, || format!("instance {instance} disagrees"))?;
        compared += got.len();
    }
    Ok(format!("100 instances, {compared} query labels identical to the closed form"))
}

fn criterion_6() -> Outcome {
    for count in 0..=COMBOS {
        let votes: Vec<Label> = (0..COMBOS).map(|v| (v < count) as Label).collect();
        let subject = Subject {
            id: format!("s{count}"),
            true_label: None,
            age: None,
        };
        let rec = aggregate_votes(&[subject], &[votes], 0.5).map_err(|e| e.to_string())?;
        let expected = (count >= 13) as Label;
        check(rec[0].final_call == expected, || format!("{count} votes gave {}", rec[0].final_call))?;
    }
    Ok("final = 1 exactly when at least 13 of 25 votes are 1".into())
}

fn check_plan(plan: &FoldPlan, n: usize) -> Result<(), String> {
    let mut validated = vec![0usize; n];
    let mut trained = vec![0usize; n];
    for c in 0..plan.combos.len() {
        let v = plan.validation(c).map_err(|e| e.to_string())?;
        let t = plan.training(c).map_err(|e| e.to_string())?;
        for &i in &v {
            validated[i] += 1;
            check(!t.contains(&i), || format!("combo {c}: {i} in train and validation"))?;
        }
        for &i in &t {
            trained[i] += 1;
        }
        for &i in &plan.test_set {
            check(!v.contains(&i) && !t.contains(&i), || format!("combo {c}: test subject {i} leaked"))?;
        }
    }
    for i in 0..n {
        let expected = if plan.test_set.contains(&i) { (0, 0) } else { (5, 20) };
        check((validated[i], trained[i]) == expected, || {
            format!("sample {i}: validated {} trained {}", validated[i], trained[i])
        })?;
    }
    Ok(())
}

fn criterion_7() -> Outcome {
    let mut plans = 0;
    for (n0, n1, test) in [
        (10, 10, TestSelection::None),
        (37, 23, TestSelection::Count(7)),
        (300, 300, TestSelection::Count(100)),
        (50, 64, TestSelection::Fraction(0.2)),
    ] {
        let ds = generate_phantoms(&PhantomConfig {
            n_per_class: n0.max(n1),
            shape: PhantomConfig::default_shape(),
            noise_sigma: 0.0,
            seed: 0,
        })
        .unwrap();
        let big = n0.max(n1);
        let idx: Vec<usize> = (0..n0).chain(big..big + n1).collect();
        let ds = ds.subset(&idx);
        for seed in 0..5 {
            let plan = build_fold_plan(&ds, &test, seed).map_err(|e| e.to_string())?;
            check_plan(&plan, ds.len())?;
            plans += 1;
        }
    }
    Ok(format!("{plans} seeded plans: 5 validations and 20 trainings per pool sample, all sets disjoint"))
}

struct Benchmark {
    dm: CrossValReport,
    kpca: CrossValReport,
    dm_time: Duration,
}

fn benchmark_data() -> (Dataset, FoldPlan) {
    let ds = phantoms(300, 7);
    let plan = build_fold_plan(&ds, &TestSelection::Count(100), 7).expect("plan");
    (ds, plan)
}

fn run_dm(ds: &Dataset, plan: &FoldPlan) -> CrossValReport {
    let spec = EmbedderSpec {
        method: Method::Dm,
        k: 200,
        alpha: 8.0,
        t: 1,
        ..EmbedderSpec::default()
    };
    cross_validate(ds, plan, &spec, ClassifierKind::Lda, 0.5).expect("dm cross-validation")
}

fn criterion_8(bench: &Benchmark) -> Outcome {
    let test = bench.dm.summary.test_after_voting.as_ref().ok_or("no test metrics")?;
    let dm_std = bench.dm.summary.validation_accuracy.std;
    let kpca_std = bench.kpca.summary.validation_accuracy.std;
    check(test.accuracy >= 0.95, || format!("test accuracy {}", test.accuracy))?;
    check(dm_std <= kpca_std, || format!("DM std {dm_std:.4} > KPCA std {kpca_std:.4}"))?;
    check(bench.dm_time < Duration::from_secs(120), || format!("took {:?}", bench.dm_time))?;
    Ok(format!(
        "test accuracy {:.2} on {} subjects, validation std DM {:.4} <= KPCA {:.4}, DM run {:.2?}",
        test.accuracy,
        test.confusion.total(),
        dm_std,
        kpca_std,
        bench.dm_time
    ))
}

fn write_reports(report: &CrossValReport, dir: &Path) -> (Vec<u8>, Vec<u8>) {
    write_metrics_csv(&dir.join("metrics.csv"), &[report]).unwrap();
    write_votes_csv(&dir.join("votes.csv"), &report.votes).unwrap();
    (
        std::fs::read(dir.join("metrics.csv")).unwrap(),
        std::fs::read(dir.join("votes.csv")).unwrap(),
    )
}

fn criterion_9(bench: &Benchmark) -> Outcome {
    let (ds, plan) = benchmark_data();
    let reference_dir = tempfile::tempdir().unwrap();
    let reference = write_reports(&bench.dm, reference_dir.path());
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let report = pool.install(|| run_dm(&ds, &plan));
        let dir = tempfile::tempdir().unwrap();
        let files = write_reports(&report, dir.path());
        check(files.0 == reference.0, || format!("metrics.csv differs with {threads} threads"))?;
        check(files.1 == reference.1, || format!("votes.csv differs with {threads} threads"))?;
    }
    Ok("metrics.csv and votes.csv byte-identical with the default pool, 1 and 3 threads".into())
}

fn criterion_10() -> Outcome {
    let ds = phantoms(40, 10);
    let lle = LleSpace::fit(ds.features(), 10, 12).map_err(|e| e.to_string())?;
    let worst_sum = lle
        .weights()
        .iter()
        .map(|w| (w.iter().map(|(_, v)| v).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    check(worst_sum <= 1e-10, || format!("LLE weight sum error {worst_sum:e}"))?;

    let f = ds.features();
    let kpca = KpcaSpace::fit(f.clone(), 20, 8.0).map_err(|e| e.to_string())?;
    let mut worst_kpca: f64 = 0.0;
    for i in 0..f.n() {
        let y = kpca.extend_row(f.row(i)).map_err(|e| e.to_string())?;
        for (l, v) in y.iter().enumerate() {
            worst_kpca = worst_kpca.max((v - kpca.coords()[(i, l)]).abs());
        }
    }
    check(worst_kpca <= 1e-10, || format!("KPCA training-copy error {worst_kpca:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let direction = [0.3, -0.5, 0.8, 0.1, 0.2];
    let norm = direction.iter().map(|d: &f64| d * d).sum::<f64>().sqrt();
    let mut arc: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..10.0)).collect();
    arc.sort_by(f64::total_cmp);
    let rows: Vec<Vec<f64>> = arc
        .iter()
        .map(|s| direction.iter().map(|d| 1.0 + s * d / norm).collect())
        .collect();
    let iso = IsomapSpace::fit(Features::from_row_slices(&rows), 1, 5).map_err(|e| e.to_string())?;
    let coord: Vec<f64> = iso.coords().column(0).iter().copied().collect();
    let r = pearson(&coord, &arc);
    check(r.abs() > 0.999, || format!("Isomap correlation {r}"))?;
    Ok(format!(
        "LLE weight sums {worst_sum:.1e}, KPCA copies {worst_kpca:.1e}, Isomap line |r| = {:.6}",
        r.abs()
    ))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn guarded<T>(f: impl FnOnce() -> Result<T, String>) -> Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(outcome) => outcome,
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

fn main() -> ExitCode {
    let (ds, plan) = benchmark_data();
    let bench = guarded(|| {
        let start = Instant::now();
        let dm = run_dm(&ds, &plan);
        let dm_time = start.elapsed();
        let kpca_spec = EmbedderSpec {
            method: Method::Kpca,
            k: 200,
            alpha: 8.0,
            ..EmbedderSpec::default()
        };
        let kpca = cross_validate(&ds, &plan, &kpca_spec, ClassifierKind::Lda, 0.5).expect("kpca cross-validation");
        Ok(Benchmark { dm, kpca, dm_time })
    });

    let with_bench = |f: fn(&Benchmark) -> Outcome| -> Outcome {
        match &bench {
            Ok(b) => guarded(|| f(b)),
            Err(e) => Err(format!("benchmark failed: {e}")),
        }
    };

    let results: Vec<(&str, Outcome)> = vec![
        ("Nyström exactness on training copies", guarded(criterion_1)),
        ("stochasticity and spectrum", guarded(criterion_2)),
        ("diffusion-distance identity", guarded(criterion_3)),
        ("two-point hand oracle", guarded(criterion_4)),
        ("LDA against closed form", guarded(criterion_5)),
        ("voting semantics", guarded(criterion_6)),
        ("fold combinatorics", guarded(criterion_7)),
        ("end-to-end synthetic benchmark", with_bench(criterion_8)),
        ("determinism across thread counts", with_bench(criterion_9)),
        ("alternative-embedder sanity", guarded(criterion_10)),
    ];

    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
