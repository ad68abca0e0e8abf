//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p biesn-cli --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use biesn::dataset::{read_sample, write_sample};
use biesn::readout::fit_ridge_indexed;
use biesn::reservoir::{run_forward, run_forward_from, ReservoirConfig, ReservoirWeights};
use biesn::rng::SeededRng;
use biesn::{run_bidirectional, Error};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_biesn");

type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
type Malformed = (&'static str, Vec<u8>, fn(&Error) -> bool);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Leaky-tanh recurrence from the zero state, one row per frame.
fn scripted(w: &Array2<f64>, w_in: &Array2<f64>, b: &Array1<f64>, a: f64, u: &Array2<f64>) -> Array2<f64> {
    let n = b.len();
    let mut x = Array1::<f64>::zeros(n);
    let mut out = Array2::<f64>::zeros((u.nrows(), n));
    for t in 0..u.nrows() {
        let pre = w.dot(&x) + w_in.dot(&u.row(t)) + b;
        x = x.mapv(|v| (1.0 - a) * v) + pre.mapv(|v| a * v.tanh());
        out.row_mut(t).assign(&x);
    }
    out
}

fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn random_matrix(rng: &mut SeededRng, r: usize, c: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.uniform(-scale, scale))
}

fn state_equation_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(101);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let n = rng.range_inclusive(1, 4);
        let t = rng.range_inclusive(1, 10);
        let d = rng.range_inclusive(1, 3);
        let alpha = rng.uniform(0.0, 1.0);
        let mk = |rng: &mut SeededRng| {
            (random_matrix(rng, n, n, 1.0), random_matrix(rng, n, d, 1.5), Array1::from_shape_fn(n, |_| rng.uniform(-0.5, 0.5)))
        };
        let (w, w_in, b) = mk(&mut rng);
        let (w2, w_in2, b2) = mk(&mut rng);
        let u = random_matrix(&mut rng, t, d, 2.0);
        let cfg = ReservoirConfig {
            n_units: n,
            leak_rate: alpha,
            ..Default::default()
        };
        let fw = ReservoirWeights::from_parts(w.view(), w_in.clone(), b.clone()).unwrap();
        let bw = ReservoirWeights::from_parts(w2.view(), w_in2.clone(), b2.clone()).unwrap();
        let rev = u.slice(ndarray::s![..;-1, ..]).to_owned();

        let fwd = run_forward(&fw, u.view(), &cfg, None).unwrap();
        worst = worst.max(max_abs(&fwd.states, &scripted(&w, &w_in, &b, alpha, &u)));

        let shared = run_bidirectional(&fw, None, u.view(), &cfg, None).unwrap();
        let expect_b = scripted(&w, &w_in, &b, alpha, &rev).slice(ndarray::s![..;-1, ..]).to_owned();
        worst = worst.max(max_abs(&shared.forward.states, &fwd.states));
        worst = worst.max(max_abs(&shared.backward.states, &expect_b));

        let split = run_bidirectional(&fw, Some(&bw), u.view(), &cfg, None).unwrap();
        let expect_b2 = scripted(&w2, &w_in2, &b2, alpha, &rev).slice(ndarray::s![..;-1, ..]).to_owned();
        worst = worst.max(max_abs(&split.backward.states, &expect_b2));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 1.0,
        format!("25 instances, max |err| {worst:.2e} (tol 1e-12), {secs:.3}s (limit 1s)"),
    )
}

/// Least squares on the stacked system [Z; sqrt(lambda) P] W = [Y; 0]
/// through a dense pseudo-inverse, with its own z-scoring.
fn pinv_ridge(x: &Array2<f64>, labels: &[usize], c: usize, lambda: f64) -> Array2<f64> {
    let (n, f) = x.dim();
    let mut a = DMatrix::<f64>::zeros(n + f, f + 1);
    for j in 0..f {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let sd = (col.mapv(|v| (v - mean).powi(2)).sum() / n as f64).sqrt();
        let sd = if sd < 1e-12 { 1.0 } else { sd };
        for i in 0..n {
            a[(i, j)] = (x[[i, j]] - mean) / sd;
        }
        a[(n + j, j)] = lambda.sqrt();
    }
    for i in 0..n {
        a[(i, f)] = 1.0;
    }
    let mut y = DMatrix::<f64>::zeros(n + f, c);
    for (i, &l) in labels.iter().enumerate() {
        y[(i, l)] = 1.0;
    }
    let w = a.pseudo_inverse(1e-14).unwrap() * y;
    Array2::from_shape_fn((c, f + 1), |(i, j)| w[(j, i)])
}

fn ridge_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(202);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let c = rng.range_inclusive(2, 4);
        let n = rng.range_inclusive(2 * c.max(5), 50);
        let f = rng.range_inclusive(1, 10);
        let lambda = 10f64.powf(rng.uniform(-4.0, 1.0));
        let x = random_matrix(&mut rng, n, f, 3.0);
        let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        rng.shuffle(&mut labels);
        let classes: Vec<String> = (0..c).map(|k| format!("c{k}")).collect();
        let model = fit_ridge_indexed(x.view(), &labels, classes, lambda).unwrap();
        worst = worst.max(max_abs(&model.w_out, &pinv_ridge(&x, &labels, c, lambda)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 1.0,
        format!("25 instances, max |err| {worst:.2e} (tol 1e-8), {secs:.3}s (limit 1s)"),
    )
}

fn echo_state_property() -> Outcome {
    let mut ok = 0;
    let mut worst = 0.0f64;
    for trial in 0..10u64 {
        let cfg = ReservoirConfig {
            n_units: 100,
            spectral_radius: 0.9,
            leak_rate: 1.0,
            seed: 1000 + trial,
            ..Default::default()
        };
        let w = ReservoirWeights::init(&cfg, 3).unwrap();
        let mut rng = SeededRng::new(2000 + trial);
        let seq = random_matrix(&mut rng, 200, 3, 1.0);
        let xa: Vec<f64> = (0..100).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let xb: Vec<f64> = (0..100).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let a = run_forward_from(&w, seq.view(), &cfg, &xa, None).unwrap();
        let b = run_forward_from(&w, seq.view(), &cfg, &xb, None).unwrap();
        let d = (&a.last() - &b.last()).mapv(|v| v * v).sum().sqrt();
        worst = worst.max(d);
        if d < 1e-6 {
            ok += 1;
        }
    }
    outcome(ok == 10, format!("{ok}/10 trials below 1e-6 (worst {worst:.2e})"))
}

fn biesn(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!(
            "`biesn {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn row_mean(report: &Value, method: &str) -> Option<f64> {
    report["results"]["rows"]
        .as_array()?
        .iter()
        .find(|r| r["method"] == method)?["mean_accuracy"]
        .as_f64()
}

fn bidirectional_advantage(dir: &Path) -> Result<Outcome, String> {
    let start = Instant::now();
    let data = dir.join("default");
    let out = dir.join("bench");
    let (d, o) = (data.to_str().unwrap(), out.to_str().unwrap());
    biesn(&["generate", "--out", d])?;
    let manifest = data.join("manifest.json");
    biesn(&[
        "benchmark",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        o,
        "--units",
        "200",
        "--agg",
        "final",
        "--seeds",
        "5",
        "--lambda-grid",
        "default",
    ])?;
    let secs = start.elapsed().as_secs_f64();
    let rep = read_json(&out.join("benchmark.json"))?;
    let bi = row_mean(&rep, "bi-ESN").ok_or("no bi-ESN row")?;
    let uni = row_mean(&rep, "uni-ESN").ok_or("no uni-ESN row")?;
    let gap = (bi - uni) * 100.0;
    Ok(outcome(
        gap >= 5.0 && bi >= 0.85 && secs < 120.0,
        format!(
            "bi {:.2}% vs uni {:.2}%, gap {gap:.2} pp (need >= 5), bi >= 85%, {secs:.1}s (limit 120s)",
            bi * 100.0,
            uni * 100.0
        ),
    ))
}

/// Code lines (comments excluded) of the core crate that mention any
/// iterative-training vocabulary.
fn iterative_training_lines() -> Vec<String> {
    fn walk(dir: &Path, out: &mut Vec<std::path::PathBuf>) {
        for e in fs::read_dir(dir).unwrap().flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(&p, out);
            } else if p.extension().is_some_and(|x| x == "rs") {
                out.push(p);
            }
        }
    }
    let mut files = Vec::new();
    walk(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/src"), &mut files);
    let mut hits = Vec::new();
    for f in files {
        for (i, line) in fs::read_to_string(&f).unwrap().lines().enumerate() {
            let code = line.split("//").next().unwrap_or("").to_lowercase();
            if ["epoch", "gradient", "learning_rate", "optimizer"].iter().any(|w| code.contains(w)) {
                hits.push(format!("{}:{}", f.display(), i + 1));
            }
        }
    }
    hits
}

fn training_time(dir: &Path) -> Result<Outcome, String> {
    let spec = dir.join("large.txt");
    fs::write(
        &spec,
        "n_classes = 10\nprefix_motifs = 2\nsamples_per_class = 255\nmin_len = 50\nmax_len = 50\nfeature_dim = 126\nmotif_length = 10\n",
    )
    .map_err(|e| e.to_string())?;
    let data = dir.join("large");
    biesn(&["generate", "--spec", spec.to_str().unwrap(), "--out", data.to_str().unwrap()])?;
    let out = dir.join("large_run");
    let start = Instant::now();
    biesn(&[
        "train",
        "--manifest",
        data.join("manifest.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--units",
        "200",
    ])?;
    let secs = start.elapsed().as_secs_f64();
    let rep = read_json(&out.join("train_report.json"))?;
    let r = &rep["results"];
    let n_train = r["n_train"].as_u64().unwrap_or(0);
    let epochs = r["training_epochs"].as_u64();
    let solves = r["linear_solves"].as_u64();
    let iterative = iterative_training_lines();
    Ok(outcome(
        n_train == 1780 && epochs == Some(0) && solves == Some(1) && secs < 60.0 && iterative.is_empty(),
        format!(
            "{n_train} train sequences (T=50, D=126, 200 units), {secs:.2}s end to end (limit 60s), epochs {epochs:?}, linear solves {solves:?}, iterative-training code lines {:?}",
            iterative
        ),
    ))
}

fn determinism(dir: &Path) -> Result<Outcome, String> {
    let spec = dir.join("small.txt");
    fs::write(
        &spec,
        "n_classes = 4\nprefix_motifs = 2\nsamples_per_class = 30\nmin_len = 20\nmax_len = 30\nmotif_length = 5\n",
    )
    .map_err(|e| e.to_string())?;
    let data = dir.join("small");
    biesn(&["generate", "--spec", spec.to_str().unwrap(), "--out", data.to_str().unwrap()])?;
    let manifest = data.join("manifest.json");
    let mut sections = Vec::new();
    for (i, threads) in ["1", "4", "4", "2"].iter().enumerate() {
        let out = dir.join(format!("det{i}"));
        biesn(&[
            "benchmark",
            "--threads",
            threads,
            "--manifest",
            manifest.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--units",
            "60",
            "--seeds",
            "3",
            "--noise-level",
            "0.01",
            "--bias-scale",
            "0.1",
            "--lambda-grid",
            "default",
        ])?;
        let rep = read_json(&out.join("benchmark.json"))?;
        sections.push(serde_json::to_string(&rep["results"]).map_err(|e| e.to_string())?);
    }
    let same = sections.windows(2).all(|w| w[0] == w[1]);
    Ok(outcome(
        same && !sections[0].is_empty(),
        format!("4 benchmark runs (--threads 1, 4, 4, 2): results sections identical = {same}"),
    ))
}

fn format_roundtrip(dir: &Path) -> Outcome {
    let mut rng = SeededRng::new(303);
    let mut exact = 0;
    for i in 0..100 {
        let t = rng.range_inclusive(1, 60);
        let d = rng.range_inclusive(1, 130);
        let frames = Array2::from_shape_fn((t, d), |_| {
            let r = rng.next_f64();
            if r < 0.1 {
                f32::NAN
            } else if r < 0.12 {
                [0.0f32, -0.0, f32::MAX, f32::MIN_POSITIVE][rng.range_inclusive(0, 3)]
            } else {
                rng.uniform(-2.0, 2.0) as f32
            }
        });
        let path = dir.join(format!("rt{i}.kps"));
        write_sample(&path, frames.view()).unwrap();
        let back = read_sample(&path).unwrap();
        if back.dim() == frames.dim() && back.iter().zip(frames.iter()).all(|(a, b)| a.to_bits() == b.to_bits()) {
            exact += 1;
        }
    }

    let good = {
        let mut b = b"KPS1".to_vec();
        b.extend(2u32.to_le_bytes());
        b.extend(2u32.to_le_bytes());
        for v in [1.0f32, f32::NAN, 3.0, 4.0] {
            b.extend(v.to_le_bytes());
        }
        b
    };
    let mut bad_magic = good.clone();
    bad_magic[..4].copy_from_slice(b"XYZW");
    let mut version = good.clone();
    version[..4].copy_from_slice(b"KPS2");
    let truncated = good[..good.len() - 3].to_vec();
    let short_header = good[..6].to_vec();
    let mut trailing = good.clone();
    trailing.push(0);
    let corpus: Vec<Malformed> = vec![
        ("bad magic", bad_magic, |e| matches!(e, Error::BadMagic { .. })),
        ("version", version, |e| matches!(e, Error::Version { .. })),
        ("truncated payload", truncated, |e| matches!(e, Error::Truncated { .. })),
        ("truncated header", short_header, |e| matches!(e, Error::Truncated { .. })),
        ("trailing bytes", trailing, |e| matches!(e, Error::Malformed { .. })),
    ];
    let mut misses = Vec::new();
    for (name, bytes, expected) in &corpus {
        let path = dir.join(format!("{}.kps", name.replace(' ', "_")));
        fs::write(&path, bytes).unwrap();
        match read_sample(&path) {
            Err(e) if expected(&e) => {}
            other => misses.push(format!("{name}: {other:?}")),
        }
    }
    outcome(
        exact == 100 && misses.is_empty(),
        format!(
            "{exact}/100 samples bit-exact, {}/{} malformed files gave their error{}",
            corpus.len() - misses.len(),
            corpus.len(),
            if misses.is_empty() { String::new() } else { format!(" ({})", misses.join("; ")) }
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let lift = |r: Result<Outcome, String>| r.unwrap_or_else(|e| outcome(false, e));
    let criteria: Vec<Check<'_>> = vec![
        ("state-equation oracle", Box::new(state_equation_oracle)),
        ("ridge oracle", Box::new(ridge_oracle)),
        ("echo state property", Box::new(echo_state_property)),
        ("bidirectional advantage", Box::new(|| lift(bidirectional_advantage(dir.path())))),
        ("training time", Box::new(|| lift(training_time(dir.path())))),
        ("determinism", Box::new(|| lift(determinism(dir.path())))),
        ("format round-trip", Box::new(|| format_roundtrip(dir.path()))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
