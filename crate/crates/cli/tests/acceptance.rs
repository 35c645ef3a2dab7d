//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p hosvd-cli --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use hosvd_core::api::{model_id, ClassifyResponse};
use hosvd_core::classifier::{
    model_from_bytes, model_to_bytes, train_matrix_mode, train_vector_mode_from_samples,
    ClassBasis, Sample,
};
use hosvd_core::cnn::{
    gradient_check, network_from_bytes, network_to_bytes, CnnDescriptor, CnnNetwork,
};
use hosvd_core::container::FormatError;
use hosvd_core::data::{encode_pnm, stratified_kfold, synth_dataset, ImageU8, SynthKind};
use hosvd_core::eval::{anova_oneway, cross_validate, knn_classify, ClassifierSpec, CnnTraining};
use hosvd_core::pipeline::{train_pipeline, Pipeline, TrainMode};
use hosvd_core::rng::SplitMix64;
use hosvd_core::tensor::{
    fold, hosvd, reconstruct, truncation_error_bound, unfold, Matrix, Mode, Tensor3,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_tensor(rng: &mut SplitMix64, dims: [usize; 3]) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.normal())
}

fn random_dims(rng: &mut SplitMix64) -> [usize; 3] {
    [1 + rng.below(8), 1 + rng.below(9), 1 + rng.below(7)]
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = SplitMix64::new(1);
    let mut worst = 0.0_f64;
    for case in 0..200 {
        let dims = random_dims(&mut rng);
        let t = random_tensor(&mut rng, dims);
        let d = hosvd(&t, dims).map_err(|e| format!("case {case}: {e}"))?;
        let rel = reconstruct(&d).unwrap().sub(&t).frobenius_norm() / t.frobenius_norm();
        worst = worst.max(rel);
        ensure(rel <= 1e-10, || {
            format!("case {case} dims {dims:?}: relative error {rel:e}")
        })?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:.2?}")
    })?;
    Ok(format!("worst relative error {worst:.2e}, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = SplitMix64::new(1);
    let (mut worst_orth, mut worst_core) = (0.0_f64, 0.0_f64);
    for case in 0..200 {
        let dims = random_dims(&mut rng);
        let t = random_tensor(&mut rng, dims);
        let d = hosvd(&t, dims).unwrap();
        for mode in Mode::ALL {
            let n = mode.axis();
            let sigma1 = d.mode_singular_values[n].first().copied().unwrap_or(0.0);
            let defect = d.factors[n].orthonormality_defect();
            let scaled = defect / sigma1.max(1.0);
            worst_orth = worst_orth.max(scaled);
            ensure(scaled <= 1e-10, || {
                format!("case {case} mode {}: defect {defect:e}", n + 1)
            })?;
        }
        let core_sq = d.core.frobenius_norm().powi(2);
        let inner = d.max_slice_inner_product();
        let ratio = if core_sq > 0.0 { inner / core_sq } else { 0.0 };
        worst_core = worst_core.max(ratio);
        ensure(inner <= 1e-8 * core_sq, || {
            format!("case {case}: slice inner product {inner:e}")
        })?;
    }
    Ok(format!(
        "worst factor defect {worst_orth:.2e}, worst slice ratio {worst_core:.2e}"
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = SplitMix64::new(3);
    let mut tightest = f64::INFINITY;
    let mut case = 0;
    while case < 100 {
        let dims = random_dims(&mut rng);
        let ranks = [
            1 + rng.below(dims[0]),
            1 + rng.below(dims[1]),
            1 + rng.below(dims[2]),
        ];
        let t = random_tensor(&mut rng, dims);
        let d = hosvd(&t, ranks).unwrap();
        let bound = truncation_error_bound(&d.mode_singular_values, ranks);
        // Pairs that discard nothing are the exactness case of criterion 1.
        if bound == 0.0 {
            continue;
        }
        let err = reconstruct(&d).unwrap().sub(&t).frobenius_norm();
        // When only one mode truncates, error and bound coincide exactly and
        // may differ in the last bit.
        let slack = 1e-12 * t.frobenius_norm();
        ensure(err <= bound + slack, || {
            format!("case {case} dims {dims:?} ranks {ranks:?}: {err:e} > {bound:e}")
        })?;
        tightest = tightest.min(bound - err);
        case += 1;
    }
    Ok(format!("100 pairs, smallest slack {tightest:.3e}"))
}

/// Least-squares residual through the normal equations, Gaussian elimination.
fn normal_equations_residual(basis: &[Matrix], z: &Matrix) -> f64 {
    let k = basis.len();
    let mut g: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| basis[i].frobenius_dot(&basis[j])).collect())
        .collect();
    let mut b: Vec<f64> = basis.iter().map(|bi| bi.frobenius_dot(z)).collect();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| g[i][col].abs().total_cmp(&g[j][col].abs()))
            .unwrap();
        g.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = g[r][col] / g[col][col];
            for c in col..k {
                g[r][c] -= f * g[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut coef = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| g[r][c] * coef[c]).sum();
        coef[r] = (b[r] - s) / g[r][r];
    }
    let mut fit = vec![0.0; z.as_slice().len()];
    for (bi, c) in basis.iter().zip(&coef) {
        for (f, v) in fit.iter_mut().zip(bi.as_slice()) {
            *f += c * v;
        }
    }
    let diff: f64 = z
        .as_slice()
        .iter()
        .zip(&fit)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    diff.sqrt() / z.frobenius_norm()
}

fn brute_force_knn(train: &[Vec<f64>], labels: &[u32], q: &[f64], k: usize) -> u32 {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, x)| {
            (
                x.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(),
                i,
            )
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ones = d[..k].iter().filter(|&&(_, i)| labels[i] == 1).count();
    u32::from(ones > k - ones)
}

fn direct_f(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.concat();
    let n = all.len() as f64;
    let g = groups.len() as f64;
    let grand = all.iter().sum::<f64>() / n;
    let (mut ssb, mut ssw) = (0.0, 0.0);
    for grp in groups {
        let m = grp.iter().sum::<f64>() / grp.len() as f64;
        ssb += grp.len() as f64 * (m - grand).powi(2);
        ssw += grp.iter().map(|y| (y - m).powi(2)).sum::<f64>();
    }
    (ssb / (g - 1.0)) / (ssw / (n - g))
}

fn criterion_4() -> Outcome {
    let mut rng = SplitMix64::new(4);

    for case in 0..100 {
        let dims = random_dims(&mut rng);
        let t = random_tensor(&mut rng, dims);
        for mode in Mode::ALL {
            let back = fold(&unfold(&t, mode), mode, dims).unwrap();
            ensure(
                back.as_slice()
                    .iter()
                    .zip(t.as_slice())
                    .all(|(a, b)| a.to_bits() == b.to_bits()),
                || format!("unfold/fold case {case} mode {}", mode.axis() + 1),
            )?;
        }
    }

    let mut worst_matrix = 0.0_f64;
    for trial in 0..20 {
        let (h, w) = (6, 5);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        let counts = [2 + rng.below(4), 2 + rng.below(4)];
        for (label, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                images.push(Matrix::new(h, w, (0..h * w).map(|_| rng.normal()).collect()).unwrap());
                labels.push(label as u32);
            }
        }
        let ranks = [
            1 + rng.below(h),
            1 + rng.below(w),
            1 + rng.below(counts[0].min(counts[1])),
        ];
        let model = train_matrix_mode(&images, &labels, ranks).unwrap();
        for _ in 0..5 {
            let z = Matrix::new(h, w, (0..h * w).map(|_| rng.normal()).collect()).unwrap();
            let r = model.classify(Sample::Matrix(&z)).unwrap();
            for label in 0..2u32 {
                let Some(ClassBasis::Matrix(bs)) = model.basis(label) else {
                    return Err("matrix model without matrix basis".into());
                };
                let diff = (r.residuals[label as usize] - normal_equations_residual(bs, &z)).abs();
                worst_matrix = worst_matrix.max(diff);
                ensure(diff <= 1e-9, || {
                    format!("matrix residual trial {trial} class {label}: {diff:e}")
                })?;
            }
        }
    }

    let train: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..4).map(|_| rng.normal()).collect())
        .collect();
    let labels: Vec<u32> = (0..60).map(|_| rng.below(2) as u32).collect();
    for q in 0..50 {
        let query: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        for k in [1, 3, 5] {
            let got = knn_classify(&train, &labels, &query, k).unwrap();
            let want = brute_force_knn(&train, &labels, &query, k);
            ensure(got == want, || {
                format!("k-NN query {q} k {k}: {got} vs {want}")
            })?;
        }
    }

    let mut worst_f = 0.0_f64;
    for trial in 0..100 {
        let groups: Vec<Vec<f64>> = (0..2 + rng.below(4))
            .map(|_| {
                let shift = rng.normal();
                (0..2 + rng.below(8))
                    .map(|_| shift + rng.normal())
                    .collect()
            })
            .collect();
        let got = anova_oneway(&groups).unwrap().f;
        let want = direct_f(&groups);
        let rel = ((got - want) / want).abs();
        worst_f = worst_f.max(rel);
        ensure(rel <= 1e-12, || {
            format!("ANOVA trial {trial}: {got} vs {want}")
        })?;
    }
    let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]).unwrap();
    ensure(
        (r.f - 1.5).abs() < 1e-12 && (r.dfb, r.dfw) == (1, 4),
        || format!("worked example gave {r:?}"),
    )?;

    Ok(format!(
        "fold/unfold bitwise; matrix residual diff {worst_matrix:.1e}; k-NN 150/150; F rel diff {worst_f:.1e}; F=1.50 df=(1,4)"
    ))
}

fn criterion_5() -> Outcome {
    let started = Instant::now();
    let mut rng = SplitMix64::new(5);
    let side = CnnDescriptor::SMALL.input_side;
    let mut worst = 0.0_f64;
    for trial in 0..20u64 {
        let net = CnnNetwork::init(CnnDescriptor::SMALL, 1000 + trial).unwrap();
        let img = Matrix::new(
            side,
            side,
            (0..side * side).map(|_| rng.next_f64()).collect(),
        )
        .unwrap();
        let err = gradient_check(&net, &img, rng.below(2) as u32).unwrap();
        worst = worst.max(err);
        ensure(err <= 1e-4, || {
            format!("trial {trial}: relative error {err:e}")
        })?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:.2?}")
    })?;
    Ok(format!("worst relative error {worst:.2e}, {elapsed:.2?}"))
}

/// First computed values for the surrogate dataset, frozen.
const GOLDEN_HOSVD_MEAN: f64 = 0.49000000000000005;
const GOLDEN_1NN_MEAN: f64 = 0.9400000000000001;

fn criterion_6() -> Outcome {
    let ds = synth_dataset(42, 100, SynthKind::Features { dim: 128 }, 6.0);
    let hosvd = cross_validate(ClassifierSpec::Hosvd, &ds, 5, 42).map_err(|e| e.to_string())?;
    let nn = cross_validate(ClassifierSpec::Knn(1), &ds, 5, 42).map_err(|e| e.to_string())?;
    let detail = format!("HOSVD mean {:.4}, 1-NN mean {:.4}", hosvd.mean, nn.mean);
    ensure(
        hosvd.mean == GOLDEN_HOSVD_MEAN && nn.mean == GOLDEN_1NN_MEAN,
        || format!("{detail}; drifted from golden values {GOLDEN_HOSVD_MEAN} / {GOLDEN_1NN_MEAN}"),
    )?;
    ensure(hosvd.mean >= 0.95, || format!("{detail}; HOSVD below 0.95"))?;
    ensure(hosvd.mean >= nn.mean - 0.02, || {
        format!("{detail}; HOSVD more than 0.02 below 1-NN")
    })?;
    Ok(detail)
}

fn hosvd_cmd(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hosvd"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!(
            "`hosvd {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// synth → train → evaluate in `dir`; returns elapsed time and the bytes of
/// every artifact.
fn pipeline_run(dir: &Path) -> Result<(Duration, Vec<Vec<u8>>), String> {
    let p = |name: &str| dir.join(name).to_str().unwrap().to_owned();
    let started = Instant::now();
    hosvd_cmd(&[
        "synth",
        "--out",
        &p("data"),
        "--kind",
        "images",
        "--seed",
        "42",
        "--per-class",
        "20",
    ])?;
    hosvd_cmd(&[
        "train",
        "--data",
        &p("data"),
        "--mode",
        "vector",
        "--seed",
        "42",
        "--epochs",
        "5",
        "--cnn",
        &p("net.hcnn"),
        "--out",
        &p("model.hsvd"),
    ])?;
    hosvd_cmd(&[
        "evaluate",
        "--data",
        &p("data"),
        "--seed",
        "42",
        "--json",
        &p("eval.json"),
        "--report",
        &p("eval.txt"),
    ])?;
    let elapsed = started.elapsed();
    let artifacts = ["net.hcnn", "model.hsvd", "eval.json", "eval.txt"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}")))
        .collect::<Result<_, _>>()?;
    Ok((elapsed, artifacts))
}

fn criterion_7() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (elapsed, first) = pipeline_run(a.path())?;
    let (_, second) = pipeline_run(b.path())?;
    let summary: serde_json::Value =
        serde_json::from_slice(&first[2]).map_err(|e| e.to_string())?;
    let mean = summary["reports"]
        .as_array()
        .and_then(|rs| rs.iter().find(|r| r["classifier"] == "HOSVD"))
        .and_then(|r| r["mean"].as_f64())
        .ok_or("no HOSVD report in evaluate output")?;
    let detail = format!("HOSVD mean {mean:.4}, first run {elapsed:.2?}");
    ensure(elapsed <= Duration::from_secs(60), || {
        format!("{detail}; over 60 s")
    })?;
    ensure(mean >= 0.90, || format!("{detail}; below 0.90"))?;
    ensure(first == second, || {
        format!("{detail}; artifacts differ between runs")
    })?;
    Ok(format!("{detail}; artifacts bit-identical"))
}

fn criterion_8() -> Outcome {
    let mut rng = SplitMix64::new(8);
    let samples: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..6).map(|_| rng.normal()).collect())
        .collect();
    let labels: Vec<u32> = (0..12).map(|i| i % 2).collect();
    let vector = train_vector_mode_from_samples(&samples, &labels, 3).unwrap();
    let images: Vec<Matrix> = (0..6)
        .map(|_| Matrix::new(5, 4, (0..20).map(|_| rng.normal()).collect()).unwrap())
        .collect();
    let matrix = train_matrix_mode(&images, &[0, 1, 0, 1, 0, 1], [3, 3, 2]).unwrap();
    for m in [&vector, &matrix] {
        let bytes = model_to_bytes(m);
        let back = model_from_bytes(&bytes).map_err(|e| e.to_string())?;
        ensure(&back == m && model_to_bytes(&back) == bytes, || {
            "model roundtrip not bitwise".into()
        })?;
    }
    let net = CnnNetwork::init(CnnDescriptor::STANDARD, 42).unwrap();
    let net_bytes = network_to_bytes(&net);
    let back = network_from_bytes(&net_bytes).map_err(|e| e.to_string())?;
    ensure(back == net && network_to_bytes(&back) == net_bytes, || {
        "network roundtrip not bitwise".into()
    })?;

    let corrupt = |bytes: &[u8]| -> [Vec<u8>; 3] {
        let mut magic = bytes.to_vec();
        magic[0] ^= 0xff;
        let mut version = bytes.to_vec();
        version[4..8].copy_from_slice(&99u32.to_le_bytes());
        let mut crc = bytes.to_vec();
        let mid = bytes.len() / 2;
        crc[mid] ^= 0x01;
        [magic, version, crc]
    };
    let kinds = |r: [Result<(), FormatError>; 3]| {
        matches!(
            r,
            [
                Err(FormatError::BadMagic { .. }),
                Err(FormatError::UnsupportedVersion(99)),
                Err(FormatError::ChecksumMismatch { .. })
            ]
        )
    };
    let model_bytes = model_to_bytes(&matrix);
    let [a, b, c] = corrupt(&model_bytes);
    ensure(
        kinds([a, b, c].map(|v| model_from_bytes(&v).map(|_| ()))),
        || "model corruption errors not distinct".into(),
    )?;
    let [a, b, c] = corrupt(&net_bytes);
    ensure(
        kinds([a, b, c].map(|v| network_from_bytes(&v).map(|_| ()))),
        || "network corruption errors not distinct".into(),
    )?;
    Ok("2 model modes + network bitwise; magic/version/CRC distinct".into())
}

fn pgm(m: &Matrix) -> Vec<u8> {
    let px = m
        .as_slice()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    encode_pnm(&ImageU8::new(m.cols(), m.rows(), 1, px).unwrap())
}

async fn service_checks() -> Outcome {
    let ds = synth_dataset(9, 6, SynthKind::Images { side: 16 }, 4.0);
    let cfg = CnnTraining {
        epochs: 2,
        ..CnnTraining::default()
    };
    let (model, net) = train_pipeline(&ds, TrainMode::Vector { rank: 3 }, &cfg, 9).unwrap();
    let id = model_id(&model_to_bytes(&model));
    let pipeline = Pipeline::new(model, net).map_err(|e| e.to_string())?;
    let image = pgm(&ds.images().unwrap()[7]);
    let local = ClassifyResponse::from_result(
        &pipeline
            .classify_image_bytes(&image)
            .map_err(|e| e.to_string())?,
        pipeline.model().class_labels(),
        &id,
    );

    let state = Arc::new(hosvd_service::AppState::new(pipeline, id));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .map_err(|e| e.to_string())?;
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(hosvd_service::serve(listener, state, 1 << 20, async {
        let _ = stopped.await;
    }));

    let http = reqwest::Client::new();
    let health = http
        .get(format!("{base}/v1/health"))
        .send()
        .await
        .map_err(|e| e.to_string())?;
    ensure(health.status() == 200, || {
        format!("health returned {}", health.status())
    })?;

    let remote = hosvd_client::Client::new(&base)
        .classify(image.clone())
        .await
        .map_err(|e| e.to_string())?;
    ensure(remote == local, || {
        format!("remote {remote:?} != local {local:?}")
    })?;

    let bad = http
        .post(format!("{base}/v1/classify"))
        .body("not an image")
        .send()
        .await
        .map_err(|e| e.to_string())?;
    ensure(bad.status() == 400, || {
        format!("malformed body returned {}", bad.status())
    })?;

    let tasks: Vec<_> = (0..50)
        .map(|_| {
            let (http, url, body) = (http.clone(), format!("{base}/v1/classify"), image.clone());
            tokio::spawn(async move {
                let r = http
                    .post(url)
                    .body(body)
                    .send()
                    .await
                    .map_err(|e| e.to_string())?;
                r.bytes().await.map_err(|e| e.to_string())
            })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        bodies.push(t.await.map_err(|e| e.to_string())??);
    }
    ensure(bodies.windows(2).all(|w| w[0] == w[1]), || {
        "concurrent bodies differ".into()
    })?;

    let _ = stop.send(());
    server
        .await
        .map_err(|e| e.to_string())?
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "label {}, 50 identical bodies, 400 on malformed, health 200",
        local.label
    ))
}

fn criterion_9() -> Outcome {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap()
        .block_on(service_checks())
}

fn criterion_10() -> Outcome {
    let mut rng = SplitMix64::new(10);

    for trial in 0..100 {
        let d = 4 + rng.below(8);
        let samples: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..d).map(|_| rng.normal()).collect())
            .collect();
        let labels: Vec<u32> = (0..10).map(|i| i % 2).collect();
        let model = train_vector_mode_from_samples(&samples, &labels, 1 + rng.below(4)).unwrap();
        let z: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let alpha = 10f64.powf(rng.uniform(-3.0, 3.0)) * if rng.below(2) == 0 { 1.0 } else { -1.0 };
        let scaled: Vec<f64> = z.iter().map(|x| alpha * x).collect();
        let a = model.classify(Sample::Vector(&z)).unwrap();
        let b = model.classify(Sample::Vector(&scaled)).unwrap();
        ensure(a.label == b.label, || {
            format!("scale trial {trial}: label changed under α={alpha}")
        })?;
    }

    for trial in 0..100 {
        let groups: Vec<Vec<f64>> = (0..2 + rng.below(4))
            .map(|_| {
                let shift = rng.normal();
                (0..2 + rng.below(8))
                    .map(|_| shift + rng.normal())
                    .collect()
            })
            .collect();
        let (shift, scale) = (rng.uniform(-1e3, 1e3), 10f64.powf(rng.uniform(-3.0, 3.0)));
        let moved: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| g.iter().map(|y| scale * y + shift).collect())
            .collect();
        let (a, b) = (
            anova_oneway(&groups).unwrap(),
            anova_oneway(&moved).unwrap(),
        );
        let rel = ((a.f - b.f) / a.f).abs();
        ensure(rel <= 1e-6, || {
            format!("ANOVA trial {trial}: F {} vs {}", a.f, b.f)
        })?;
    }

    for trial in 0..100 {
        let k = 2 + rng.below(5);
        let mut labels = Vec::new();
        for class in 0..2u32 {
            labels.extend(std::iter::repeat_n(class, k + rng.below(30)));
        }
        rng.shuffle(&mut labels);
        let folds = stratified_kfold(&labels, k, rng.next_u64()).unwrap();
        let mut seen: Vec<usize> = folds.concat();
        seen.sort_unstable();
        ensure(seen == (0..labels.len()).collect::<Vec<_>>(), || {
            format!("fold trial {trial}: not a partition")
        })?;
        for class in 0..2u32 {
            let total = labels.iter().filter(|&&l| l == class).count();
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            ensure(hi - lo <= 1 && *lo == total / k, || {
                format!("fold trial {trial}: class {class} counts {counts:?}")
            })?;
        }
    }
    Ok("100 scale trials, 100 ANOVA trials, 100 fold trials".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("HOSVD exactness", criterion_1),
        ("orthogonality and all-orthogonality", criterion_2),
        ("truncation bound", criterion_3),
        ("oracle equivalences", criterion_4),
        ("gradient check", criterion_5),
        ("surrogate classification", criterion_6),
        ("end-to-end pipeline", criterion_7),
        ("serialization", criterion_8),
        ("service", criterion_9),
        ("invariance suite", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
