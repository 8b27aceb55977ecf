//! Embedded verification battery: encoding against a brute-force oracle,
//! finite-difference gradient checks, metric identities and SVM KKT checks.
//! Output depends only on the code, never on timing or environment.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{generate_synthetic, BlobSpec, Label, SnippetMeta, SynthSpec, FRAMES, GRID};
use crate::encoding::{encode, CHANNELS};
use crate::eval::{ci95_mean, t_test, Metrics, TTestMode};
use crate::models::{svm_train, Kernel, KernelKind, SvmConfig};
use crate::nn::{bce_loss, CellActivation, LayerSpec, Network, NetworkSpec, SampleSet, Tensor};

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Adds a fixed offset to every analytic gradient, which the gradient
    /// group must detect.
    pub perturb_gradients: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for GroupResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {:<10} {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub groups: Vec<GroupResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }
}

pub fn run(options: &SelftestOptions) -> SelftestReport {
    SelftestReport {
        groups: vec![encoding_group(), gradient_group(options), metrics_group(), svm_group()],
    }
}

fn group(name: &'static str, passed: bool, detail: String) -> GroupResult {
    GroupResult { name, passed, detail }
}

/// Straightforward per-frame re-derivation of the motion signals.
fn oracle_encode(frames: &[[f64; GRID * GRID]]) -> Vec<[f64; CHANNELS]> {
    let regions = [(1usize, 12usize), (13, 29)];
    let mut raw = vec![[0.0; CHANNELS]; frames.len()];
    for (t, grid) in frames.iter().enumerate() {
        for (r, &(first, last)) in regions.iter().enumerate() {
            let (mut s, mut si, mut sj) = (0.0, 0.0, 0.0);
            for row in first..=last {
                for col in 4..=29 {
                    let v = grid[(row - 1) * GRID + col - 1];
                    s += v;
                    si += (row - first + 1) as f64 * v;
                    sj += (col - 3) as f64 * v;
                }
            }
            let m = (last - first + 1) as f64;
            let cop = if s == 0.0 {
                [(m + 1.0) / 2.0, 13.5, 0.0]
            } else {
                [si / s, sj / s, s / (m * 26.0)]
            };
            raw[t][3 * r..3 * r + 3].copy_from_slice(&cop);
        }
    }
    let n = raw.len() as isize;
    let smooth: Vec<[f64; CHANNELS]> = (0..n)
        .map(|t| {
            let mut out = [0.0; CHANNELS];
            for (c, o) in out.iter_mut().enumerate() {
                let (mut sum, mut count) = (0.0, 0.0);
                for u in t - 2..=t + 2 {
                    if (0..n).contains(&u) {
                        sum += raw[u as usize][c];
                        count += 1.0;
                    }
                }
                *o = sum / count;
            }
            out
        })
        .collect();
    let min = |c: usize| smooth.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
    let max = |c: usize| smooth.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
    let span = |cs: &[usize]| cs.iter().map(|&c| max(c) - min(c)).fold(0.0, f64::max);
    let (pos, pres) = (span(&[0, 1, 3, 4]), span(&[2, 5]));
    smooth
        .iter()
        .map(|r| {
            let mut out = [0.0; CHANNELS];
            for c in 0..CHANNELS {
                let d = if c == 2 || c == 5 { pres } else { pos };
                out[c] = if d > 0.0 { (r[c] - min(c)) / d } else { 0.0 };
            }
            out
        })
        .collect()
}

fn random_spec(rng: &mut ChaCha8Rng) -> SynthSpec {
    let blobs = (0..rng.gen_range(1..=3))
        .map(|_| BlobSpec {
            center: [rng.gen_range(3.0..27.0), rng.gen_range(6.0..27.0)],
            radius: rng.gen_range(0.0..4.0),
            amplitude: [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)],
            frequency: rng.gen_range(0.2..8.0),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            weight: rng.gen_range(0.3..1.0),
        })
        .collect();
    SynthSpec {
        blobs,
        pressure_scale: rng.gen_range(20.0..250.0),
        noise: rng.gen_range(0.0..4.0),
        seed: rng.gen(),
    }
}

fn encoding_group() -> GroupResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let mut worst: f64 = 0.0;
    let count = 20;
    for i in 0..count {
        let meta = SnippetMeta {
            snippet_id: format!("selftest-{i}"),
            infant_id: "selftest".into(),
            session: crate::data::Session::T1,
        };
        let snippet = match generate_synthetic(&random_spec(&mut rng), meta, Label::FmPlus) {
            Ok(s) => s,
            Err(e) => return group("encoding", false, format!("generator failed: {e}")),
        };
        let frames: Vec<_> = snippet.frames.iter().map(|f| f.to_f64()).collect();
        let expected = oracle_encode(&frames);
        let got = encode(&snippet);
        for (a, b) in got.rows().iter().zip(&expected) {
            for c in 0..CHANNELS {
                worst = worst.max((a[c] - b[c]).abs());
            }
        }
        if got.len() != FRAMES {
            worst = f64::INFINITY;
        }
    }
    group(
        "encoding",
        worst <= 1e-12,
        format!("{count} random snippets vs brute force, max deviation {worst:.1e}"),
    )
}

fn gradient_cases() -> Vec<(&'static str, NetworkSpec, usize)> {
    let head = |w: usize| [LayerSpec::Dense { inputs: w, units: 1 }, LayerSpec::Sigmoid];
    let spec = |name: &str, input_shape: Vec<usize>, mut layers: Vec<LayerSpec>, w: usize| {
        layers.extend(head(w));
        NetworkSpec {
            name: name.into(),
            input_shape,
            layers,
        }
    };
    let lstm = |activation| {
        vec![
            LayerSpec::Lstm {
                inputs: 3,
                units: 3,
                return_sequences: true,
                activation,
            },
            LayerSpec::BatchNorm { features: 3 },
            LayerSpec::Dropout { rate: 0.1 },
            LayerSpec::Lstm {
                inputs: 3,
                units: 2,
                return_sequences: false,
                activation,
            },
        ]
    };
    vec![
        (
            "dense",
            spec(
                "dense",
                vec![4],
                vec![
                    LayerSpec::Dense { inputs: 4, units: 3 },
                    LayerSpec::Relu,
                    LayerSpec::BatchNorm { features: 3 },
                    LayerSpec::Dropout { rate: 0.1 },
                ],
                3,
            ),
            5,
        ),
        (
            "conv",
            spec(
                "conv",
                vec![7, 2],
                vec![
                    LayerSpec::Conv1d {
                        in_channels: 2,
                        filters: 3,
                        kernel: 3,
                    },
                    LayerSpec::Relu,
                    LayerSpec::BatchNorm { features: 3 },
                    LayerSpec::Dropout { rate: 0.1 },
                    LayerSpec::GlobalAvgPool,
                ],
                3,
            ),
            3,
        ),
        ("lstm-relu", spec("lstm", vec![4, 3], lstm(CellActivation::Relu), 2), 3),
        ("lstm-tanh", spec("lstm", vec![4, 3], lstm(CellActivation::Tanh), 2), 3),
    ]
}

fn gradient_group(options: &SelftestOptions) -> GroupResult {
    const H: f64 = 1e-4;
    let mut worst: f64 = 0.0;
    let mut worst_case = "";
    let mut checked = 0;
    for (seed, (name, spec, batch)) in gradient_cases().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed as u64 + 40);
        let mut net = match Network::new(spec.clone(), &mut rng) {
            Ok(n) => n,
            Err(e) => return group("gradients", false, format!("{name}: {e}")),
        };
        for p in net.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        let n: usize = spec.sample_len();
        let data = (0..batch * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut shape = vec![batch];
        shape.extend_from_slice(&spec.input_shape);
        let x = Tensor::new(shape, data).expect("consistent shape");
        let y: Vec<f64> = (0..batch).map(|i| (i % 2) as f64).collect();
        let loss = |net: &Network| {
            let (out, _) = net
                .forward_train(&x, &mut ChaCha8Rng::seed_from_u64(7))
                .expect("valid batch");
            bce_loss(out.data(), &y)
        };
        let (_, mut grads, _) = net
            .loss_and_grad(&x, &y, &mut ChaCha8Rng::seed_from_u64(7))
            .expect("valid batch");
        if options.perturb_gradients {
            grads.iter_mut().for_each(|g| *g += 1e-3);
        }
        for (i, &g) in grads.iter().enumerate() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + H;
            let up = loss(&net);
            net.params_mut()[i] = orig - H;
            let down = loss(&net);
            net.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * H);
            let err = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6);
            if err > worst {
                worst = err;
                worst_case = name;
            }
            checked += 1;
        }
    }
    let detail = format!("{checked} parameters, worst relative error {worst:.1e} ({worst_case})");
    group("gradients", worst < 1e-4, detail)
}

fn metrics_group() -> GroupResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0xba);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (tp, tn, fp, fn_) = (
            rng.gen_range(1..400),
            rng.gen_range(1..400),
            rng.gen_range(0..400),
            rng.gen_range(0..400),
        );
        let m = Metrics::from_counts(tp, tn, fp, fn_);
        let tpr = tp as f64 / (tp + fn_) as f64;
        let tnr = tn as f64 / (tn + fp) as f64;
        worst = worst.max((m.ba.unwrap_or(f64::NAN) - (tpr + tnr) / 2.0).abs());
    }
    let undefined = Metrics::from_counts(3, 0, 0, 1).ba.is_none();
    let ci_ok = ci95_mean(&[1.0, 2.0, 3.0, 4.0, 5.0])
        .map(|(lo, hi)| (lo - 1.037).abs() < 1e-3 && (hi - 4.963).abs() < 1e-3)
        .unwrap_or(false);
    let t_ok = t_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], TTestMode::Paired).ok() == Some(1.0)
        && t_test(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], TTestMode::Paired).ok() == Some(0.0);
    let passed = worst < 1e-15 && undefined && ci_ok && t_ok;
    group(
        "metrics",
        passed,
        format!("1000 random tables, max BA deviation {worst:.1e}; undefined-rate, interval and t-test conventions"),
    )
}

fn svm_group() -> GroupResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5f0);
    let mut problems = 0;
    let mut failures = Vec::new();
    for trial in 0..6 {
        let mut set = SampleSet::new(vec![2]);
        let separable = trial % 2 == 0;
        for i in 0..20 {
            let label = (i % 2) as f64;
            let shift = if label > 0.5 { 1.0 } else { -1.0 } * if separable { 2.0 } else { 0.4 };
            let point = [shift + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            set.push(&point, label).expect("2 features");
        }
        let kind = [
            KernelKind::Rbf,
            KernelKind::Polynomial { degree: 1 },
            KernelKind::Polynomial { degree: 2 },
        ][trial / 2];
        let c = if separable { 1000.0 } else { 1.0 };
        let model = match Kernel::new(kind, 0.5).and_then(|k| svm_train(&set, c, k, &SvmConfig::default())) {
            Ok(m) => m,
            Err(e) => {
                failures.push(format!("trial {trial}: {e}"));
                continue;
            }
        };
        problems += 1;
        let bounded = model.dual_coef.iter().all(|a| a.abs() <= c);
        let balanced = model.dual_coef.iter().sum::<f64>().abs() < 1e-3;
        // A homogeneous quadratic kernel cannot split clusters mirrored through the origin.
        let must_fit = separable && kind != KernelKind::Polynomial { degree: 2 };
        let fits =
            !must_fit || (0..set.len()).all(|i| model.predict(set.input(i)).is_positive() == (set.targets()[i] > 0.5));
        if !(bounded && balanced && model.converged && fits) {
            failures.push(format!(
                "trial {trial} (bounded {bounded}, balanced {balanced}, converged {}, fits {fits})",
                model.converged
            ));
        }
    }
    let detail = if failures.is_empty() {
        format!("{problems} toy problems feasible and converged, separable RBF/linear ones fit exactly")
    } else {
        format!("failed: {}", failures.join(", "))
    };
    group("svm", failures.is_empty(), detail)
}
