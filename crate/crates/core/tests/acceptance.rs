//! Acceptance criteria. Each test writes one `CRITERION n: PASS|FAIL` line
//! straight to stdout, so the lines show up without `--nocapture`.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use tomocut::circuit::{gen_cluster_unitary, haar_unitary, CircuitIR};
use tomocut::cut::{apply_cut, CutSpec, CutWire, Fragment, DEFAULT_MAX_FRAGMENT_QUBITS};
use tomocut::harness::{run_experiment, ExperimentConfig, Row};
use tomocut::knit::{full_distribution, trace_distance, CutGraph};
use tomocut::mitigation::{biased_dominant_eigenvalue, coherent_mismatch, pta_bias_threshold};
use tomocut::noise::{make_channel, pauli_twirl, ChannelKind, NoiseSpec};
use tomocut::qmat::{eig_hermitian, max_abs_diff, CMatrix, CVector};
use tomocut::seed;
use tomocut::sim::ideal_distribution;
use tomocut::tomo::{collect_fragment_data, exact_conditional_tensors, fit, fit_lin, ClsOptions, Fitter, Shots};

fn report(n: usize, pass: bool, detail: &str) {
    let line = format!("CRITERION {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn sweep(json: &str) -> Vec<Row> {
    let cfg = ExperimentConfig::from_json(json).unwrap();
    let rows = run_experiment(&cfg).unwrap();
    let failed: Vec<&Row> = rows.iter().filter(|r| !r.is_ok()).collect();
    assert!(failed.is_empty(), "failed rows: {failed:?}");
    rows
}

fn mean_td(rows: &[Row], n: usize, params: &str, fitter: &str, devt: bool, fraction: f64) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.n == n && r.noise_params == params && r.fitter == fitter && r.devt == devt && r.fraction == fraction)
        .map(|r| r.trace_distance.unwrap())
        .collect();
    assert!(!v.is_empty(), "no rows for n={n} {params} {fitter} devt={devt} f={fraction}");
    v.iter().sum::<f64>() / v.len() as f64
}

fn params_of(rows: &[Row], needle: &str) -> String {
    rows.iter()
        .find(|r| r.noise_params.contains(needle))
        .map(|r| r.noise_params.clone())
        .unwrap_or_else(|| panic!("no noise label containing {needle}"))
}

#[test]
fn criterion_01_exact_reconstruction() {
    let start = Instant::now();
    let circuit = gen_cluster_unitary(4, 3, 11).unwrap();
    let frags = apply_cut(&circuit, &CutSpec::middle_layer(4, 3).unwrap(), DEFAULT_MAX_FRAGMENT_QUBITS).unwrap();
    let graph = CutGraph::from_fragments(&frags).unwrap();
    let ideal = ideal_distribution(&circuit).unwrap();
    let data: Vec<_> = frags
        .iter()
        .map(|f| collect_fragment_data(f, &NoiseSpec::ideal(), Shots::Exact, 0).unwrap())
        .collect();
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for fitter in [Fitter::Lin, Fitter::Cls, Fitter::Memcls] {
        let tensors: Vec<_> = data
            .iter()
            .map(|d| fit(fitter, d, None, &ClsOptions::default()).unwrap().tensors)
            .collect();
        let dist = full_distribution(&tensors, &graph).unwrap();
        let td = trace_distance(&dist.probabilities, &ideal).unwrap();
        detail.push_str(&format!("{}={td:.2e} ", fitter.name()));
        worst = worst.max(td);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 10.0;
    report(1, pass, &format!("trace distances {detail}({secs:.2}s)"));
    assert!(pass);
}

#[test]
fn criterion_02_pta_amplitude_damping_table() {
    // (gamma, p_x, p_z, b, threshold) with the precision each value is stated to.
    let table = [
        (0.001, (2.5e-4, 0.05e-4), (6e-8, 0.5e-8), (-0.9999, 0.5e-4), (0.249975, 0.5e-6)),
        (0.01, (2.5e-3, 0.05e-3), (6e-6, 0.5e-6), (-0.999, 0.5e-3), (0.24975, 0.5e-5)),
    ];
    let mut pass = true;
    let mut detail = String::new();
    for (gamma, px_row, pz_row, b_row, th_row) in table {
        let ad = make_channel(&ChannelKind::AmplitudeDamping { gamma, qubits: 1 }).unwrap();
        let pta = pauli_twirl(&ad).unwrap();
        let (px, py, pz) = (pta.get("X").unwrap(), pta.get("Y").unwrap(), pta.get("Z").unwrap());
        // Closed forms must hold to machine precision.
        let exact = (px - gamma / 4.0).abs() < 1e-15
            && (py - px).abs() < 1e-15
            && (pz - (1.0 - (1.0 - gamma).sqrt()).powi(2) / 4.0).abs() < 1e-15;
        let b = pz / px - 1.0;
        let th = pta_bias_threshold(b).unwrap();
        let checks = [
            ("p_x", px, px_row),
            ("p_z", pz, pz_row),
            ("b", b, b_row),
            ("threshold", th, th_row),
        ];
        detail.push_str(&format!("gamma={gamma}: closed-form={exact}"));
        pass &= exact;
        for (name, got, (want, tol)) in checks {
            let ok = (got - want).abs() <= tol;
            pass &= ok;
            detail.push_str(&format!(" {name}={got:.6e}[{}]", if ok { "ok" } else { "mismatch" }));
        }
        detail.push_str("; ");
    }
    report(2, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_biased_eigenvalue_formula() {
    let start = Instant::now();
    let mut rng = seed::stream(3, &[]);
    let mut worst = 0.0f64;
    let samples = 2000;
    for _ in 0..samples {
        let u = haar_unitary(2, &mut rng);
        let (alpha, beta): (Complex64, Complex64) = (u[(0, 0)], u[(1, 0)]);
        let p = rng.random_range(0.0..=0.05);
        let b = rng.random_range(-1.0..=1.0);
        let psi = CVector::from_vec(vec![alpha, beta]);
        let rho = &psi * psi.adjoint();
        let channel = make_channel(&ChannelKind::BiasedPauli { p, b, qubits: 1 }).unwrap();
        let diff = &rho - channel.apply(&rho).unwrap();
        let numeric = eig_hermitian(&diff).unwrap().max();
        let closed = biased_dominant_eigenvalue(p, b, alpha, beta).unwrap();
        worst = worst.max((numeric - closed).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && secs < 5.0;
    report(3, pass, &format!("{samples} samples, max |closed - numeric| = {worst:.2e} ({secs:.2}s)"));
    assert!(pass);
}

/// One-qubit channel fragment: a cut wire in, a random gate, a cut wire out.
fn channel_fragment(seed_value: u64) -> Fragment {
    let mut circuit = CircuitIR::new(1);
    circuit
        .push(haar_unitary(2, &mut seed::stream(seed_value, &[])), &[0], 0)
        .unwrap();
    let wire = |cut| CutWire { cut, local_qubit: 0 };
    Fragment {
        id: 0,
        circuit,
        cut_inputs: vec![wire(0)],
        cut_outputs: vec![wire(1)],
        conditioning: vec![],
    }
}

#[test]
fn criterion_04_lin_under_readout_is_convex_mixture() {
    let frag = channel_fragment(4);
    let truth = exact_conditional_tensors(&frag, &NoiseSpec::ideal()).unwrap().remove(0);
    // The outcome-flipped element of every basis is I - Pi, so the error
    // tensor is (Tr_out T) kron I - T.
    let identity_out = CMatrix::identity(2, 2);
    let t_err = truth.partial_trace_out().kronecker(&identity_out) - truth.matrix();
    let mut worst = 0.0f64;
    for p in [0.01, 0.05] {
        let data = collect_fragment_data(&frag, &NoiseSpec::readout_only(p).unwrap(), Shots::Exact, 0).unwrap();
        let lin = fit_lin(&data, None).unwrap();
        let mixture = truth.matrix().scale(1.0 - p) + t_err.scale(p);
        worst = worst.max(max_abs_diff(lin.tensors[0].matrix(), &mixture));
        // Same mixture written as a partial depolarization of the output.
        let depol = truth.matrix().scale(1.0 - 2.0 * p) + truth.partial_trace_out().kronecker(&identity_out).scale(p);
        worst = worst.max(max_abs_diff(&mixture, &depol));
    }
    let pass = worst <= 1e-8;
    report(4, pass, &format!("max elementwise deviation {worst:.2e} at p_meas in {{0.01, 0.05}}"));
    assert!(pass);
}

fn random_density(dim: usize, rank: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(dim, rank, |_, _| {
        Complex64::new(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale(tr)
}

#[test]
fn criterion_05_mismatch_bound() {
    let mut rng = seed::stream(5, &[]);
    let samples = 3000;
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for k in 0..samples {
        let dim = [2, 4, 8][k % 3];
        let psi: CVector = haar_unitary(dim, &mut rng).column(0).into_owned();
        let rank = rng.random_range(1..=dim);
        let err = random_density(dim, rank, &mut rng);
        let p = rng.random_range(1e-4..=0.2);
        let rho = (&psi * psi.adjoint()).scale(1.0 - p) + err.scale(p);
        let mu1 = eig_hermitian(&err).unwrap().max();
        let delta = (1.0 / (1.0 - p) - 1.0) * mu1;
        let bound = delta.powi(2) / 4.0 + delta.powi(4) / 16.0;
        let c = coherent_mismatch(&rho, &psi).unwrap();
        if c > bound {
            violations += 1;
        }
        worst_ratio = worst_ratio.max(c / bound);
    }
    let pass = violations == 0;
    report(
        5,
        pass,
        &format!("{samples} mixtures, {violations} violations, max c/bound = {worst_ratio:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_devt_on_depolarizing() {
    let start = Instant::now();
    let rows = sweep(
        r#"{
            "circuit": {"sizes": [4, 8], "seed": 6},
            "noise": [
                {"two_qubit": {"kind": "depolarizing", "p": 0.01}, "one_qubit": {"kind": "depolarizing", "p": 0.0001, "qubits": 1}, "p_meas": 0.05},
                {"two_qubit": {"kind": "depolarizing", "p": 0.02}, "one_qubit": {"kind": "depolarizing", "p": 0.0001, "qubits": 1}, "p_meas": 0.05}
            ],
            "shots": 10000,
            "fitters": ["LIN", "CLS"],
            "trials": 5,
            "seed": 6,
            "baselines": false
        }"#,
    );
    let mut pass = true;
    let mut detail = String::new();
    for n in [4, 8] {
        for p in ["p=0.01", "p=0.02"] {
            let params = params_of(&rows, &format!("depolarizing({p}"));
            let cls = mean_td(&rows, n, &params, "CLS", false, 1.0);
            let cls_devt = mean_td(&rows, n, &params, "CLS", true, 1.0);
            let lin_devt = mean_td(&rows, n, &params, "LIN", true, 1.0);
            let ok = cls_devt < cls && (lin_devt - cls_devt).abs() <= 0.1 * cls_devt;
            pass &= ok;
            detail.push_str(&format!(
                "[n={n} {p}: CLS={cls:.4} CLS+DEVT={cls_devt:.4} LIN+DEVT={lin_devt:.4}] "
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    report(6, pass, &format!("{detail}({secs:.1}s)"));
    assert!(pass);
}

#[test]
fn criterion_07_biased_pauli_degradation() {
    let rows = sweep(
        r#"{
            "circuit": {"sizes": [4, 8], "seed": 7},
            "noise": [
                {"two_qubit": {"kind": "amplitude-damping", "gamma": 0.01}, "twirl": "pta"},
                {"two_qubit": {"kind": "biased-pauli", "p": 0.01, "b": 0.1}, "one_qubit": {"kind": "depolarizing", "p": 0.0001, "qubits": 1}, "p_meas": 0.05}
            ],
            "shots": 10000,
            "fitters": ["CLS"],
            "trials": 5,
            "seed": 7,
            "baselines": false
        }"#,
    );
    let pta = params_of(&rows, "amplitude-damping");
    let biased = params_of(&rows, "biased-pauli");
    let mut pass = true;
    let mut detail = String::new();
    for n in [4, 8] {
        let (a_off, a_on) = (mean_td(&rows, n, &pta, "CLS", false, 1.0), mean_td(&rows, n, &pta, "CLS", true, 1.0));
        let (b_off, b_on) = (
            mean_td(&rows, n, &biased, "CLS", false, 1.0),
            mean_td(&rows, n, &biased, "CLS", true, 1.0),
        );
        pass &= a_on >= a_off && b_on < b_off;
        detail.push_str(&format!(
            "[n={n} PTA(AD 0.01): CLS={a_off:.4} CLS+DEVT={a_on:.4}; biased b=0.1: CLS={b_off:.4} CLS+DEVT={b_on:.4}] "
        ));
    }
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_readout_mitigation_trend() {
    let rows = sweep(
        r#"{
            "circuit": {"sizes": [8], "seed": 8},
            "noise": [{"p_meas": 0.05}],
            "shots": 10000,
            "fitters": ["CLS", "MEMCLS"],
            "trials": 5,
            "seed": 8,
            "baselines": false
        }"#,
    );
    let params = rows[0].noise_params.clone();
    let cls = mean_td(&rows, 8, &params, "CLS", false, 1.0);
    let mem = mean_td(&rows, 8, &params, "MEMCLS", false, 1.0);
    let cls_devt = mean_td(&rows, 8, &params, "CLS", true, 1.0);
    let pass = mem < cls && cls_devt <= mem;
    report(8, pass, &format!("CLS={cls:.4} MEMCLS={mem:.4} CLS+DEVT={cls_devt:.4}"));
    assert!(pass);
}

#[test]
fn criterion_09_partial_data_trend() {
    let rows = sweep(
        r#"{
            "circuit": {"sizes": [4], "seed": 9, "vary_per_trial": false},
            "noise": [{}],
            "shots": 10000,
            "fitters": ["LIN", "CLS"],
            "devt": [false],
            "fractions": [0.6, 1.0],
            "trials": 10,
            "seed": 9,
            "baselines": false
        }"#,
    );
    let params = rows[0].noise_params.clone();
    let cls_part = mean_td(&rows, 4, &params, "CLS", false, 0.6);
    let cls_full = mean_td(&rows, 4, &params, "CLS", false, 1.0);
    let lin_part = mean_td(&rows, 4, &params, "LIN", false, 0.6);
    let lin_full = mean_td(&rows, 4, &params, "LIN", false, 1.0);
    let pass = cls_part <= 1.15 * cls_full && lin_part > 1.15 * lin_full;
    report(
        9,
        pass,
        &format!("CLS f=0.6 {cls_part:.4} vs f=1 {cls_full:.4}; LIN f=0.6 {lin_part:.4} vs f=1 {lin_full:.4}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_sweep_determinism() {
    let base = r#"{
        "circuit": {"sizes": [4], "seed": 10},
        "noise": [{"two_qubit": {"kind": "depolarizing", "p": 0.01}, "p_meas": 0.05}],
        "shots": 2000,
        "fitters": ["LIN", "CLS", "MEMCLS"],
        "fractions": [0.6, 1.0],
        "trials": 3,
        "seed": 10,
        "cache_datasets": true
    }"#;
    let run = |workers: usize| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::from_json(base).unwrap();
        cfg.workers = Some(workers);
        cfg.output_dir = dir.path().to_path_buf();
        let (path, _) = tomocut::harness::run_sweep_in(&cfg, dir.path()).unwrap();
        std::fs::read(path).unwrap()
    };
    let (a, b, c) = (run(1), run(1), run(4));
    let pass = !a.is_empty() && a == b && a == c;
    report(10, pass, &format!("{} CSV bytes, identical across repeated and 1- vs 4-worker runs", a.len()));
    assert!(pass);
}
