use tomocut::circuit::gen_cluster_unitary;
use tomocut::cut::{apply_cut, CutSpec, Fragment, DEFAULT_MAX_FRAGMENT_QUBITS};
use tomocut::noise::{make_assignment, NoiseSpec};
use tomocut::qmat::{max_abs_diff, ChoiTensor, CMatrix};
use tomocut::tomo::*;

fn fragments(n: usize, seed: u64) -> Vec<Fragment> {
    let c = gen_cluster_unitary(n, 3, seed).unwrap();
    apply_cut(&c, &CutSpec::middle_layer(n, 3).unwrap(), DEFAULT_MAX_FRAGMENT_QUBITS).unwrap()
}

fn max_distance(a: &[ChoiTensor], b: &[ChoiTensor]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.distance(y)).fold(0.0, f64::max)
}

#[test]
fn all_fitters_recover_exact_tensors() {
    for frag in fragments(4, 3) {
        let truth = exact_conditional_tensors(&frag, &NoiseSpec::ideal()).unwrap();
        let data = collect_fragment_data(&frag, &NoiseSpec::ideal(), Shots::Exact, 0).unwrap();
        let lin = fit_lin(&data, None).unwrap();
        assert!(max_distance(&lin.tensors, &truth) < 1e-10);
        let cls = fit_cls(&data, &ClsOptions::default()).unwrap();
        assert!(max_distance(&cls.tensors, &truth) < 1e-6, "{:?}", cls.diagnostics);
        let mem = fit_memcls(&data, &make_assignment(0.0).unwrap(), &ClsOptions::default()).unwrap();
        assert!(max_distance(&mem.tensors, &truth) < 1e-6);
        assert!(max_distance(&mem.tensors, &cls.tensors) < 1e-8);
    }
}

#[test]
fn memcls_inverts_readout_at_exact_data() {
    let noise = NoiseSpec::readout_only(0.05).unwrap();
    for frag in fragments(4, 5) {
        let truth = exact_conditional_tensors(&frag, &NoiseSpec::ideal()).unwrap();
        let data = collect_fragment_data(&frag, &noise, Shots::Exact, 0).unwrap();
        let mem = fit_memcls(&data, &noise.assignment(), &ClsOptions::default()).unwrap();
        assert!(max_distance(&mem.tensors, &truth) < 1e-6, "{:?}", mem.diagnostics);
        let cls = fit_cls(&data, &ClsOptions::default()).unwrap();
        assert!(max_distance(&cls.tensors, &truth) > 1e-3);
    }
}

#[test]
fn cls_output_is_feasible_under_shot_noise() {
    let noise = NoiseSpec::readout_only(0.05).unwrap();
    for frag in fragments(8, 1) {
        let data = collect_fragment_data(&frag, &noise, Shots::Finite(200), 4).unwrap();
        for fit in [
            fit_cls(&data, &ClsOptions::default()).unwrap(),
            fit_memcls(&data, &noise.assignment(), &ClsOptions::default()).unwrap(),
        ] {
            let mut sum = CMatrix::zeros(2, 2);
            for t in &fit.tensors {
                assert!(t.min_eigenvalue() >= -1e-8);
                sum += t.partial_trace_out();
            }
            assert!(max_abs_diff(&sum, &CMatrix::identity(2, 2)) < 1e-7, "{sum}");
            let total: f64 = fit.tensors.iter().map(|t| t.trace()).sum();
            assert!((total - 2.0).abs() < 2e-2);
        }
    }
}
