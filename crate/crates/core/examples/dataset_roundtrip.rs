//! Collect a fragment dataset, store it in the line format, read it back and
//! fit it.

use std::io::BufReader;

use tomocut::circuit::gen_cluster_unitary;
use tomocut::cut::{apply_cut, CutSpec};
use tomocut::noise::NoiseSpec;
use tomocut::tomo::{collect_fragment_data, fit_lin, ConditionalDataset, Shots};

fn main() -> tomocut::Result<()> {
    let circuit = gen_cluster_unitary(4, 3, 8)?;
    let frags = apply_cut(&circuit, &CutSpec::middle_layer(4, 3)?, 12)?;
    let data = collect_fragment_data(&frags[1], &NoiseSpec::readout_only(0.01)?, Shots::Finite(500), 2)?;
    let text = data.to_text();
    println!("{}", text.lines().take(8).collect::<Vec<_>>().join("\n"));
    println!("... {} lines", text.lines().count());
    let back = ConditionalDataset::read_from(BufReader::new(text.as_bytes()))?;
    assert_eq!(back, data);
    let fit = fit_lin(&back, None)?;
    for (s, t) in fit.tensors.iter().enumerate() {
        println!("s={s:02b} trace {:.4} min eigenvalue {:+.2e}", t.trace(), t.min_eigenvalue());
    }
    Ok(())
}
