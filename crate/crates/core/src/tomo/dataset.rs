//! Conditional tomography datasets: collection, subsampling and a
//! line-oriented text format.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cut::{decode_setting, encode_setting, fragment_circuit_instance, Fragment};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::qmat::{CMatrix, ChoiTensor};
use crate::seed;
use crate::sim::{evolve_operator, outcome_distribution, sample_counts, simulate_density_matrix};

/// Largest number of cut wires collected by default.
pub const DEFAULT_MAX_CUT_WIRES: usize = 4;

/// Shots per setting, or exact outcome probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Finite(u64),
    Exact,
}

impl std::fmt::Display for Shots {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Shots::Finite(n) => write!(f, "{n}"),
            Shots::Exact => f.write_str("exact"),
        }
    }
}

impl std::str::FromStr for Shots {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(Shots::Exact);
        }
        match s.parse::<u64>() {
            Ok(0) | Err(_) => Err(Error::Parse(format!("shots must be a positive integer or 'exact', got {s:?}"))),
            Ok(n) => Ok(Shots::Finite(n)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ShotsRepr {
    Count(u64),
    Word(String),
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Finite(n) => ShotsRepr::Count(*n),
            Shots::Exact => ShotsRepr::Word("exact".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = match ShotsRepr::deserialize(d)? {
            ShotsRepr::Count(n) => n.to_string(),
            ShotsRepr::Word(w) => w,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Counts for every (setting, cut outcome, conditioning outcome) of one
/// fragment. In exact mode the counts are probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDataset {
    pub fragment_id: usize,
    pub k_in: usize,
    pub k_out: usize,
    pub m: usize,
    pub shots: Shots,
    /// `counts[setting][o * 2^m + s]`.
    counts: Vec<Vec<f64>>,
    included: Vec<bool>,
}

impl ConditionalDataset {
    pub fn new(
        fragment_id: usize,
        k_in: usize,
        k_out: usize,
        m: usize,
        shots: Shots,
        counts: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let settings = 4usize.pow(k_in as u32) * 3usize.pow(k_out as u32);
        let bins = 1usize << (k_out + m);
        if counts.len() != settings || counts.iter().any(|c| c.len() != bins) {
            return Err(Error::Dimension(format!(
                "dataset needs {settings} settings of {bins} bins"
            )));
        }
        if counts.iter().flatten().any(|&c| !(c >= 0.0 && c.is_finite())) {
            return Err(Error::Parameter("counts must be finite and non-negative".into()));
        }
        Ok(Self {
            fragment_id,
            k_in,
            k_out,
            m,
            shots,
            counts,
            included: vec![true; settings],
        })
    }

    pub fn num_settings(&self) -> usize {
        self.counts.len()
    }

    pub fn num_conditioning_outcomes(&self) -> usize {
        1 << self.m
    }

    pub fn num_cut_outcomes(&self) -> usize {
        1 << self.k_out
    }

    pub fn is_included(&self, setting: usize) -> bool {
        self.included[setting]
    }

    pub fn included_settings(&self) -> Vec<usize> {
        (0..self.num_settings()).filter(|&s| self.included[s]).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.included.iter().all(|&x| x)
    }

    pub fn count(&self, setting: usize, o: usize, s: usize) -> f64 {
        self.counts[setting][o * self.num_conditioning_outcomes() + s]
    }

    pub fn setting_total(&self, setting: usize) -> f64 {
        self.counts[setting].iter().sum()
    }

    /// Empirical probability of `(o, s)` within a setting.
    pub fn frequency(&self, setting: usize, o: usize, s: usize) -> f64 {
        let total = self.setting_total(setting);
        if total > 0.0 {
            self.count(setting, o, s) / total
        } else {
            0.0
        }
    }

    /// Keeps `ceil(f * settings)` settings chosen uniformly without
    /// replacement; counts of dropped settings are cleared.
    pub fn subsample(&self, f: f64, seed: u64) -> Result<Self> {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Parameter(format!("fraction {f} not in (0, 1]")));
        }
        let n = self.num_settings();
        let keep = ((f * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let mut out = self.clone();
        if keep >= n {
            return Ok(out);
        }
        let mut rng = seed::stream(seed, &[self.fragment_id as u64]);
        let chosen = index::sample(&mut rng, n, keep);
        out.included = vec![false; n];
        for i in chosen.iter() {
            out.included[i] = true;
        }
        for (setting, row) in out.counts.iter_mut().enumerate() {
            if !out.included[setting] {
                row.iter_mut().for_each(|c| *c = 0.0);
            }
        }
        Ok(out)
    }

    /// Writes the line format.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "tomocut-dataset 1").unwrap();
        writeln!(out, "fragment {}", self.fragment_id).unwrap();
        writeln!(out, "k_in {}", self.k_in).unwrap();
        writeln!(out, "k_out {}", self.k_out).unwrap();
        writeln!(out, "m {}", self.m).unwrap();
        writeln!(out, "shots {}", self.shots).unwrap();
        let excluded: Vec<String> = (0..self.num_settings())
            .filter(|&s| !self.included[s])
            .map(|s| s.to_string())
            .collect();
        writeln!(out, "excluded {}", excluded.join(" ")).unwrap();
        let bits = |v: usize, width: usize| -> String {
            if width == 0 {
                "-".into()
            } else {
                (0..width).map(|j| if (v >> (width - 1 - j)) & 1 == 1 { '1' } else { '0' }).collect()
            }
        };
        let digits = |v: &[usize]| -> String {
            if v.is_empty() {
                "-".into()
            } else {
                v.iter().map(|d| char::from(b'0' + *d as u8)).collect()
            }
        };
        for setting in self.included_settings() {
            let (preps, bases) = decode_setting(setting, self.k_in, self.k_out);
            for o in 0..self.num_cut_outcomes() {
                for s in 0..self.num_conditioning_outcomes() {
                    writeln!(
                        out,
                        "{} {} {} {} {}",
                        digits(&preps),
                        digits(&bases),
                        bits(o, self.k_out),
                        bits(s, self.m),
                        self.count(setting, o, s)
                    )
                    .unwrap();
                }
            }
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Parses the line format.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Parse(format!("missing {what} line")))
        };
        if next("header")?.trim() != "tomocut-dataset 1" {
            return Err(Error::Parse("unknown dataset header".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = next(key)?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::Parse(format!("expected {key:?}, got {line:?}")))?;
            Ok(rest.trim().to_string())
        };
        let num = |s: String, key: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Parse(format!("bad {key} value {s:?}")))
        };
        let fragment_id = num(field("fragment")?, "fragment")?;
        let k_in = num(field("k_in")?, "k_in")?;
        let k_out = num(field("k_out")?, "k_out")?;
        let m = num(field("m")?, "m")?;
        let shots: Shots = field("shots")?.parse()?;
        let excluded: Vec<usize> = field("excluded")?
            .split_whitespace()
            .map(|t| num(t.to_string(), "excluded"))
            .collect::<Result<_>>()?;
        let settings = 4usize.pow(k_in as u32) * 3usize.pow(k_out as u32);
        let bins = 1usize << (k_out + m);
        let mut counts = vec![vec![0.0; bins]; settings];
        let parse_digits = |t: &str, len: usize, radix: usize| -> Result<Vec<usize>> {
            if len == 0 {
                return if t == "-" { Ok(vec![]) } else { Err(Error::Parse(format!("expected '-', got {t:?}"))) };
            }
            if t.len() != len {
                return Err(Error::Parse(format!("{t:?} should have {len} digits")));
            }
            t.chars()
                .map(|ch| {
                    ch.to_digit(10)
                        .map(|d| d as usize)
                        .filter(|&d| d < radix)
                        .ok_or_else(|| Error::Parse(format!("bad digit {ch:?} in {t:?}")))
                })
                .collect()
        };
        let fold_bits = |v: Vec<usize>| v.into_iter().fold(0, |acc, b| (acc << 1) | b);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 5 {
                return Err(Error::Parse(format!("record needs 5 fields: {line:?}")));
            }
            let preps = parse_digits(toks[0], k_in, 4)?;
            let bases = parse_digits(toks[1], k_out, 3)?;
            let o = fold_bits(parse_digits(toks[2], k_out, 2)?);
            let s = fold_bits(parse_digits(toks[3], m, 2)?);
            let c: f64 = toks[4]
                .parse()
                .map_err(|_| Error::Parse(format!("bad count {:?}", toks[4])))?;
            counts[encode_setting(&preps, &bases)][o * (1 << m) + s] = c;
        }
        let mut data = Self::new(fragment_id, k_in, k_out, m, shots, counts)?;
        for e in excluded {
            if e >= settings {
                return Err(Error::Parse(format!("excluded setting {e} out of range")));
            }
            data.included[e] = false;
        }
        Ok(data)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }
}

/// Simulates every tomography setting of a fragment and records counts
/// (or exact probabilities). Settings run in parallel; each draws from its
/// own substream of `seed`.
pub fn collect_fragment_data(
    frag: &Fragment,
    noise: &NoiseSpec,
    shots: Shots,
    seed: u64,
) -> Result<ConditionalDataset> {
    collect_fragment_data_bounded(frag, noise, shots, seed, DEFAULT_MAX_CUT_WIRES)
}

pub fn collect_fragment_data_bounded(
    frag: &Fragment,
    noise: &NoiseSpec,
    shots: Shots,
    seed: u64,
    max_cut_wires: usize,
) -> Result<ConditionalDataset> {
    let (k_in, k_out, m) = (frag.num_in(), frag.num_out(), frag.num_conditioning());
    if k_in + k_out > max_cut_wires {
        return Err(Error::Unsupported(format!(
            "fragment {} has {} cut wires, limit is {max_cut_wires}",
            frag.id,
            k_in + k_out
        )));
    }
    let rows: Vec<Vec<f64>> = (0..frag.num_settings())
        .into_par_iter()
        .map(|setting| -> Result<Vec<f64>> {
            let (preps, bases) = decode_setting(setting, k_in, k_out);
            let circuit = fragment_circuit_instance(frag, &preps, &bases)?;
            let rho = simulate_density_matrix(&circuit, noise)?;
            let probs = outcome_distribution(&rho, noise.readout.as_ref());
            let values: Vec<f64> = match shots {
                Shots::Exact => probs,
                Shots::Finite(n) => {
                    let mut rng = seed::stream(seed, &[frag.id as u64, setting as u64]);
                    sample_counts(&probs, n, &mut rng).into_iter().map(|c| c as f64).collect()
                }
            };
            let mut row = vec![0.0; 1 << (k_out + m)];
            for (local, v) in values.into_iter().enumerate() {
                let (o, s) = frag.split_outcome(local);
                row[o * (1 << m) + s] += v;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    ConditionalDataset::new(frag.id, k_in, k_out, m, shots, rows)
}

/// Exact conditional tensors `T(s)` of a fragment under gate noise (readout
/// excluded), obtained by evolving every input matrix unit.
pub fn exact_conditional_tensors(frag: &Fragment, noise: &NoiseSpec) -> Result<Vec<ChoiTensor>> {
    let n = frag.num_qubits();
    let (k_in, k_out, m) = (frag.num_in(), frag.num_out(), frag.num_conditioning());
    let (d_in, d_out) = (1usize << k_in, 1usize << k_out);
    let dim = 1usize << n;
    let place = |bits: usize, wires: &[usize]| -> usize {
        let k = wires.len();
        wires.iter().enumerate().fold(0, |acc, (j, &q)| {
            acc | (((bits >> (k - 1 - j)) & 1) << (n - 1 - q))
        })
    };
    let in_wires: Vec<usize> = frag.cut_inputs.iter().map(|w| w.local_qubit).collect();
    let out_wires: Vec<usize> = frag.cut_outputs.iter().map(|w| w.local_qubit).collect();
    let cond_wires: Vec<usize> = frag.conditioning.iter().map(|w| w.local_qubit).collect();
    let noise = noise.without_readout();
    let mut blocks = vec![CMatrix::zeros(d_in * d_out, d_in * d_out); 1 << m];
    for a in 0..d_in {
        for b in 0..d_in {
            let mut x = CMatrix::zeros(dim, dim);
            x[(place(a, &in_wires), place(b, &in_wires))] = crate::qmat::ONE;
            let y = evolve_operator(&frag.circuit, &noise, x)?;
            for (s, block) in blocks.iter_mut().enumerate() {
                let cs = place(s, &cond_wires);
                for u in 0..d_out {
                    for v in 0..d_out {
                        let val = y[(cs | place(u, &out_wires), cs | place(v, &out_wires))];
                        block[(a * d_out + u, b * d_out + v)] = val;
                    }
                }
            }
        }
    }
    blocks
        .into_iter()
        .map(|blk| ChoiTensor::new(k_in, k_out, blk))
        .collect()
}

/// Exact outcome probabilities `Tr[B T(s)]` implied by a set of tensors; used
/// as an oracle for collected data.
pub fn probabilities_from_tensors(
    basis: &super::TomoBasis,
    tensors: &[ChoiTensor],
    setting: usize,
    o: usize,
) -> Vec<f64> {
    let b = basis.element(setting, o);
    tensors
        .iter()
        .map(|t| crate::qmat::trace(&(&b * t.matrix())).re)
        .collect()
}
