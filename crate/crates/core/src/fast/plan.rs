//! Precomputed kernel spectra and the contraction program for the FFT evaluator.
//!
//! The squared channel functions expand into mode-pair products
//! `g_c² = Σ_{j,k} (L_j L_k)(|u|) (M_j M_k)(|v|) (N_j N_k)(|v'|)`.
//! Pairs whose three radial products coincide (up to scale) share a group,
//! so identical work is never repeated across pairs or channels. Each group
//! contributes through the term table to a fixed set of convolutions:
//! kernel spectra are keyed by the `L` pair, source fields by the `N` pair
//! and output fields by the `M` pair.

use std::collections::HashMap;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::fft3::{fast_size, Fft3};
use super::terms::{Beta, Contraction, TermTable};
use crate::error::{Error, Result};
use crate::grid::VelocityGrid;
use crate::kernels::{SsKernel, UnivariateBasis};

/// A symmetric product of two radial shapes.
#[derive(Debug, Clone)]
pub(crate) struct RadialPair(UnivariateBasis, UnivariateBasis);

impl RadialPair {
    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        self.0.eval(x) * self.1.eval(x)
    }
}

/// Component of a `β` field, canonicalized (`a ≤ b` for matrices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct BetaComp {
    pub beta: Beta,
    pub a: usize,
    pub b: usize,
}

impl BetaComp {
    fn new(beta: Beta, a: usize, b: usize) -> Self {
        match beta.rank() {
            0 => Self { beta, a: 0, b: 0 },
            1 => Self { beta, a, b: 0 },
            _ => Self { beta, a: a.min(b), b: a.max(b) },
        }
    }

    /// Odd fields have purely imaginary spectra.
    fn odd(&self) -> bool {
        self.beta.rank() == 1
    }
}

/// Source fields, all multiplied by an `N` pair and the interior-masked `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum SourceKind {
    /// `|v'|^q f`
    F0(u8),
    /// `|v'|^q f D_b`
    F1(u8, usize),
    /// `|v'|^q v'_b f`
    G0(u8, usize),
    /// `|v'|^q f (v'·D)`
    G1(u8),
}

/// Output fields, later multiplied by an `M` pair and `|v|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum OutputKind {
    /// adds to `A_ab`
    A(u8, usize, usize),
    /// adds to `b_a`
    B(u8, usize),
    /// adds `v_a X_b` to `A_ab`
    X(u8, usize),
    /// adds `v_a Y` to `b_a`
    Y(u8),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Contribution {
    pub kernel: usize,
    pub source: usize,
    pub coeff: f64,
}

/// Everything needed to evaluate the flux for one grid and one separable kernel.
pub struct ConvolutionPlan {
    grid: VelocityGrid,
    pub(crate) fft: Fft3,
    kernel: SsKernel,
    pub(crate) kernel_spectra: Vec<Vec<f64>>,
    pub(crate) kernel_odd: Vec<bool>,
    kernel_beta: Vec<Beta>,
    pub(crate) sources: Vec<(usize, SourceKind)>,
    pub(crate) outputs: Vec<(usize, OutputKind)>,
    pub(crate) program: Vec<Vec<Contribution>>,
    /// `M` pair values per node.
    pub(crate) m_nodes: Vec<Vec<f64>>,
    /// `N` pair values per node.
    pub(crate) n_nodes: Vec<Vec<f64>>,
    raw_pairs: [usize; 2],
    groups: usize,
}

impl std::fmt::Debug for ConvolutionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionPlan")
            .field("n0", &self.grid.n0())
            .field("padded", &self.fft.n())
            .field("groups", &self.groups)
            .field("kernel_spectra", &self.kernel_spectra.len())
            .field("sources", &self.sources.len())
            .field("outputs", &self.outputs.len())
            .finish()
    }
}

#[derive(Default)]
struct Interner {
    keys: HashMap<Vec<u64>, usize>,
    pairs: Vec<RadialPair>,
}

impl Interner {
    fn intern(&mut self, a: &UnivariateBasis, b: &UnivariateBasis) -> usize {
        let (ka, kb) = (a.key(), b.key());
        let (first, second, key) = if ka <= kb {
            (a, b, [ka, vec![u64::MAX], kb].concat())
        } else {
            (b, a, [kb, vec![u64::MAX], ka].concat())
        };
        if let Some(&i) = self.keys.get(&key) {
            return i;
        }
        let i = self.pairs.len();
        self.pairs.push(RadialPair(first.clone(), second.clone()));
        self.keys.insert(key, i);
        i
    }
}

fn index_of<K: std::hash::Hash + Eq + Copy>(map: &mut HashMap<K, usize>, list: &mut Vec<K>, key: K) -> usize {
    *map.entry(key).or_insert_with(|| {
        list.push(key);
        list.len() - 1
    })
}

impl ConvolutionPlan {
    pub fn new(grid: &VelocityGrid, kernel: &SsKernel, table: &TermTable) -> Result<Self> {
        let n0 = grid.n0();
        let n = fast_size(2 * n0);
        let (mut lp, mut mp, mut np) = (Interner::default(), Interner::default(), Interner::default());

        // group weights per channel
        let mut groups: HashMap<(usize, usize, usize), [f64; 2]> = HashMap::new();
        let mut group_order: Vec<(usize, usize, usize)> = Vec::new();
        let mut raw_pairs = [0usize; 2];
        for ch in 1..=2 {
            let split: Vec<_> = kernel
                .expanded(ch)
                .iter()
                .map(|e| {
                    let (sl, l) = e.l.split_scale();
                    let (sm, m) = e.m.split_scale();
                    let (sn, nn) = e.n.split_scale();
                    (sl * sm * sn, l, m, nn)
                })
                .collect();
            for j in 0..split.len() {
                for k in j..split.len() {
                    raw_pairs[ch - 1] += 1;
                    let mult = if j == k { 1.0 } else { 2.0 };
                    let w = mult * split[j].0 * split[k].0;
                    if w == 0.0 {
                        continue;
                    }
                    let key = (
                        lp.intern(&split[j].1, &split[k].1),
                        mp.intern(&split[j].2, &split[k].2),
                        np.intern(&split[j].3, &split[k].3),
                    );
                    let entry = groups.entry(key).or_insert_with(|| {
                        group_order.push(key);
                        [0.0; 2]
                    });
                    entry[ch - 1] += w;
                }
            }
        }

        let mut kernel_map = HashMap::new();
        let mut kernel_list: Vec<(usize, BetaComp)> = Vec::new();
        let mut source_map = HashMap::new();
        let mut sources: Vec<(usize, SourceKind)> = Vec::new();
        let mut output_map = HashMap::new();
        let mut outputs: Vec<(usize, OutputKind)> = Vec::new();
        let mut merged: HashMap<(usize, usize, usize), f64> = HashMap::new();
        let mut merged_order: Vec<(usize, usize, usize)> = Vec::new();

        let mut add = |o: (usize, OutputKind), kc: (usize, BetaComp), s: (usize, SourceKind), c: f64| {
            let oi = index_of(&mut output_map, &mut outputs, o);
            let ki = index_of(&mut kernel_map, &mut kernel_list, kc);
            let si = index_of(&mut source_map, &mut sources, s);
            let e = merged.entry((oi, ki, si)).or_insert_with(|| {
                merged_order.push((oi, ki, si));
                0.0
            });
            *e += c;
        };

        for key in &group_order {
            let (li, mi, ni) = *key;
            let w = groups[key];
            for t in table.terms() {
                let c = w[t.channel - 1] * t.sign * t.coeff;
                if c == 0.0 {
                    continue;
                }
                let p = t.alpha.power();
                let q = t.gamma.power();
                let kc = |a, b| (li, BetaComp::new(t.beta, a, b));
                match t.contraction() {
                    Contraction::BetaBeta => {
                        for a in 0..3 {
                            for b in 0..3 {
                                add((mi, OutputKind::A(p, a, b)), kc(a, b), (ni, SourceKind::F0(q)), c);
                                add((mi, OutputKind::B(p, a)), kc(a, b), (ni, SourceKind::F1(q, b)), c);
                            }
                        }
                    }
                    Contraction::AlphaBeta => {
                        for b in 0..3 {
                            add((mi, OutputKind::X(p, b)), kc(b, 0), (ni, SourceKind::F0(q)), c);
                            add((mi, OutputKind::Y(p)), kc(b, 0), (ni, SourceKind::F1(q, b)), c);
                        }
                    }
                    Contraction::AlphaGamma => {
                        for b in 0..3 {
                            add((mi, OutputKind::X(p, b)), kc(0, 0), (ni, SourceKind::G0(q, b)), c);
                        }
                        add((mi, OutputKind::Y(p)), kc(0, 0), (ni, SourceKind::G1(q)), c);
                    }
                    Contraction::BetaGamma => {
                        for a in 0..3 {
                            for b in 0..3 {
                                add((mi, OutputKind::A(p, a, b)), kc(a, 0), (ni, SourceKind::G0(q, b)), c);
                            }
                            add((mi, OutputKind::B(p, a)), kc(a, 0), (ni, SourceKind::G1(q)), c);
                        }
                    }
                }
            }
        }

        let mut program = vec![Vec::new(); outputs.len()];
        for key in &merged_order {
            let c = merged[key];
            if c != 0.0 {
                program[key.0].push(Contribution { kernel: key.1, source: key.2, coeff: c });
            }
        }

        let fft = Fft3::new(n);
        let h = grid.spacing();
        let kernel_spectra: Vec<Vec<f64>> = kernel_list
            .par_iter()
            .map(|&(li, comp)| kernel_spectrum(&fft, n0, h, &lp.pairs[li], comp))
            .collect::<Result<_>>()?;
        let kernel_odd = kernel_list.iter().map(|(_, c)| c.odd()).collect();
        let kernel_beta = kernel_list.iter().map(|(_, c)| c.beta).collect();

        let speeds = grid.speeds();
        let m_nodes = mp.pairs.iter().map(|p| speeds.iter().map(|&s| p.eval(s)).collect()).collect();
        let n_nodes = np.pairs.iter().map(|p| speeds.iter().map(|&s| p.eval(s)).collect()).collect();

        Ok(Self {
            grid: *grid,
            fft,
            kernel: kernel.clone(),
            kernel_spectra,
            kernel_odd,
            kernel_beta,
            sources,
            outputs,
            program,
            m_nodes,
            n_nodes,
            raw_pairs,
            groups: group_order.len(),
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &SsKernel {
        &self.kernel
    }

    pub fn padded_size(&self) -> usize {
        self.fft.n()
    }

    /// Mode pairs `j ≤ k` per channel before deduplication.
    pub fn mode_pairs(&self, channel: usize) -> usize {
        self.raw_pairs[channel - 1]
    }

    /// Distinct `(L, M, N)` pair groups after deduplication.
    pub fn group_count(&self) -> usize {
        self.groups
    }

    pub fn kernel_spectrum_count(&self) -> usize {
        self.kernel_spectra.len()
    }

    /// Kernel spectra stored for a given `β` shape.
    pub fn kernel_spectra_for(&self, beta: Beta) -> usize {
        self.kernel_beta.iter().filter(|b| **b == beta).count()
    }

    /// Forward and inverse transforms per flux evaluation.
    pub fn transforms_per_call(&self) -> (usize, usize) {
        (self.sources.len(), self.outputs.len())
    }
}

/// `L_j L_k(|u|) β(u)` on signed offsets `|m_k| < n0`, transformed; keeps the
/// real part for even fields and the imaginary part for odd ones.
fn kernel_spectrum(fft: &Fft3, n0: usize, h: f64, lpair: &RadialPair, comp: BetaComp) -> Result<Vec<f64>> {
    let n = fft.n();
    let signed = |i: usize| if i >= n / 2 { i as isize - n as isize } else { i as isize };
    let lim = n0 as isize;
    let mut field = vec![0.0; n * n * n];
    for (idx, x) in field.iter_mut().enumerate() {
        let m = [signed(idx / (n * n)), signed((idx / n) % n), signed(idx % n)];
        if m.iter().any(|k| k.abs() >= lim) {
            continue;
        }
        let u = Vector3::new(m[0] as f64 * h, m[1] as f64 * h, m[2] as f64 * h);
        if m == [0, 0, 0] {
            continue;
        }
        *x = lpair.eval(u.norm()) * comp.beta.component(&u, comp.a, comp.b);
    }
    let spec = fft.forward(&field, n);
    let odd = comp.odd();
    let (mut kept, mut other) = (0.0f64, 0.0f64);
    let out: Vec<f64> = spec
        .iter()
        .map(|z| {
            let (k, o) = if odd { (z.im, z.re) } else { (z.re, z.im) };
            kept = kept.max(k.abs());
            other = other.max(o.abs());
            k
        })
        .collect();
    if other > 1e-9 * kept.max(1e-300) {
        return Err(Error::Numerical(format!(
            "kernel field {comp:?} lost its parity (residual {other:e} vs {kept:e})"
        )));
    }
    Ok(out)
}
