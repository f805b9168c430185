//! 3D real FFT on an `n³` box with pruning for fields supported on a corner.
//!
//! Spectra are stored `[k1][k2][k3]` with `k3` in `0..n/2+1` (fastest).

use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub type C64 = Complex<f64>;

const COLUMN_CHUNK: usize = 32;

pub struct Fft3 {
    n: usize,
    nh: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

/// Smallest even `m ≥ min` whose only prime factors are 2, 3 and 5.
pub fn fast_size(min: usize) -> usize {
    let mut m = min.max(2);
    loop {
        if m % 2 == 0 {
            let mut k = m;
            for p in [2, 3, 5] {
                while k % p == 0 {
                    k /= p;
                }
            }
            if k == 1 {
                return m;
            }
        }
        m += 1;
    }
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        assert!(n % 2 == 0, "FFT box size must be even");
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        Self {
            n,
            nh: n / 2 + 1,
            r2c: rp.plan_fft_forward(n),
            c2r: rp.plan_fft_inverse(n),
            fwd: cp.plan_fft_forward(n),
            inv: cp.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half(&self) -> usize {
        self.nh
    }

    pub fn spectrum_len(&self) -> usize {
        self.n * self.n * self.nh
    }

    /// Forward transform of a field given on `[0, m)³` (zero elsewhere), `m ≤ n`.
    pub fn forward(&self, src: &[f64], m: usize) -> Vec<C64> {
        let (n, nh) = (self.n, self.nh);
        assert!(m <= n && src.len() == m * m * m);
        let mut out = vec![C64::new(0.0, 0.0); self.spectrum_len()];

        let mut line = self.r2c.make_input_vec();
        let mut rscratch = self.r2c.make_scratch_vec();
        for i1 in 0..m {
            for i2 in 0..m {
                line[..m].copy_from_slice(&src[(i1 * m + i2) * m..(i1 * m + i2 + 1) * m]);
                line[m..].iter_mut().for_each(|x| *x = 0.0);
                let dst = &mut out[(i1 * n + i2) * nh..(i1 * n + i2 + 1) * nh];
                self.r2c.process_with_scratch(&mut line, dst, &mut rscratch).expect("r2c sizes");
            }
        }

        let mut scratch = vec![C64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        let mut slab = vec![C64::new(0.0, 0.0); n * nh];
        for i1 in 0..m {
            let block = &mut out[i1 * n * nh..(i1 + 1) * n * nh];
            transpose(block, &mut slab, n, nh);
            self.fwd.process_with_scratch(&mut slab, &mut scratch);
            transpose(&slab, block, nh, n);
        }

        self.axis1(&mut out, self.fwd.as_ref(), &mut scratch, n);
        out
    }

    /// Inverse transform scaled by `1/n³`, returning the values on `[0, m)³`.
    pub fn inverse(&self, spec: &mut [C64], m: usize) -> Vec<f64> {
        let (n, nh) = (self.n, self.nh);
        assert!(m <= n && spec.len() == self.spectrum_len());
        let mut scratch = vec![C64::new(0.0, 0.0); self.inv.get_inplace_scratch_len()];
        self.axis1(spec, self.inv.as_ref(), &mut scratch, m);

        let mut slab = vec![C64::new(0.0, 0.0); n * nh];
        let mut kept = vec![C64::new(0.0, 0.0); m * m * nh];
        for i1 in 0..m {
            let block = &spec[i1 * n * nh..(i1 + 1) * n * nh];
            transpose(block, &mut slab, n, nh);
            self.inv.process_with_scratch(&mut slab, &mut scratch);
            // slab is [k3][i2]; keep i2 < m
            for k3 in 0..nh {
                for i2 in 0..m {
                    kept[(i1 * m + i2) * nh + k3] = slab[k3 * n + i2];
                }
            }
        }

        let scale = 1.0 / (n * n * n) as f64;
        let mut line = self.c2r.make_output_vec();
        let mut cscratch = self.c2r.make_scratch_vec();
        let mut out = vec![0.0; m * m * m];
        for row in 0..m * m {
            let src = &mut kept[row * nh..(row + 1) * nh];
            src[0].im = 0.0;
            src[nh - 1].im = 0.0;
            self.c2r.process_with_scratch(src, &mut line, &mut cscratch).expect("c2r sizes");
            for (o, x) in out[row * m..(row + 1) * m].iter_mut().zip(&line[..m]) {
                *o = x * scale;
            }
        }
        out
    }

    /// Transforms along the slowest axis for every `(k2, k3)` column, in place.
    /// Rows at or beyond `keep_rows` are left stale.
    fn axis1(&self, data: &mut [C64], fft: &dyn Fft<f64>, scratch: &mut [C64], keep_rows: usize) {
        let n = self.n;
        let stride = n * self.nh;
        let mut buf = vec![C64::new(0.0, 0.0); COLUMN_CHUNK * n];
        let mut c0 = 0;
        while c0 < stride {
            let width = COLUMN_CHUNK.min(stride - c0);
            for i1 in 0..n {
                let row = &data[i1 * stride + c0..i1 * stride + c0 + width];
                for (cc, x) in row.iter().enumerate() {
                    buf[cc * n + i1] = *x;
                }
            }
            fft.process_with_scratch(&mut buf[..width * n], scratch);
            for i1 in 0..keep_rows {
                let row = &mut data[i1 * stride + c0..i1 * stride + c0 + width];
                for (cc, x) in row.iter_mut().enumerate() {
                    *x = buf[cc * n + i1];
                }
            }
            c0 += width;
        }
    }
}

/// `dst[c][r] = src[r][c]` for an `rows × cols` source.
fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fast_sizes() {
        assert_eq!(fast_size(24), 24);
        assert_eq!(fast_size(32), 32);
        assert_eq!(fast_size(34), 36);
        assert_eq!(fast_size(98), 100);
        assert_eq!(fast_size(7), 8);
    }

    fn naive_dft_bin(src: &[f64], m: usize, n: usize, k: [usize; 3]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        let w = -2.0 * std::f64::consts::PI / n as f64;
        for i1 in 0..m {
            for i2 in 0..m {
                for i3 in 0..m {
                    let ph = w * ((k[0] * i1 + k[1] * i2 + k[2] * i3) % n) as f64;
                    acc += C64::from_polar(src[(i1 * m + i2) * m + i3], ph);
                }
            }
        }
        acc
    }

    #[test]
    fn forward_matches_naive_dft() {
        let (m, n) = (3, 6);
        let f = Fft3::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src: Vec<f64> = (0..m * m * m).map(|_| rng.random::<f64>()).collect();
        let spec = f.forward(&src, m);
        for k1 in 0..n {
            for k2 in 0..n {
                for k3 in 0..f.half() {
                    let a = spec[(k1 * n + k2) * f.half() + k3];
                    let b = naive_dft_bin(&src, m, n, [k1, k2, k3]);
                    assert!((a - b).norm() < 1e-12, "{k1} {k2} {k3}");
                }
            }
        }
    }

    #[test]
    fn pruned_round_trip() {
        let (m, n) = (5, 12);
        let f = Fft3::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src: Vec<f64> = (0..m * m * m).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut spec = f.forward(&src, m);
        let back = f.inverse(&mut spec, m);
        for (a, b) in src.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn circular_convolution_of_padded_fields_is_linear() {
        let (m, n) = (4, 8);
        let f = Fft3::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..m * m * m).map(|_| rng.random::<f64>()).collect();
        // kernel on signed offsets, stored wrapped into the full box
        let mut k = vec![0.0; n * n * n];
        let signed = |i: usize| if i >= n / 2 { i as isize - n as isize } else { i as isize };
        for i in 0..n * n * n {
            let (i1, i2, i3) = (signed(i / (n * n)), signed((i / n) % n), signed(i % n));
            if i1.abs() < m as isize && i2.abs() < m as isize && i3.abs() < m as isize {
                k[i] = 1.0 / (1.0 + (i1 * i1 + 2 * i2 * i2 + 3 * i3 * i3) as f64) + 0.1 * i1 as f64;
            }
        }
        let sa = f.forward(&a, m);
        let sk = f.forward(&k, n);
        let mut prod: Vec<C64> = sa.iter().zip(&sk).map(|(x, y)| x * y).collect();
        let conv = f.inverse(&mut prod, m);
        let kval = |d: [isize; 3]| {
            let w = |x: isize| ((x + n as isize) % n as isize) as usize;
            k[(w(d[0]) * n + w(d[1])) * n + w(d[2])]
        };
        for i in 0..m * m * m {
            let (i1, i2, i3) = ((i / (m * m)) as isize, ((i / m) % m) as isize, (i % m) as isize);
            let mut acc = 0.0;
            for j in 0..m * m * m {
                let (j1, j2, j3) = ((j / (m * m)) as isize, ((j / m) % m) as isize, (j % m) as isize);
                acc += kval([i1 - j1, i2 - j2, i3 - j3]) * a[j];
            }
            assert!((acc - conv[i]).abs() < 1e-12);
        }
    }
}
