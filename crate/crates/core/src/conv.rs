//! FFT-backed weighted sums `Σ_j W_ij v_j` over a rectangular node region.
//!
//! The radial weights are a symmetric Toeplitz (block-Toeplitz in 2D) operator, so
//! sums over a region are linear convolutions; the sign-split multiplier separates
//! into two convolutions.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::kernel::quadrature::sgn;
use crate::kernel::{Multiplier, WeightTable};

pub(crate) struct Convolver<'a> {
    table: &'a WeightTable,
    origin: [usize; 2],
    len: [usize; 2],
    pad: [usize; 2],
    khat: Vec<Complex64>,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
    profile: Vec<f64>,
    base: f64,
    amp: f64,
}

impl<'a> Convolver<'a> {
    /// Region = bounding box of `nodes` (must be nonempty).
    pub fn for_nodes(table: &'a WeightTable, nodes: &[usize]) -> Self {
        let l = table.lattice();
        let mut lo = [usize::MAX; 2];
        let mut hi = [0usize; 2];
        for &i in nodes {
            let c = l.coords(i);
            for a in 0..2 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        if nodes.is_empty() {
            lo = [0, 0];
            hi = [0, 0];
        }
        Self::new(table, lo, [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1])
    }

    pub fn new(table: &'a WeightTable, origin: [usize; 2], len: [usize; 2]) -> Self {
        let l = table.lattice();
        let m = l.cells();
        let dim = l.dim();
        let len = if dim == 1 { [len[0], 1] } else { len };
        let pad = [
            (2 * len[0]).next_power_of_two(),
            if dim == 1 { 1 } else { (2 * len[1]).next_power_of_two() },
        ];
        let mut planner = FftPlanner::<f64>::new();
        let fwd = [planner.plan_fft_forward(pad[0]), planner.plan_fft_forward(pad[1])];
        let inv = [planner.plan_fft_inverse(pad[0]), planner.plan_fft_inverse(pad[1])];
        let radial = table.radial();
        let mut k = vec![Complex64::new(0.0, 0.0); pad[0] * pad[1]];
        let wrap = |d: usize, p: usize, l: usize| -> Option<usize> {
            // position d in [0, p) represents offset d or d - p
            if d < l {
                Some(d)
            } else if p - d < l {
                Some(p - d)
            } else {
                None
            }
        };
        for y in 0..pad[1] {
            let Some(ay) = wrap(y, pad[1], len[1]) else { continue };
            for x in 0..pad[0] {
                let Some(ax) = wrap(x, pad[0], len[0]) else { continue };
                k[x + pad[0] * y] = Complex64::new(radial[ax + m * ay], 0.0);
            }
        }
        let (base, amp) = match table.kernel().multiplier() {
            Multiplier::Constant { value } => (value, 0.0),
            Multiplier::SignSplit { base, amp } => (base, amp),
        };
        let profile = if amp != 0.0 {
            (0..len[0]).map(|x| sgn(l.axis_coord(0, origin[0] + x))).collect()
        } else {
            Vec::new()
        };
        let mut c = Self {
            table,
            origin,
            len,
            pad,
            khat: Vec::new(),
            fwd,
            inv,
            profile,
            base,
            amp,
        };
        c.fft2(&mut k, false);
        c.khat = k;
        c
    }

    pub fn region_len(&self) -> usize {
        self.len[0] * self.len[1]
    }

    /// Region-local index of a lattice node, if inside the region.
    pub fn local(&self, node: usize) -> Option<usize> {
        let c = self.table.lattice().coords(node);
        let (x, y) = (c[0].checked_sub(self.origin[0])?, c[1].checked_sub(self.origin[1])?);
        if x < self.len[0] && y < self.len[1] {
            Some(x + self.len[0] * y)
        } else {
            None
        }
    }

    fn fft2(&self, buf: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let (px, py) = (self.pad[0], self.pad[1]);
        for row in buf.chunks_exact_mut(px) {
            plans[0].process(row);
        }
        if py > 1 {
            let mut col = vec![Complex64::new(0.0, 0.0); py];
            for x in 0..px {
                for y in 0..py {
                    col[y] = buf[x + px * y];
                }
                plans[1].process(&mut col);
                for y in 0..py {
                    buf[x + px * y] = col[y];
                }
            }
        }
    }

    fn radial_conv(&self, v: &[f64]) -> Vec<f64> {
        let (px, py) = (self.pad[0], self.pad[1]);
        let mut buf = vec![Complex64::new(0.0, 0.0); px * py];
        for y in 0..self.len[1] {
            for x in 0..self.len[0] {
                buf[x + px * y].re = v[x + self.len[0] * y];
            }
        }
        self.fft2(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.khat) {
            *b *= k;
        }
        self.fft2(&mut buf, true);
        let scale = 1.0 / (px * py) as f64;
        let mut out = vec![0.0; self.region_len()];
        for y in 0..self.len[1] {
            for x in 0..self.len[0] {
                out[x + self.len[0] * y] = buf[x + px * y].re * scale;
            }
        }
        out
    }

    /// `out_k = Σ_j W_kj v_j` with `k, j` ranging over the region (local indexing).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.region_len());
        let mut out = self.radial_conv(v);
        if self.amp == 0.0 {
            out.iter_mut().for_each(|o| *o *= self.base);
            return out;
        }
        let lx = self.len[0];
        let sv: Vec<f64> = v.iter().enumerate().map(|(k, x)| x * self.profile[k % lx]).collect();
        let so = self.radial_conv(&sv);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.base * *o + self.amp * self.profile[k % lx] * so[k];
        }
        out
    }
}
