//! Vectorised sweeps over observations for the weighted spectral sums.
//!
//! Observations are laid out in vector lanes, each group padded with zero entries.
//! A padded entry has `Z = 0` and `Delta = 0`, so it adds nothing to `p`, `q` or `sigma^2`.

use std::ops::Range;

use num_complex::Complex64;
use crate::simd::{V, LANES};

/// Nodes between exact recomputations of the rotating phasors `e^{iuZ_j}`.
const RESYNC: usize = 64;

/// Zero-padded structure-of-arrays copy of the observations.
pub(crate) struct Lanes {
    pub z: Vec<V>,
    pub d: Vec<V>,
    /// Lane-block range of each group.
    pub groups: Vec<Range<usize>>,
    /// Padded slot of each original observation.
    pub slot: Vec<usize>,
}

impl Lanes {
    pub fn new(z: &[f64], d: &[f64], groups: &[Range<usize>]) -> Self {
        let mut zp = Vec::new();
        let mut dp = Vec::new();
        let mut ranges = Vec::with_capacity(groups.len());
        let mut slot = vec![0; z.len()];
        for g in groups {
            let start = zp.len() / LANES;
            for j in g.clone() {
                slot[j] = zp.len();
                zp.push(z[j]);
                dp.push(d[j]);
            }
            while zp.len() % LANES != 0 {
                zp.push(0.0);
                dp.push(0.0);
            }
            ranges.push(start..zp.len() / LANES);
        }
        Self {
            z: pack(&zp),
            d: pack(&dp),
            groups: ranges,
            slot,
        }
    }

    pub fn blocks(&self) -> usize {
        self.z.len()
    }
}

fn pack(v: &[f64]) -> Vec<V> {
    v.chunks_exact(LANES)
        .map(V::from_slice)
        .collect()
}

/// Per-node, per-group output sink: `(node, group, p, q, sigma^2)`.
pub(crate) trait Sink {
    fn put(&mut self, k: usize, g: usize, p: Complex64, q: Complex64, s2: f64);
}

/// Sums with `w_j = 1` over nodes `u_k = k * du`.
pub(crate) fn sweep_unit<S: Sink>(lanes: &Lanes, du: f64, nodes: usize, sink: &mut S) {
    let nb = lanes.blocks();
    let mut rot_re = vec![V::ONE; nb];
    let mut rot_im = vec![V::ZERO; nb];
    let mut step_re = Vec::with_capacity(nb);
    let mut step_im = Vec::with_capacity(nb);
    let duv = V::splat(du);
    for &z in &lanes.z {
        let (s, c) = (duv * z).sin_cos();
        step_re.push(c);
        step_im.push(s);
    }
    for k in 0..nodes {
        if k > 0 {
            if k % RESYNC == 0 {
                let u = V::splat(k as f64 * du);
                for b in 0..nb {
                    let (s, c) = (u * lanes.z[b]).sin_cos();
                    rot_re[b] = c;
                    rot_im[b] = s;
                }
            } else {
                for b in 0..nb {
                    let (r, i) = (rot_re[b], rot_im[b]);
                    let (sr, si) = (step_re[b], step_im[b]);
                    rot_re[b] = r * sr - i * si;
                    rot_im[b] = r * si + i * sr;
                }
            }
        }
        for (g, range) in lanes.groups.iter().enumerate() {
            let mut pr = V::ZERO;
            let mut pi = V::ZERO;
            let mut qr = V::ZERO;
            let mut qi = V::ZERO;
            let mut s2 = V::ZERO;
            for b in range.clone() {
                let (z, d) = (lanes.z[b], lanes.d[b]);
                pr = rot_re[b].mul_add(z, pr);
                pi = rot_im[b].mul_add(z, pi);
                qr = rot_re[b].mul_add(d, qr);
                qi = rot_im[b].mul_add(d, qi);
                s2 = d.mul_add(d, s2);
            }
            emit(sink, k, g, pr, pi, qr, qi, s2);
        }
    }
}

/// Largest `Delta_max * |step of the exponent|` handled by the truncated series directly.
const SERIES_LIMIT: f64 = 0.1;
/// Larger steps are halved up to this many times and the series result squared back.
const MAX_HALVINGS: i32 = 6;
/// Weights below this modulus are set to zero to keep the recurrences out of subnormals.
const TINY: f64 = 1e-150;

/// Clamped conjugate exponent `min(Re psi, 0) - i Im psi` at one node.
#[inline]
fn conj_clamped(psi: Complex64) -> (f64, f64) {
    (psi.re.min(0.0), -psi.im)
}

/// `exp(x) * cis(y)` for small `|x|`, `|y|` by truncated series.
#[inline(always)]
fn small_cexp(x: V, y: V) -> (V, V) {
    let e = x.mul_add(V::splat(1.0 / 40320.0), V::splat(1.0 / 5040.0));
    let e = x.mul_add(e, V::splat(1.0 / 720.0));
    let e = x.mul_add(e, V::splat(1.0 / 120.0));
    let e = x.mul_add(e, V::splat(1.0 / 24.0));
    let e = x.mul_add(e, V::splat(1.0 / 6.0));
    let e = x.mul_add(e, V::splat(0.5));
    let e = x.mul_add(e, V::ONE);
    let e = x.mul_add(e, V::ONE);
    let y2 = y * y;
    let c = y2.mul_add(V::splat(1.0 / 40320.0), V::splat(-1.0 / 720.0));
    let c = y2.mul_add(c, V::splat(1.0 / 24.0));
    let c = y2.mul_add(c, V::splat(-0.5));
    let c = y2.mul_add(c, V::ONE);
    let s = y2.mul_add(V::splat(-1.0 / 5040.0), V::splat(1.0 / 120.0));
    let s = y2.mul_add(s, V::splat(-1.0 / 6.0));
    let s = y2.mul_add(s, V::ONE);
    let s = s * y;
    (e * c, e * s)
}

/// `exp(x) * cis(y)` exactly, with tiny moduli flushed to zero.
#[inline(always)]
fn exact_cexp(x: V, y: V) -> (V, V) {
    let m = x.exp();
    let (s, c) = y.sin_cos();
    m.zero_where_below(TINY, m * c, m * s)
}

#[inline(always)]
fn cmul(ar: V, ai: V, br: V, bi: V) -> (V, V) {
    (ar.mul_sub(br, ai * bi), ar.mul_add(bi, ai * br))
}

/// Phasors `t_j(u_k) = w_j(u_k) e^{i u_k Z_j}` advanced node by node.
struct PhasorTrack {
    re: Vec<V>,
    im: Vec<V>,
    last: (f64, f64),
}

impl PhasorTrack {
    fn new(blocks: usize) -> Self {
        Self {
            re: vec![V::ONE; blocks],
            im: vec![V::ZERO; blocks],
            last: (0.0, 0.0),
        }
    }

    /// Halvings needed to advance to `psi` by series, or `None` if the step is too large.
    fn halvings(&self, psi: Complex64, delta_max: f64) -> Option<i32> {
        let (r, s) = conj_clamped(psi);
        let size = delta_max * (r - self.last.0).abs().max((s - self.last.1).abs());
        if size <= SERIES_LIMIT {
            return Some(0);
        }
        let h = (size / SERIES_LIMIT).log2().ceil() as i32;
        (h <= MAX_HALVINGS).then_some(h)
    }

    fn set_exact(&mut self, lanes: &Lanes, u: f64, psi: Complex64) {
        let (r, s) = conj_clamped(psi);
        let (rv, sv, uv) = (V::splat(r), V::splat(s), V::splat(u));
        for b in 0..lanes.blocks() {
            let d = lanes.d[b];
            let (tr, ti) = exact_cexp(d * rv, uv.mul_add(lanes.z[b], d * sv));
            self.re[b] = tr;
            self.im[b] = ti;
        }
        self.last = (r, s);
    }

    fn advance(&mut self, lanes: &Lanes, step: &Steps, psi: Complex64, halvings: i32) {
        let (r, s) = conj_clamped(psi);
        let scale = 0.5f64.powi(halvings);
        let (dr, ds) = (
            V::splat((r - self.last.0) * scale),
            V::splat((s - self.last.1) * scale),
        );
        for b in 0..lanes.blocks() {
            let d = lanes.d[b];
            let (mut mr, mut mi) = small_cexp(d * dr, d * ds);
            for _ in 0..halvings {
                (mr, mi) = cmul(mr, mi, mr, mi);
            }
            let (mr, mi) = cmul(mr, mi, step.re[b], step.im[b]);
            let (tr, ti) = cmul(self.re[b], self.im[b], mr, mi);
            self.re[b] = tr;
            self.im[b] = ti;
        }
        self.last = (r, s);
    }
}

/// `e^{i du Z_j}` per lane block.
struct Steps {
    re: Vec<V>,
    im: Vec<V>,
}

impl Steps {
    fn new(lanes: &Lanes, du: f64) -> Self {
        let duv = V::splat(du);
        let (re, im) = lanes
            .z
            .iter()
            .map(|&z| {
                let (s, c) = (duv * z).sin_cos();
                (c, s)
            })
            .unzip();
        Self { re, im }
    }
}

/// Sums with `w_j(u) = exp(Delta_j * conj(c(u)))`, `c = min(Re psi, 0) + i Im psi`.
///
/// Between exact refreshes the phasors `w_j(u) e^{iuZ_j}` are advanced by multiplication
/// with `e^{i du Z_j} exp(Delta_j (conj c(u_{k+1}) - conj c(u_k)))`, the second factor
/// from a truncated series while the step is small.
///
/// When `previous` is given, also accumulates
/// `node_weight[k] * |w_j(u_k) - w'_j(u_k)|^2` into `distances` (indexed by padded slot),
/// where `w'` is built the same way from `previous`.
pub(crate) fn sweep_conj_exp<S: Sink>(
    lanes: &Lanes,
    du: f64,
    exponent: &[Complex64],
    previous: Option<(&[Complex64], &[f64], &mut [V])>,
    sink: &mut S,
) {
    let nb = lanes.blocks();
    let delta_max = lanes
        .d
        .iter()
        .flat_map(|v| v.to_array())
        .fold(0.0, f64::max);
    let steps = Steps::new(lanes, du);
    let mut t = PhasorTrack::new(nb);
    let mut old = previous.as_ref().map(|_| PhasorTrack::new(nb));
    let mut previous = previous;

    for (k, &psi) in exponent.iter().enumerate() {
        let u = k as f64 * du;
        let psi_old = previous.as_ref().map(|p| p.0[k]);
        let h_new = t.halvings(psi, delta_max);
        let h_old = match (&old, psi_old) {
            (Some(o), Some(po)) => o.halvings(po, delta_max),
            _ => Some(0),
        };
        let refresh = k % RESYNC == 0 || h_new.is_none() || h_old.is_none();
        if refresh {
            t.set_exact(lanes, u, psi);
            if let (Some(o), Some(po)) = (old.as_mut(), psi_old) {
                o.set_exact(lanes, u, po);
            }
        } else {
            t.advance(lanes, &steps, psi, h_new.unwrap_or(0));
            if let (Some(o), Some(po)) = (old.as_mut(), psi_old) {
                o.advance(lanes, &steps, po, h_old.unwrap_or(0));
            }
        }

        for (g, range) in lanes.groups.iter().enumerate() {
            let mut pr = V::ZERO;
            let mut pi = V::ZERO;
            let mut qr = V::ZERO;
            let mut qi = V::ZERO;
            let mut s2 = V::ZERO;
            for b in range.clone() {
                let (z, d) = (lanes.z[b], lanes.d[b]);
                let (tr, ti) = (t.re[b], t.im[b]);
                pr = tr.mul_add(z, pr);
                pi = ti.mul_add(z, pi);
                qr = tr.mul_add(d, qr);
                qi = ti.mul_add(d, qi);
                let (dr, di) = (d * tr, d * ti);
                s2 = dr.mul_add(dr, di.mul_add(di, s2));
            }
            emit(sink, k, g, pr, pi, qr, qi, s2);
        }

        if let (Some((_, node_weights, dist)), Some(o)) = (previous.as_mut(), old.as_ref()) {
            let nw = node_weights[k];
            if nw > 0.0 {
                let nw = V::splat(nw);
                for (b, acc) in dist.iter_mut().enumerate() {
                    // |e^{iuZ}| = 1, so the phasor difference has the weight difference's modulus
                    let er = t.re[b] - o.re[b];
                    let ei = t.im[b] - o.im[b];
                    *acc = er.mul_add(er, ei * ei).mul_add(nw, *acc);
                }
            }
        }
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn emit<S: Sink>(
    sink: &mut S,
    k: usize,
    g: usize,
    pr: V,
    pi: V,
    qr: V,
    qi: V,
    s2: V,
) {
    // p = i * sum(t z)
    let p = Complex64::new(-pi.reduce_add(), pr.reduce_add());
    let q = Complex64::new(qr.reduce_add(), qi.reduce_add());
    sink.put(k, g, p, q, s2.reduce_add());
}

/// Scatters padded per-lane values back to observation order.
pub(crate) fn unpad(lanes: &Lanes, padded: &[V]) -> Vec<f64> {
    let flat: Vec<f64> = padded.iter().flat_map(|v| v.to_array()).collect();
    lanes.slot.iter().map(|&s| flat[s]).collect()
}
