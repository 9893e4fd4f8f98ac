//! Hand-built 64-dimensional texture descriptor.
//!
//! Layout: 16-bin luminance histogram, three 8-bin channel histograms,
//! 16 radially averaged spectrum bins, 8 grey-level co-occurrence statistics.
//! Histograms are normalized to unit sum, the other two blocks to unit norm.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::raster::{luma, RasterImage};

pub const DESCRIPTOR_DIM: usize = 64;
const LUMA_BINS: usize = 16;
const CHANNEL_BINS: usize = 8;
const SPECTRUM_BINS: usize = 16;
const GLCM_LEVELS: usize = 8;

fn normalize_sum(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn normalize_norm(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn luminance(patch: &RasterImage) -> Vec<f64> {
    patch.pixels().map(|p| luma(p).min(1.0)).collect()
}

/// Mean spectrum magnitude per radial band; band 0 holds only the DC term.
fn radial_spectrum(lum: &[f64], w: usize, h: usize) -> [f64; SPECTRUM_BINS] {
    let mut planner = FftPlanner::<f64>::new();
    let row_fft = planner.plan_fft_forward(w);
    let col_fft = planner.plan_fft_forward(h);
    let mut data: Vec<Complex<f64>> = lum.iter().map(|&v| Complex::new(v, 0.0)).collect();
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        col_fft.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }

    let mut sums = [0.0; SPECTRUM_BINS];
    let mut counts = [0usize; SPECTRUM_BINS];
    let r_max = 0.5f64.sqrt();
    let npix = (w * h) as f64;
    for v in 0..h {
        let fv = v.min(h - v) as f64 / h as f64;
        for u in 0..w {
            let fu = u.min(w - u) as f64 / w as f64;
            let bin = if u == 0 && v == 0 {
                0
            } else {
                let r = (fu * fu + fv * fv).sqrt();
                (1 + (r / r_max * (SPECTRUM_BINS - 1) as f64) as usize).min(SPECTRUM_BINS - 1)
            };
            // normalize away patch size so that bins compare across sides
            sums[bin] += data[v * w + u].norm() / npix;
            counts[bin] += 1;
        }
    }
    let mut out = [0.0; SPECTRUM_BINS];
    for i in 0..SPECTRUM_BINS {
        if counts[i] > 0 {
            out[i] = sums[i] / counts[i] as f64;
        }
    }
    out
}

/// Contrast, dissimilarity, homogeneity, energy, entropy, mean, variance and
/// correlation of the symmetric right/down co-occurrence matrix.
fn glcm_stats(lum: &[f64], w: usize, h: usize) -> [f64; 8] {
    let q: Vec<usize> = lum
        .iter()
        .map(|&v| ((v * GLCM_LEVELS as f64) as usize).min(GLCM_LEVELS - 1))
        .collect();
    let mut m = [[0.0f64; GLCM_LEVELS]; GLCM_LEVELS];
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let a = q[y * w + x];
            let mut pair = |b: usize| {
                m[a][b] += 1.0;
                m[b][a] += 1.0;
                total += 2.0;
            };
            if x + 1 < w {
                pair(q[y * w + x + 1]);
            }
            if y + 1 < h {
                pair(q[(y + 1) * w + x]);
            }
        }
    }
    if total == 0.0 {
        return [0.0; 8];
    }
    let (mut contrast, mut dissim, mut homog, mut energy, mut entropy, mut mean) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, row) in m.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            let p = c / total;
            let d = i as f64 - j as f64;
            contrast += d * d * p;
            dissim += d.abs() * p;
            homog += p / (1.0 + d * d);
            energy += p * p;
            if p > 0.0 {
                entropy -= p * p.ln();
            }
            mean += i as f64 * p;
        }
    }
    let (mut var, mut cov) = (0.0, 0.0);
    for (i, row) in m.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            let p = c / total;
            var += (i as f64 - mean).powi(2) * p;
            cov += (i as f64 - mean) * (j as f64 - mean) * p;
        }
    }
    let corr = if var > 1e-12 { cov / var } else { 0.0 };
    [contrast, dissim, homog, energy, entropy, mean, var, corr]
}

pub fn descriptor_embed(patch: &RasterImage) -> Vec<f64> {
    let (w, h) = (patch.width(), patch.height());
    let lum = luminance(patch);
    let mut out = Vec::with_capacity(DESCRIPTOR_DIM);

    let mut hist = [0.0; LUMA_BINS];
    for &v in &lum {
        hist[((v * LUMA_BINS as f64) as usize).min(LUMA_BINS - 1)] += 1.0;
    }
    normalize_sum(&mut hist);
    out.extend_from_slice(&hist);

    for c in 0..3 {
        let mut hist = [0.0; CHANNEL_BINS];
        for p in patch.pixels() {
            hist[p[c] as usize * CHANNEL_BINS / 256] += 1.0;
        }
        normalize_sum(&mut hist);
        out.extend_from_slice(&hist);
    }

    let mut spec = radial_spectrum(&lum, w, h);
    normalize_norm(&mut spec);
    out.extend_from_slice(&spec);

    let mut glcm = glcm_stats(&lum, w, h);
    normalize_norm(&mut glcm);
    out.extend_from_slice(&glcm);

    debug_assert_eq!(out.len(), DESCRIPTOR_DIM);
    out
}
