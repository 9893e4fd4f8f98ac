//! Convolutional autoencoder: forward and backward passes.
//!
//! Encoder: conv(c1) -> conv(c2) -> flatten -> dense(embed_dim).
//! Decoder: dense(flat) -> deconv(c2) -> deconv(c1) -> 1x1 conv(3).
//!
//! Convolutions are 3x3, stride 2, zero padding 1, ReLU after every layer
//! except the embedding and the reconstruction head. Deconvolutions use
//! output padding 1 so each one exactly doubles the spatial size.
//!
//! Activations use a `[channel, batch, row, col]` layout so that every
//! convolution over a whole batch is a single GEMM on an im2col matrix.
//! All kernels are generic over [`Scalar`]: training runs in `f32`, the
//! finite-difference check runs in `f64`.

use std::fmt::Debug;

use num_traits::Float;
use rand::Rng;

use crate::rng::{stream, Domain};

pub trait Scalar: Float + Default + Debug + Send + Sync + std::iter::Sum + 'static {
    /// `C <- alpha * A * B + beta * C` with arbitrary strides.
    ///
    /// # Safety
    /// Pointers and strides must describe valid matrices of the given sizes.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn lit(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f32,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Scalar for f64 {
    unsafe fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: f64,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// `c[m x n] = op(a) * op(b) + beta * c`, all row-major.
///
/// `a` is stored `[m, k]` (or `[k, m]` when `ta`), `b` is `[k, n]` (or `[n, k]` when `tb`).
#[allow(clippy::too_many_arguments)]
fn gemm<T: Scalar>(ta: bool, tb: bool, m: usize, n: usize, k: usize, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths are checked above and match the strides.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    /// Side of the square RGB input, a multiple of 4.
    pub canonical_size: usize,
    pub enc_channels: [usize; 2],
    pub embed_dim: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            canonical_size: 32,
            enc_channels: [16, 32],
            embed_dim: 64,
        }
    }
}

/// Named parameter tensor, stored row-major as `rows x cols`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorShape {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
}

impl TensorShape {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const K: usize = 3;

impl Architecture {
    pub fn validate(&self) -> Result<(), String> {
        if self.canonical_size < 4 || self.canonical_size % 4 != 0 {
            return Err(format!("canonical size {} is not a positive multiple of 4", self.canonical_size));
        }
        if self.enc_channels.contains(&0) || self.embed_dim == 0 {
            return Err("channel counts and embedding size must be positive".into());
        }
        Ok(())
    }

    fn s1(&self) -> usize {
        self.canonical_size / 2
    }

    fn s2(&self) -> usize {
        self.canonical_size / 4
    }

    /// Length of the flattened encoder feature map.
    pub fn flat_len(&self) -> usize {
        self.enc_channels[1] * self.s2() * self.s2()
    }

    /// Parameter tensors in storage order.
    pub fn tensor_shapes(&self) -> Vec<TensorShape> {
        let [c1, c2] = self.enc_channels;
        let (e, f) = (self.embed_dim, self.flat_len());
        let t = |name, rows, cols| TensorShape { name, rows, cols };
        vec![
            t("enc1.weight", c1, 3 * K * K),
            t("enc1.bias", c1, 1),
            t("enc2.weight", c2, c1 * K * K),
            t("enc2.bias", c2, 1),
            t("embed.weight", e, f),
            t("embed.bias", e, 1),
            t("expand.weight", f, e),
            t("expand.bias", f, 1),
            t("dec1.weight", c2, c2 * K * K),
            t("dec1.bias", c2, 1),
            t("dec2.weight", c2, c1 * K * K),
            t("dec2.bias", c1, 1),
            t("head.weight", 3, c1),
            t("head.bias", 3, 1),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensor_shapes().iter().map(TensorShape::len).sum()
    }

    /// Number of scalars in one input (or reconstruction) sample.
    pub fn sample_len(&self) -> usize {
        3 * self.canonical_size * self.canonical_size
    }
}

/// Uniform fan-in initialisation from the run seed; biases start at zero.
pub fn init_parameters<T: Scalar>(arch: &Architecture, seed: u64) -> Vec<T> {
    let mut rng = stream(seed, Domain::Init, 0);
    let [c1, c2] = arch.enc_channels;
    let mut params = Vec::with_capacity(arch.param_count());
    for shape in arch.tensor_shapes() {
        if shape.cols == 1 && shape.name.ends_with("bias") {
            params.extend(std::iter::repeat(T::zero()).take(shape.len()));
            continue;
        }
        // gain 6 ahead of a ReLU, 3 for linear outputs
        let (fan_in, gain) = match shape.name {
            "enc1.weight" => (3 * K * K, 6.0),
            "enc2.weight" => (c1 * K * K, 6.0),
            "embed.weight" => (arch.flat_len(), 3.0),
            "expand.weight" => (arch.embed_dim, 6.0),
            // a stride-2 transposed conv feeds each output from ~k*k/4 taps per channel
            "dec1.weight" => ((c2 * K * K).div_ceil(4), 6.0),
            "dec2.weight" => ((c2 * K * K).div_ceil(4), 6.0),
            "head.weight" => (c1, 3.0),
            other => unreachable!("unknown tensor {other}"),
        };
        let bound = (gain / fan_in as f64).sqrt();
        params.extend((0..shape.len()).map(|_| T::lit(rng.gen_range(-bound..bound))));
    }
    params
}

/// Views into a flat parameter (or gradient) vector.
struct Tensors<'a, T> {
    parts: Vec<&'a [T]>,
}

impl<'a, T> Tensors<'a, T> {
    fn split(arch: &Architecture, flat: &'a [T]) -> Self {
        let mut rest = flat;
        let mut parts = Vec::new();
        for s in arch.tensor_shapes() {
            let (head, tail) = rest.split_at(s.len());
            parts.push(head);
            rest = tail;
        }
        Self { parts }
    }
}

struct TensorsMut<'a, T> {
    parts: Vec<&'a mut [T]>,
}

impl<'a, T> TensorsMut<'a, T> {
    fn split(arch: &Architecture, flat: &'a mut [T]) -> Self {
        let mut rest = flat;
        let mut parts = Vec::new();
        for s in arch.tensor_shapes() {
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(s.len());
            parts.push(head);
            rest = tail;
        }
        Self { parts }
    }
}

// tensor indices in storage order
const ENC1_W: usize = 0;
const ENC1_B: usize = 1;
const ENC2_W: usize = 2;
const ENC2_B: usize = 3;
const EMB_W: usize = 4;
const EMB_B: usize = 5;
const EXP_W: usize = 6;
const EXP_B: usize = 7;
const DEC1_W: usize = 8;
const DEC1_B: usize = 9;
const DEC2_W: usize = 10;
const DEC2_B: usize = 11;
const HEAD_W: usize = 12;
const HEAD_B: usize = 13;

/// Strided window geometry shared by im2col and its adjoint.
///
/// `img` is the dense feature map (`channels x batch x img_h x img_w`);
/// the window grid has `pos_h x pos_w` positions.
#[derive(Debug, Clone, Copy)]
struct Windows {
    channels: usize,
    batch: usize,
    img: usize,
    pos: usize,
    k: usize,
    stride: usize,
    pad: usize,
}

impl Windows {
    fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.batch * self.pos * self.pos
    }

    fn img_len(&self) -> usize {
        self.channels * self.batch * self.img * self.img
    }

    /// Calls `f(row, col, img_index)` for every in-bounds tap.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize)) {
        let (n, b, p, s, pad) = (self.img, self.batch, self.pos, self.stride, self.pad as isize);
        let cols = self.cols();
        for c in 0..self.channels {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    let row_base = row * cols;
                    for bi in 0..b {
                        let img_base = (c * b + bi) * n * n;
                        let col_base = bi * p * p;
                        for oy in 0..p {
                            let iy = (oy * s + ky) as isize - pad;
                            if iy < 0 || iy >= n as isize {
                                continue;
                            }
                            let iy = iy as usize;
                            for ox in 0..p {
                                let ix = (ox * s + kx) as isize - pad;
                                if ix < 0 || ix >= n as isize {
                                    continue;
                                }
                                f(row_base + col_base + oy * p + ox, img_base + iy * n + ix as usize);
                            }
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, img: &[T]) -> Vec<T> {
        debug_assert_eq!(img.len(), self.img_len());
        let mut col = vec![T::zero(); self.rows() * self.cols()];
        self.for_each_tap(|ci, ii| col[ci] = img[ii]);
        col
    }

    fn col2im<T: Scalar>(&self, col: &[T]) -> Vec<T> {
        let mut img = vec![T::zero(); self.img_len()];
        self.for_each_tap(|ci, ii| img[ii] = img[ii] + col[ci]);
        img
    }
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T]) {
    let per = out.len() / bias.len();
    for (chunk, &b) in out.chunks_exact_mut(per).zip(bias) {
        chunk.iter_mut().for_each(|v| *v = *v + b);
    }
}

fn relu<T: Scalar>(v: &mut [T]) {
    v.iter_mut().for_each(|x| *x = x.max(T::zero()));
}

/// Zeroes gradient entries whose (post-ReLU) activation is not positive.
fn relu_back<T: Scalar>(grad: &mut [T], act: &[T]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

fn accumulate_bias_grad<T: Scalar>(db: &mut [T], dout: &[T]) {
    let per = dout.len() / db.len();
    for (d, chunk) in db.iter_mut().zip(dout.chunks_exact(per)) {
        *d = *d + chunk.iter().copied().sum::<T>();
    }
}

/// `[c, batch, h, w]` -> `[c*h*w, batch]`.
fn to_features<T: Scalar>(act: &[T], c: usize, batch: usize, hw: usize) -> Vec<T> {
    let mut out = vec![T::zero(); act.len()];
    for ci in 0..c {
        for b in 0..batch {
            for p in 0..hw {
                out[(ci * hw + p) * batch + b] = act[(ci * batch + b) * hw + p];
            }
        }
    }
    out
}

/// Inverse of [`to_features`].
fn from_features<T: Scalar>(feat: &[T], c: usize, batch: usize, hw: usize) -> Vec<T> {
    let mut out = vec![T::zero(); feat.len()];
    for ci in 0..c {
        for b in 0..batch {
            for p in 0..hw {
                out[(ci * batch + b) * hw + p] = feat[(ci * hw + p) * batch + b];
            }
        }
    }
    out
}

/// Per-sample `[3, h, w]` images -> batch layout `[3, batch, h, w]`.
pub fn pack_batch<T: Scalar>(samples: &[&[T]], sample_len: usize) -> Vec<T> {
    let batch = samples.len();
    let plane = sample_len / 3;
    let mut out = vec![T::zero(); sample_len * batch];
    for (b, s) in samples.iter().enumerate() {
        assert_eq!(s.len(), sample_len);
        for c in 0..3 {
            out[(c * batch + b) * plane..(c * batch + b + 1) * plane].copy_from_slice(&s[c * plane..(c + 1) * plane]);
        }
    }
    out
}

struct Geometry {
    enc1: Windows,
    enc2: Windows,
    dec1: Windows,
    dec2: Windows,
}

impl Geometry {
    fn new(arch: &Architecture, batch: usize) -> Self {
        let [c1, c2] = arch.enc_channels;
        let (c, s1, s2) = (arch.canonical_size, arch.s1(), arch.s2());
        let w = |channels, img, pos| Windows {
            channels,
            batch,
            img,
            pos,
            k: K,
            stride: 2,
            pad: 1,
        };
        Self {
            enc1: w(3, c, s1),
            enc2: w(c1, s1, s2),
            // transposed convs: the dense map is the output, windows sit on the input grid
            dec1: w(c2, s1, s2),
            dec2: w(c1, c, s1),
        }
    }
}

/// Encoder forward; returns `(col1, a1, col2, a2, features, embedding)`.
struct EncoderPass<T> {
    col1: Vec<T>,
    a1: Vec<T>,
    col2: Vec<T>,
    a2: Vec<T>,
    feat: Vec<T>,
    /// `[embed_dim, batch]`
    z: Vec<T>,
}

fn encoder_forward<T: Scalar>(arch: &Architecture, p: &Tensors<T>, g: &Geometry, x: &[T], batch: usize) -> EncoderPass<T> {
    let [c1, c2] = arch.enc_channels;
    let col1 = g.enc1.im2col(x);
    let mut a1 = vec![T::zero(); c1 * g.enc1.cols()];
    gemm(false, false, c1, g.enc1.cols(), g.enc1.rows(), p.parts[ENC1_W], &col1, T::zero(), &mut a1);
    add_bias(&mut a1, p.parts[ENC1_B]);
    relu(&mut a1);

    let col2 = g.enc2.im2col(&a1);
    let mut a2 = vec![T::zero(); c2 * g.enc2.cols()];
    gemm(false, false, c2, g.enc2.cols(), g.enc2.rows(), p.parts[ENC2_W], &col2, T::zero(), &mut a2);
    add_bias(&mut a2, p.parts[ENC2_B]);
    relu(&mut a2);

    let s2 = arch.s2();
    let feat = to_features(&a2, c2, batch, s2 * s2);
    let (e, f) = (arch.embed_dim, arch.flat_len());
    let mut z = vec![T::zero(); e * batch];
    gemm(false, false, e, batch, f, p.parts[EMB_W], &feat, T::zero(), &mut z);
    add_bias(&mut z, p.parts[EMB_B]);
    EncoderPass {
        col1,
        a1,
        col2,
        a2,
        feat,
        z,
    }
}

/// Embeddings for a packed batch, returned per sample (`batch` rows of `embed_dim`).
pub fn encode<T: Scalar>(arch: &Architecture, params: &[T], x: &[T], batch: usize) -> Vec<Vec<T>> {
    let p = Tensors::split(arch, params);
    let g = Geometry::new(arch, batch);
    let enc = encoder_forward(arch, &p, &g, x, batch);
    (0..batch)
        .map(|b| (0..arch.embed_dim).map(|i| enc.z[i * batch + b]).collect())
        .collect()
}

/// Sum of squared reconstruction errors over a packed batch, scaled by
/// `scale`, with its gradient added into `grad`.
///
/// With `scale = 1 / (batch * sample_len)` the returned value is the mean
/// squared error.
pub fn loss_and_gradient<T: Scalar>(
    arch: &Architecture,
    params: &[T],
    input: &[T],
    target: &[T],
    batch: usize,
    scale: T,
    grad: &mut [T],
) -> T {
    assert_eq!(params.len(), arch.param_count());
    assert_eq!(grad.len(), params.len());
    assert_eq!(input.len(), batch * arch.sample_len());
    assert_eq!(target.len(), input.len());
    let [c1, c2] = arch.enc_channels;
    let (s1, s2, c) = (arch.s1(), arch.s2(), arch.canonical_size);
    let (e, f) = (arch.embed_dim, arch.flat_len());
    let p = Tensors::split(arch, params);
    let g = Geometry::new(arch, batch);

    // ---- forward
    let enc = encoder_forward(arch, &p, &g, input, batch);

    let mut h = vec![T::zero(); f * batch];
    gemm(false, false, f, batch, e, p.parts[EXP_W], &enc.z, T::zero(), &mut h);
    add_bias(&mut h, p.parts[EXP_B]);
    relu(&mut h);
    let hmap = from_features(&h, c2, batch, s2 * s2);

    // dec1: [c2, B*s2*s2] -> col [c2*9, B*s2*s2] -> [c2, B, s1, s1]
    let mut col_d1 = vec![T::zero(); g.dec1.rows() * g.dec1.cols()];
    gemm(true, false, g.dec1.rows(), g.dec1.cols(), c2, p.parts[DEC1_W], &hmap, T::zero(), &mut col_d1);
    let mut d1 = g.dec1.col2im(&col_d1);
    add_bias(&mut d1, p.parts[DEC1_B]);
    relu(&mut d1);

    let mut col_d2 = vec![T::zero(); g.dec2.rows() * g.dec2.cols()];
    gemm(true, false, g.dec2.rows(), g.dec2.cols(), c2, p.parts[DEC2_W], &d1, T::zero(), &mut col_d2);
    let mut d2 = g.dec2.col2im(&col_d2);
    add_bias(&mut d2, p.parts[DEC2_B]);
    relu(&mut d2);

    let npix = batch * c * c;
    let mut y = vec![T::zero(); 3 * npix];
    gemm(false, false, 3, npix, c1, p.parts[HEAD_W], &d2, T::zero(), &mut y);
    add_bias(&mut y, p.parts[HEAD_B]);

    // ---- loss
    // the packed layout matches the target layout element for element
    let mut loss = T::zero();
    let mut dy = vec![T::zero(); y.len()];
    let two = T::lit(2.0);
    for ((d, &yi), &ti) in dy.iter_mut().zip(&y).zip(target) {
        let r = yi - ti;
        loss = loss + r * r;
        *d = two * r * scale;
    }
    loss = loss * scale;

    // ---- backward
    let mut gr = TensorsMut::split(arch, grad);

    // head (1x1 conv): y = W[3, c1] d2[c1, npix]
    gemm(false, true, 3, c1, npix, &dy, &d2, T::one(), gr.parts[HEAD_W]);
    accumulate_bias_grad(gr.parts[HEAD_B], &dy);
    let mut dd2 = vec![T::zero(); c1 * npix];
    gemm(true, false, c1, npix, 3, p.parts[HEAD_W], &dy, T::zero(), &mut dd2);
    relu_back(&mut dd2, &d2);

    // dec2: out = col2im(W^T d1)
    accumulate_bias_grad(gr.parts[DEC2_B], &dd2);
    let dcol_d2 = g.dec2.im2col(&dd2);
    gemm(false, true, c2, g.dec2.rows(), g.dec2.cols(), &d1, &dcol_d2, T::one(), gr.parts[DEC2_W]);
    let mut dd1 = vec![T::zero(); d1.len()];
    gemm(false, false, c2, g.dec2.cols(), g.dec2.rows(), p.parts[DEC2_W], &dcol_d2, T::zero(), &mut dd1);
    relu_back(&mut dd1, &d1);

    accumulate_bias_grad(gr.parts[DEC1_B], &dd1);
    let dcol_d1 = g.dec1.im2col(&dd1);
    gemm(false, true, c2, g.dec1.rows(), g.dec1.cols(), &hmap, &dcol_d1, T::one(), gr.parts[DEC1_W]);
    let mut dhmap = vec![T::zero(); hmap.len()];
    gemm(false, false, c2, g.dec1.cols(), g.dec1.rows(), p.parts[DEC1_W], &dcol_d1, T::zero(), &mut dhmap);
    let mut dh = to_features(&dhmap, c2, batch, s2 * s2);
    relu_back(&mut dh, &h);

    // expand: h[f, B] = W[f, e] z[e, B]
    gemm(false, true, f, e, batch, &dh, &enc.z, T::one(), gr.parts[EXP_W]);
    accumulate_bias_grad(gr.parts[EXP_B], &dh);
    let mut dz = vec![T::zero(); e * batch];
    gemm(true, false, e, batch, f, p.parts[EXP_W], &dh, T::zero(), &mut dz);

    // embed: z[e, B] = W[e, f] feat[f, B]
    gemm(false, true, e, f, batch, &dz, &enc.feat, T::one(), gr.parts[EMB_W]);
    accumulate_bias_grad(gr.parts[EMB_B], &dz);
    let mut dfeat = vec![T::zero(); f * batch];
    gemm(true, false, f, batch, e, p.parts[EMB_W], &dz, T::zero(), &mut dfeat);
    let mut da2 = from_features(&dfeat, c2, batch, s2 * s2);
    relu_back(&mut da2, &enc.a2);

    // enc2: a2[c2, N] = W[c2, c1*9] col2
    gemm(false, true, c2, g.enc2.rows(), g.enc2.cols(), &da2, &enc.col2, T::one(), gr.parts[ENC2_W]);
    accumulate_bias_grad(gr.parts[ENC2_B], &da2);
    let mut dcol2 = vec![T::zero(); g.enc2.rows() * g.enc2.cols()];
    gemm(true, false, g.enc2.rows(), g.enc2.cols(), c2, p.parts[ENC2_W], &da2, T::zero(), &mut dcol2);
    let mut da1 = g.enc2.col2im(&dcol2);
    relu_back(&mut da1, &enc.a1);

    gemm(false, true, c1, g.enc1.rows(), g.enc1.cols(), &da1, &enc.col1, T::one(), gr.parts[ENC1_W]);
    accumulate_bias_grad(gr.parts[ENC1_B], &da1);

    let _ = s1;
    loss
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f32>,
    v: Vec<f32>,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f32], grad: &[f32]) {
        self.step += 1;
        let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        let lr = (self.learning_rate * c2.sqrt() / c1) as f32;
        let eps = (self.epsilon * c2.sqrt()) as f32;
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            params[i] -= lr * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Architecture {
        Architecture {
            canonical_size: 4,
            enc_channels: [2, 3],
            embed_dim: 4,
        }
    }

    #[test]
    fn default_shapes() {
        let a = Architecture::default();
        assert_eq!(a.flat_len(), 32 * 8 * 8);
        assert_eq!(a.embed_dim, 64);
        let shapes = a.tensor_shapes();
        assert_eq!(shapes[4].rows, 64);
        assert_eq!(a.param_count(), shapes.iter().map(|s| s.len()).sum::<usize>());
        assert!(Architecture { canonical_size: 30, ..a }.validate().is_err());
    }

    #[test]
    fn im2col_col2im_are_adjoint() {
        let w = Windows {
            channels: 2,
            batch: 3,
            img: 6,
            pos: 3,
            k: 3,
            stride: 2,
            pad: 1,
        };
        let img: Vec<f64> = (0..w.img_len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let col: Vec<f64> = (0..w.rows() * w.cols()).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let lhs: f64 = w.im2col(&img).iter().zip(&col).map(|(a, b)| a * b).sum();
        let rhs: f64 = img.iter().zip(w.col2im(&col)).map(|(a, b)| a * b).sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn gemm_transposes() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        let mut c = [0.0f64; 4];
        gemm(false, false, 2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, [19.0, 22.0, 43.0, 50.0]);
        gemm(true, false, 2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, [26.0, 30.0, 38.0, 44.0]);
        gemm(false, true, 2, 2, 2, &a, &b, 0.0, &mut c);
        assert_eq!(c, [17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn batch_packing_roundtrip_through_features() {
        let s: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let t: Vec<f64> = (12..24).map(|v| v as f64).collect();
        let packed = pack_batch(&[&s, &t], 12);
        assert_eq!(&packed[0..4], &s[0..4]);
        assert_eq!(&packed[4..8], &t[0..4]);
        let f = to_features(&packed, 3, 2, 4);
        assert_eq!(from_features(&f, 3, 2, 4), packed);
    }

    #[test]
    fn encode_matches_per_sample_encode() {
        let arch = toy();
        let params: Vec<f64> = init_parameters(&arch, 11);
        let a: Vec<f64> = (0..arch.sample_len()).map(|i| (i % 5) as f64 / 5.0).collect();
        let b: Vec<f64> = (0..arch.sample_len()).map(|i| (i % 3) as f64 / 3.0).collect();
        let both = encode(&arch, &params, &pack_batch(&[&a, &b], arch.sample_len()), 2);
        let solo = encode(&arch, &params, &pack_batch(&[&b], arch.sample_len()), 1);
        for (x, y) in both[1].iter().zip(&solo[0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = vec![1.0f32, -1.0];
        let mut opt = Adam::new(2, 0.1);
        opt.update(&mut p, &[1.0, -2.0]);
        assert!((p[0] - 0.9).abs() < 1e-6);
        assert!((p[1] + 0.9).abs() < 1e-6);
    }
    #[test]
    fn gradient_matches_central_differences() {
        let arch = toy();
        // zero biases leave some ReLUs exactly at the kink; start from a generic point
        let mut rng = stream(5, Domain::Init, 1);
        let params: Vec<f64> = init_parameters::<f64>(&arch, 5)
            .into_iter()
            .map(|v| v + rng.gen_range(-0.3..0.3))
            .collect();
        let n = arch.sample_len();
        let x: Vec<f64> = (0..2 * n).map(|i| ((i * 29) % 17) as f64 / 17.0).collect();
        let t: Vec<f64> = (0..2 * n).map(|i| ((i * 7) % 13) as f64 / 13.0).collect();
        let mut grad = vec![0.0; params.len()];
        loss_and_gradient(&arch, &params, &x, &t, 2, 1.0, &mut grad);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let mut scratch = vec![0.0; params.len()];
            let up = loss_and_gradient(&arch, &p, &x, &t, 2, 1.0, &mut scratch);
            p[i] -= 2.0 * h;
            let down = loss_and_gradient(&arch, &p, &x, &t, 2, 1.0, &mut scratch);
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / numeric.abs().max(grad[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
