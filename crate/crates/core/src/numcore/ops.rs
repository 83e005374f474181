//! Elementwise, reduction and resampling operations.

use crate::error::{shape_err, Result};

use super::real::Real;
use super::tape::{Function, Tape, Var};
use super::tensor::Tensor;

/// Direction of a factor-2 spatial transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resample {
    /// 2x2 average pooling.
    Down,
    /// Nearest-neighbour duplication.
    Up,
}

struct AddFn;
struct SubFn;
struct MulFn;
struct ScaleFn(f64);
struct SiluFn;
struct SquareFn;
struct SumFn;
struct MeanFn;
struct ResampleFn(Resample);
struct ConcatFn(Vec<usize>);

fn same_shape<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    a.expect_same_shape(b)
}

impl<T: Real> Function<T> for AddFn {
    fn name(&self) -> &'static str {
        "add"
    }
    fn backward(&self, _: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, needs: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        Ok(vec![needs[0].then(|| g.clone()), needs[1].then(|| g.clone())])
    }
}

impl<T: Real> Function<T> for SubFn {
    fn name(&self) -> &'static str {
        "sub"
    }
    fn backward(&self, _: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, needs: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        Ok(vec![needs[0].then(|| g.clone()), needs[1].then(|| g.map(|v| -v))])
    }
}

impl<T: Real> Function<T> for MulFn {
    fn name(&self) -> &'static str {
        "mul"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, needs: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let ga = if needs[0] { Some(g.zip_map(x[1], |g, b| g * b)?) } else { None };
        let gb = if needs[1] { Some(g.zip_map(x[0], |g, a| g * a)?) } else { None };
        Ok(vec![ga, gb])
    }
}

impl<T: Real> Function<T> for ScaleFn {
    fn name(&self) -> &'static str {
        "scale"
    }
    fn backward(&self, _: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, _: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        Ok(vec![Some(g.scale(T::of(self.0)))])
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Real> Function<T> for SiluFn {
    fn name(&self) -> &'static str {
        "silu"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, _: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let gx = g.zip_map(x[0], |g, x| {
            let s = sigmoid(x);
            g * s * (T::one() + x * (T::one() - s))
        })?;
        Ok(vec![Some(gx)])
    }
}

impl<T: Real> Function<T> for SquareFn {
    fn name(&self) -> &'static str {
        "square"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, _: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let two = T::of(2.0);
        Ok(vec![Some(g.zip_map(x[0], |g, x| two * g * x)?)])
    }
}

impl<T: Real> Function<T> for SumFn {
    fn name(&self) -> &'static str {
        "sum"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, _: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        Ok(vec![Some(Tensor::full(x[0].shape(), g.item()))])
    }
}

impl<T: Real> Function<T> for MeanFn {
    fn name(&self) -> &'static str {
        "mean"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, _: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let n = x[0].numel() as f64;
        Ok(vec![Some(Tensor::full(x[0].shape(), T::of(g.item().f64() / n)))])
    }
}

/// Forward pass of [`Tape::resample2`] on a plain tensor.
pub fn resample2<T: Real>(x: &Tensor<T>, dir: Resample) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4()?;
    let src = x.data();
    match dir {
        Resample::Down => {
            if h % 2 != 0 || w % 2 != 0 {
                return shape_err(format!("cannot downsample odd spatial size {h}x{w}"));
            }
            let (ho, wo) = (h / 2, w / 2);
            let quarter = T::of(0.25);
            let mut out = Vec::with_capacity(n * c * ho * wo);
            for plane in src.chunks_exact(h * w) {
                for i in 0..ho {
                    let r0 = &plane[2 * i * w..(2 * i + 1) * w];
                    let r1 = &plane[(2 * i + 1) * w..(2 * i + 2) * w];
                    for j in 0..wo {
                        out.push((r0[2 * j] + r0[2 * j + 1] + r1[2 * j] + r1[2 * j + 1]) * quarter);
                    }
                }
            }
            Tensor::new(vec![n, c, ho, wo], out)
        }
        Resample::Up => {
            let (ho, wo) = (2 * h, 2 * w);
            let mut out = Vec::with_capacity(n * c * ho * wo);
            for plane in src.chunks_exact(h * w) {
                for i in 0..ho {
                    let row = &plane[(i / 2) * w..(i / 2 + 1) * w];
                    for j in 0..wo {
                        out.push(row[j / 2]);
                    }
                }
            }
            Tensor::new(vec![n, c, ho, wo], out)
        }
    }
}

impl<T: Real> Function<T> for ResampleFn {
    fn name(&self) -> &'static str {
        "resample2"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, _: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        // Adjoint of average pooling is quarter-weighted duplication; adjoint of
        // duplication is 2x2 summation.
        let gx = match self.0 {
            Resample::Down => resample2(g, Resample::Up)?.scale(T::of(0.25)),
            Resample::Up => resample2(g, Resample::Down)?.scale(T::of(4.0)),
        };
        debug_assert_eq!(gx.shape(), x[0].shape());
        Ok(vec![Some(gx)])
    }
}

/// Keeps the top-left entry of every 2x2 cell: `[N,C,H,W] -> [N,C,H/2,W/2]`.
pub fn subsample2<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, c, h, w] = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return shape_err(format!("cannot subsample odd spatial size {h}x{w}"));
    }
    let mut out = Vec::with_capacity(n * c * h * w / 4);
    for plane in x.data().chunks_exact(h * w) {
        for i in (0..h).step_by(2) {
            out.extend(plane[i * w..(i + 1) * w].iter().step_by(2));
        }
    }
    Tensor::new(vec![n, c, h / 2, w / 2], out)
}

struct SubsampleFn;

impl<T: Real> Function<T> for SubsampleFn {
    fn name(&self) -> &'static str {
        "subsample2"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, _: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let [_, _, h, w] = x[0].dims4()?;
        let (ho, wo) = (h / 2, w / 2);
        let mut gx = Tensor::zeros(x[0].shape());
        for (dst, src) in gx.data_mut().chunks_exact_mut(h * w).zip(g.data().chunks_exact(ho * wo)) {
            for i in 0..ho {
                for j in 0..wo {
                    dst[2 * i * w + 2 * j] = src[i * wo + j];
                }
            }
        }
        Ok(vec![Some(gx)])
    }
}

impl<T: Real> Function<T> for ConcatFn {
    fn name(&self) -> &'static str {
        "concat_channels"
    }
    fn backward(&self, x: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>, needs: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let [n, c_total, h, w] = g.dims4()?;
        let plane = h * w;
        let mut out = Vec::with_capacity(x.len());
        let mut offset = 0;
        for (k, &ck) in self.0.iter().enumerate() {
            if needs[k] {
                let mut d = Vec::with_capacity(n * ck * plane);
                for b in 0..n {
                    let start = (b * c_total + offset) * plane;
                    d.extend_from_slice(&g.data()[start..start + ck * plane]);
                }
                out.push(Some(Tensor::new(x[k].shape().to_vec(), d)?));
            } else {
                out.push(None);
            }
            offset += ck;
        }
        Ok(out)
    }
}

impl<T: Real> Tape<T> {
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, &[a, b], Box::new(AddFn)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.push(v, &[a, b], Box::new(SubFn)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape(self.value(a), self.value(b))?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(v, &[a, b], Box::new(MulFn)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).scale(T::of(c));
        self.push(v, &[a], Box::new(ScaleFn(c)))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * sigmoid(x));
        self.push(v, &[a], Box::new(SiluFn))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x * x);
        self.push(v, &[a], Box::new(SquareFn))
    }

    /// Sum of all entries, accumulated in f64.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum_f64();
        self.push(Tensor::scalar(T::of(s)), &[a], Box::new(SumFn))
    }

    /// Mean of all entries, accumulated in f64.
    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let m = x.sum_f64() / x.numel() as f64;
        self.push(Tensor::scalar(T::of(m)), &[a], Box::new(MeanFn))
    }

    /// `mean((a - b)^2)`.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.square(d);
        Ok(self.mean(sq))
    }

    pub fn resample2(&mut self, a: Var, dir: Resample) -> Result<Var> {
        let v = resample2(self.value(a), dir)?;
        Ok(self.push(v, &[a], Box::new(ResampleFn(dir))))
    }

    /// Stride-2 subsampling; a stride-1 convolution followed by this equals
    /// the stride-2 convolution with floor output size.
    pub fn subsample2(&mut self, a: Var) -> Result<Var> {
        let v = subsample2(self.value(a))?;
        Ok(self.push(v, &[a], Box::new(SubsampleFn)))
    }

    /// Concatenates `[N, C_k, H, W]` tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first = self.value(parts[0]).dims4()?;
        let mut channels = Vec::with_capacity(parts.len());
        for &p in parts {
            let d = self.value(p).dims4()?;
            if d[0] != first[0] || d[2] != first[2] || d[3] != first[3] {
                return shape_err(format!("concat_channels: {first:?} vs {d:?}"));
            }
            channels.push(d[1]);
        }
        let c_total: usize = channels.iter().sum();
        let [n, _, h, w] = first;
        let plane = h * w;
        let mut data = Vec::with_capacity(n * c_total * plane);
        for b in 0..n {
            for (&p, &ck) in parts.iter().zip(&channels) {
                let src = self.value(p).data();
                data.extend_from_slice(&src[b * ck * plane..(b + 1) * ck * plane]);
            }
        }
        let v = Tensor::new(vec![n, c_total, h, w], data)?;
        Ok(self.push(v, parts, Box::new(ConcatFn(channels))))
    }
}
