//! 2-d cross-correlation via im2col + GEMM over the whole batch.

use crate::error::{shape_err, Result};

use super::real::Real;
use super::tape::{Function, Tape, Var};
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
struct Geometry {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn new(input: &[usize], kernel: &[usize], bias: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let [n, cin, h, w] = match *input {
            [a, b, c, d] => [a, b, c, d],
            _ => return shape_err(format!("conv2d input must be [N,C,H,W], got {input:?}")),
        };
        let [cout, kcin, kh, kw] = match *kernel {
            [a, b, c, d] => [a, b, c, d],
            _ => return shape_err(format!("conv2d kernel must be [Cout,Cin,kh,kw], got {kernel:?}")),
        };
        if kcin != cin {
            return shape_err(format!(
                "conv2d kernel expects {kcin} input channels, input {input:?} has {cin}"
            ));
        }
        if bias != [cout] {
            return shape_err(format!("conv2d bias must be [{cout}], got {bias:?}"));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return shape_err(format!("conv2d kernel size must be odd, got {kh}x{kw}"));
        }
        if stride == 0 {
            return shape_err("conv2d stride must be positive");
        }
        let out_dim = |size: usize, k: usize| -> Result<usize> {
            let span = size + 2 * pad;
            if span < k || !(span - k).is_multiple_of(stride) {
                return shape_err(format!(
                    "conv2d output size ({size} + 2*{pad} - {k})/{stride} + 1 is not integral"
                ));
            }
            Ok((span - k) / stride + 1)
        };
        let ho = out_dim(h, kh)?;
        let wo = out_dim(w, kw)?;
        Ok(Self { n, cin, h, w, cout, kh, kw, stride, pad, ho, wo })
    }

    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.ho * self.wo
    }

    /// Source pixel for output coordinate `o` and kernel tap `t`, if in bounds.
    #[inline]
    fn src(&self, o: usize, t: usize, size: usize) -> Option<usize> {
        let pos = (o * self.stride + t) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < size).then_some(pos as usize)
    }
}

fn im2col<T: Real>(x: &[T], g: &Geometry) -> Vec<T> {
    let (p, np) = (g.p(), g.n * g.p());
    let mut cols = vec![T::zero(); g.k() * np];
    for ci in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst_row = &mut cols[row * np..(row + 1) * np];
                for b in 0..g.n {
                    let plane = &x[(b * g.cin + ci) * g.h * g.w..][..g.h * g.w];
                    let dst = &mut dst_row[b * p..(b + 1) * p];
                    for oi in 0..g.ho {
                        let Some(ii) = g.src(oi, ki, g.h) else { continue };
                        let src_row = &plane[ii * g.w..(ii + 1) * g.w];
                        for oj in 0..g.wo {
                            if let Some(jj) = g.src(oj, kj, g.w) {
                                dst[oi * g.wo + oj] = src_row[jj];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Real>(cols: &[T], g: &Geometry) -> Vec<T> {
    let (p, np) = (g.p(), g.n * g.p());
    let mut x = vec![T::zero(); g.n * g.cin * g.h * g.w];
    for ci in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src_row = &cols[row * np..(row + 1) * np];
                for b in 0..g.n {
                    let plane = &mut x[(b * g.cin + ci) * g.h * g.w..][..g.h * g.w];
                    let src = &src_row[b * p..(b + 1) * p];
                    for oi in 0..g.ho {
                        let Some(ii) = g.src(oi, ki, g.h) else { continue };
                        for oj in 0..g.wo {
                            if let Some(jj) = g.src(oj, kj, g.w) {
                                let d = &mut plane[ii * g.w + jj];
                                *d = *d + src[oi * g.wo + oj];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

fn conv_forward<T: Real>(x: &Tensor<T>, k: &Tensor<T>, bias: &Tensor<T>, g: &Geometry) -> Result<Tensor<T>> {
    let (p, np) = (g.p(), g.n * g.p());
    let cols = im2col(x.data(), g);
    let mut out_mat = vec![T::zero(); g.cout * np];
    T::gemm(g.cout, g.k(), np, k.data(), false, &cols, false, &mut out_mat, T::zero());
    let mut out = vec![T::zero(); g.n * g.cout * p];
    for co in 0..g.cout {
        let b = bias.data()[co];
        for n in 0..g.n {
            let src = &out_mat[co * np + n * p..][..p];
            let dst = &mut out[(n * g.cout + co) * p..][..p];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s + b;
            }
        }
    }
    Tensor::new(vec![g.n, g.cout, g.ho, g.wo], out)
}

/// Plain (non-recorded) convolution.
pub fn conv2d<T: Real>(x: &Tensor<T>, kernel: &Tensor<T>, bias: &Tensor<T>, stride: usize, pad: usize) -> Result<Tensor<T>> {
    let g = Geometry::new(x.shape(), kernel.shape(), bias.shape(), stride, pad)?;
    conv_forward(x, kernel, bias, &g)
}

struct ConvFn(Geometry);

impl<T: Real> Function<T> for ConvFn {
    fn name(&self) -> &'static str {
        "conv2d"
    }

    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, grad: &Tensor<T>, needs: &[bool]) -> Result<Vec<Option<Tensor<T>>>> {
        let g = &self.0;
        let (x, k) = (inputs[0], inputs[1]);
        let (p, np) = (g.p(), g.n * g.p());
        let mut gmat = vec![T::zero(); g.cout * np];
        for n in 0..g.n {
            for co in 0..g.cout {
                let src = &grad.data()[(n * g.cout + co) * p..][..p];
                gmat[co * np + n * p..][..p].copy_from_slice(src);
            }
        }
        let gx = if needs[0] {
            let mut gcols = vec![T::zero(); g.k() * np];
            T::gemm(g.k(), g.cout, np, k.data(), true, &gmat, false, &mut gcols, T::zero());
            Some(Tensor::new(x.shape().to_vec(), col2im(&gcols, g))?)
        } else {
            None
        };
        let gk = if needs[1] {
            let cols = im2col(x.data(), g);
            let mut gw = vec![T::zero(); g.cout * g.k()];
            T::gemm(g.cout, np, g.k(), &gmat, false, &cols, true, &mut gw, T::zero());
            Some(Tensor::new(k.shape().to_vec(), gw)?)
        } else {
            None
        };
        let gb = if needs[2] {
            let sums = gmat
                .chunks_exact(np)
                .map(|row| T::of(row.iter().map(|v| v.f64()).sum::<f64>()))
                .collect();
            Some(Tensor::new(vec![g.cout], sums)?)
        } else {
            None
        };
        Ok(vec![gx, gk, gb])
    }
}

impl<T: Real> Tape<T> {
    /// Cross-correlation of `[N,Cin,H,W]` with `[Cout,Cin,kh,kw]` plus bias.
    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let g = Geometry::new(self.shape(input), self.shape(kernel), self.shape(bias), stride, pad)?;
        let out = conv_forward(self.value(input), self.value(kernel), self.value(bias), &g)?;
        Ok(self.push(out, &[input, kernel, bias], Box::new(ConvFn(g))))
    }
}
