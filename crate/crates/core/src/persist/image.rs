use std::path::Path;

use crate::error::{shape_err, HkdError, Result};
use crate::numcore::Tensor;

use super::binary::write_atomic;

/// Gap between contact-sheet tiles, in pixels.
pub const SHEET_PAD: usize = 1;

/// `round(clamp((x + 1) / 2, 0, 1) * 255)`; NaN maps to 0.
pub fn to_u8(x: f32) -> u8 {
    let v = ((x + 1.0) * 0.5).clamp(0.0, 1.0);
    if v.is_nan() {
        0
    } else {
        (v * 255.0).round() as u8
    }
}

/// 8-bit pixels `[H, W, C]` of an image `[C, H, W]`.
fn interleave(img: &Tensor<f32>) -> Result<(usize, usize, usize, Vec<u8>)> {
    let [c, h, w] = match *img.shape() {
        [c, h, w] => [c, h, w],
        _ => return shape_err(format!("image must be [C,H,W], got {:?}", img.shape())),
    };
    let d = img.data();
    let mut out = vec![0u8; c * h * w];
    for ch in 0..c {
        for p in 0..h * w {
            out[p * c + ch] = to_u8(d[ch * h * w + p]);
        }
    }
    Ok((c, h, w, out))
}

fn encode_png(c: usize, h: usize, w: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    let color = match c {
        1 => png::ColorType::Grayscale,
        3 => png::ColorType::Rgb,
        _ => return shape_err(format!("PNG export needs 1 or 3 channels, got {c}")),
    };
    let dim = |v: usize| u32::try_from(v).map_err(|_| HkdError::SizeLimit(format!("image side {v}")));
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, dim(w)?, dim(h)?);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let io = |e: png::EncodingError| HkdError::Io(std::io::Error::other(e));
        let mut writer = enc.write_header().map_err(io)?;
        writer.write_image_data(pixels).map_err(io)?;
        writer.finish().map_err(io)?;
    }
    Ok(buf)
}

/// PNG bytes of one `[C, H, W]` image.
pub fn png_bytes(img: &Tensor<f32>) -> Result<Vec<u8>> {
    let (c, h, w, px) = interleave(img)?;
    encode_png(c, h, w, &px)
}

pub fn write_png(path: impl AsRef<Path>, img: &Tensor<f32>) -> Result<()> {
    write_atomic(path.as_ref(), &png_bytes(img)?)
}

/// Tiles `[N, C, H, W]` images row-major, `cols` per row, on a black background.
pub fn contact_sheet(images: &Tensor<f32>, cols: usize) -> Result<Tensor<f32>> {
    let [n, c, h, w] = images.dims4()?;
    if n == 0 || cols == 0 {
        return Err(HkdError::InvalidArgument("contact sheet needs images and at least one column".into()));
    }
    let cols = cols.min(n);
    let rows = n.div_ceil(cols);
    let (sh, sw) = (rows * (h + SHEET_PAD) + SHEET_PAD, cols * (w + SHEET_PAD) + SHEET_PAD);
    let mut sheet = Tensor::full(&[c, sh, sw], -1.0f32);
    let src = images.data();
    let dst = sheet.data_mut();
    for k in 0..n {
        let (oy, ox) = ((k / cols) * (h + SHEET_PAD) + SHEET_PAD, (k % cols) * (w + SHEET_PAD) + SHEET_PAD);
        for ch in 0..c {
            for y in 0..h {
                let s = ((k * c + ch) * h + y) * w;
                let d = (ch * sh + oy + y) * sw + ox;
                dst[d..d + w].copy_from_slice(&src[s..s + w]);
            }
        }
    }
    Ok(sheet)
}

pub fn write_contact_sheet(path: impl AsRef<Path>, images: &Tensor<f32>, cols: usize) -> Result<()> {
    write_png(path, &contact_sheet(images, cols)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_map() {
        assert_eq!(to_u8(-1.0), 0);
        assert_eq!(to_u8(1.0), 255);
        assert_eq!(to_u8(0.0), 128);
        assert_eq!(to_u8(-7.0), 0);
        assert_eq!(to_u8(3.0), 255);
        assert_eq!(to_u8(f32::NAN), 0);
    }

    #[test]
    fn sheet_layout() {
        let imgs = Tensor::from_fn(&[3, 1, 2, 2], |i| (i / 4) as f32 * 0.5);
        let s = contact_sheet(&imgs, 2).unwrap();
        assert_eq!(s.shape(), &[1, 7, 7]);
        assert_eq!(s.data()[7 + 1], 0.0);
        assert_eq!(s.data()[7 + 4], 0.5);
        assert_eq!(s.data()[4 * 7 + 1], 1.0);
        assert_eq!(s.data()[4 * 7 + 4], -1.0);
    }

    #[test]
    fn png_signature_and_channels() {
        let b = png_bytes(&Tensor::zeros(&[1, 3, 5])).unwrap();
        assert_eq!(&b[..8], b"\x89PNG\r\n\x1a\n");
        assert!(png_bytes(&Tensor::zeros(&[2, 3, 5])).is_err());
    }
}
