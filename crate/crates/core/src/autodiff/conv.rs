use super::{Tensor, Var};
use crate::error::{Error, Result};

/// 3×3 convolution with zero padding and unit stride.
///
/// `input` is C×H×W, `weight` is O×C×3×3 and `bias` has O entries; the
/// result is O×H×W.
pub fn conv3x3<'g>(input: Var<'g>, weight: Var<'g>, bias: Var<'g>) -> Result<Var<'g>> {
    let x = input.value();
    let w = weight.value();
    let b = bias.value();
    let [c, h, wd] = match x.shape() {
        &[c, h, w] => [c, h, w],
        s => {
            return Err(Error::Shape(format!(
                "conv3x3 input must be C×H×W, got {s:?}"
            )))
        }
    };
    let o = match w.shape() {
        &[o, ci, 3, 3] if ci == c => o,
        s => {
            return Err(Error::Shape(format!(
                "conv3x3 weight must be O×{c}×3×3, got {s:?}"
            )))
        }
    };
    if b.len() != o {
        return Err(Error::Shape(format!(
            "conv3x3 bias needs {o} entries, got {}",
            b.len()
        )));
    }

    let plane = h * wd;
    let mut out = vec![0.0; o * plane];
    for oc in 0..o {
        let dst = &mut out[oc * plane..(oc + 1) * plane];
        dst.iter_mut().for_each(|v| *v = b.data()[oc]);
        for ic in 0..c {
            let src = &x.data()[ic * plane..(ic + 1) * plane];
            let k = &w.data()[(oc * c + ic) * 9..(oc * c + ic) * 9 + 9];
            accumulate_taps(dst, src, k, h, wd, false);
        }
    }

    Ok(input.graph().record(
        "conv3x3",
        &[input, weight, bias],
        Tensor::from_parts(vec![o, h, wd], out),
        Box::new(move |g, need| {
            let dx = need[0].then(|| {
                let mut dx = vec![0.0; c * plane];
                for oc in 0..o {
                    let go = &g[oc * plane..(oc + 1) * plane];
                    for ic in 0..c {
                        let k = &w.data()[(oc * c + ic) * 9..(oc * c + ic) * 9 + 9];
                        let dst = &mut dx[ic * plane..(ic + 1) * plane];
                        accumulate_taps(dst, go, k, h, wd, true);
                    }
                }
                dx
            });
            let dw = need[1].then(|| {
                let mut dw = vec![0.0; o * c * 9];
                for oc in 0..o {
                    let go = &g[oc * plane..(oc + 1) * plane];
                    for ic in 0..c {
                        let src = &x.data()[ic * plane..(ic + 1) * plane];
                        for (t, slot) in dw[(oc * c + ic) * 9..(oc * c + ic) * 9 + 9]
                            .iter_mut()
                            .enumerate()
                        {
                            let (dy, dxo) = (t as isize / 3 - 1, t as isize % 3 - 1);
                            *slot = tap_correlation(go, src, dy, dxo, h, wd);
                        }
                    }
                }
                dw
            });
            let db = need[2].then(|| {
                (0..o)
                    .map(|oc| g[oc * plane..(oc + 1) * plane].iter().sum())
                    .collect()
            });
            vec![dx, dw, db]
        }),
    ))
}

/// dst[y,x] += Σ_t k[t]·src[y+dy_t, x+dx_t]; with `transpose` the taps are
/// mirrored, which is the adjoint of the forward correlation.
fn accumulate_taps(dst: &mut [f64], src: &[f64], k: &[f64], h: usize, w: usize, transpose: bool) {
    for (t, &kv) in k.iter().enumerate() {
        if kv == 0.0 {
            continue;
        }
        let (mut dy, mut dx) = (t as isize / 3 - 1, t as isize % 3 - 1);
        if transpose {
            dy = -dy;
            dx = -dx;
        }
        let y0 = (-dy).max(0) as usize;
        let y1 = (h as isize - dy).min(h as isize) as usize;
        let x0 = (-dx).max(0) as usize;
        let x1 = (w as isize - dx).min(w as isize) as usize;
        for y in y0..y1 {
            let sy = (y as isize + dy) as usize;
            let drow = &mut dst[y * w + x0..y * w + x1];
            let srow =
                &src[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
            for (d, s) in drow.iter_mut().zip(srow) {
                *d += kv * s;
            }
        }
    }
}

/// Σ_{y,x} go[y,x]·src[y+dy, x+dx] over in-bounds positions.
fn tap_correlation(go: &[f64], src: &[f64], dy: isize, dx: isize, h: usize, w: usize) -> f64 {
    let y0 = (-dy).max(0) as usize;
    let y1 = (h as isize - dy).min(h as isize) as usize;
    let x0 = (-dx).max(0) as usize;
    let x1 = (w as isize - dx).min(w as isize) as usize;
    let mut acc = 0.0;
    for y in y0..y1 {
        let sy = (y as isize + dy) as usize;
        let grow = &go[y * w + x0..y * w + x1];
        let srow = &src[sy * w + (x0 as isize + dx) as usize..sy * w + (x1 as isize + dx) as usize];
        acc += grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
    }
    acc
}
