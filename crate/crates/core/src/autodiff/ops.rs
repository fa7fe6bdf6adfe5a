//! Generic tensor primitives. Each records a forward value and an adjoint.

use std::rc::Rc;

use super::{Tensor, Var};
use crate::error::{Error, Result};

fn check_same(op: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "{op}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn check_rows(op: &str, t: &Tensor, cols: Option<usize>) -> Result<(usize, usize)> {
    if t.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "{op}: expected a 2-D tensor, got {:?}",
            t.shape()
        )));
    }
    let (n, c) = (t.shape()[0], t.shape()[1]);
    if let Some(want) = cols {
        if c != want {
            return Err(Error::Shape(format!(
                "{op}: expected {want} columns, got {c}"
            )));
        }
    }
    Ok((n, c))
}

/// Stable logistic function.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sparse matrix in compressed-row form, used as a constant operator.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in rows {
            for &(c, v) in r {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    fn apply(&self, x: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * width];
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (c, v) = (self.col_idx[k], self.values[k]);
                for j in 0..width {
                    out[r * width + j] += v * x[c * width + j];
                }
            }
        }
        out
    }

    fn apply_transpose(&self, y: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols * width];
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let (c, v) = (self.col_idx[k], self.values[k]);
                for j in 0..width {
                    out[c * width + j] += v * y[r * width + j];
                }
            }
        }
        out
    }
}

impl<'g> Var<'g> {
    fn unary(
        self,
        op: &'static str,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var<'g> {
        let x = self.value();
        let out = x.map(f);
        let y = Rc::new(out.clone());
        let xs = x.clone();
        self.graph().record(
            op,
            &[self],
            out,
            Box::new(move |g, _| {
                let dx = g
                    .iter()
                    .zip(xs.data())
                    .zip(y.data())
                    .map(|((g, &x), &y)| g * df(x, y))
                    .collect();
                vec![Some(dx)]
            }),
        )
    }

    pub fn neg(self) -> Var<'g> {
        self.unary("neg", |x| -x, |_, _| -1.0)
    }

    pub fn scale(self, c: f64) -> Var<'g> {
        self.unary("scale", move |x| c * x, move |_, _| c)
    }

    pub fn add_scalar(self, c: f64) -> Var<'g> {
        self.unary("add_scalar", move |x| x + c, |_, _| 1.0)
    }

    pub fn square(self) -> Var<'g> {
        self.unary("square", |x| x * x, |x, _| 2.0 * x)
    }

    /// Square root; the adjoint at zero is taken as zero.
    pub fn sqrt(self) -> Var<'g> {
        self.unary(
            "sqrt",
            f64::sqrt,
            |_, y| if y > 0.0 { 0.5 / y } else { 0.0 },
        )
    }

    pub fn exp(self) -> Var<'g> {
        self.unary("exp", f64::exp, |_, y| y)
    }

    pub fn ln(self) -> Var<'g> {
        self.unary("ln", f64::ln, |x, _| 1.0 / x)
    }

    pub fn sin(self) -> Var<'g> {
        self.unary("sin", f64::sin, |x, _| x.cos())
    }

    pub fn sigmoid(self) -> Var<'g> {
        self.unary("sigmoid", logistic, |_, y| y * (1.0 - y))
    }

    /// max(x, 0); the subgradient at 0 is 0.
    pub fn relu(self) -> Var<'g> {
        self.unary(
            "relu",
            |x| x.max(0.0),
            |x, _| if x > 0.0 { 1.0 } else { 0.0 },
        )
    }

    pub fn abs(self) -> Var<'g> {
        self.unary("abs", f64::abs, |x, _| {
            x.signum() * (x != 0.0) as i32 as f64
        })
    }

    /// x^p for a constant exponent; intended for x ≥ 0 with p ≥ 1.
    pub fn powf(self, p: f64) -> Var<'g> {
        self.unary(
            "powf",
            move |x| x.powf(p),
            move |x, _| {
                if x == 0.0 && p >= 1.0 {
                    if p == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    p * x.powf(p - 1.0)
                }
            },
        )
    }

    fn binary(
        self,
        other: Var<'g>,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
        da: impl Fn(f64, f64) -> f64 + 'static,
        db: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Var<'g>> {
        let a = self.value();
        let b = other.value();
        check_same(op, &a, &b)?;
        let data = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::from_parts(a.shape().to_vec(), data);
        Ok(self.graph().record(
            op,
            &[self, other],
            out,
            Box::new(move |g, need| {
                let ga = need[0].then(|| {
                    g.iter()
                        .zip(a.data().iter().zip(b.data()))
                        .map(|(g, (&x, &y))| g * da(x, y))
                        .collect()
                });
                let gb = need[1].then(|| {
                    g.iter()
                        .zip(a.data().iter().zip(b.data()))
                        .map(|(g, (&x, &y))| g * db(x, y))
                        .collect()
                });
                vec![ga, gb]
            }),
        ))
    }

    pub fn add(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(other, "add", |a, b| a + b, |_, _| 1.0, |_, _| 1.0)
    }

    pub fn sub(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(other, "sub", |a, b| a - b, |_, _| 1.0, |_, _| -1.0)
    }

    pub fn mul(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(other, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn div(self, other: Var<'g>) -> Result<Var<'g>> {
        self.binary(
            other,
            "div",
            |a, b| a / b,
            |_, b| 1.0 / b,
            |a, b| -a / (b * b),
        )
    }

    pub fn sum(self) -> Var<'g> {
        let x = self.value();
        let n = x.len();
        self.graph().record(
            "sum",
            &[self],
            Tensor::scalar(x.sum()),
            Box::new(move |g, _| vec![Some(vec![g[0]; n])]),
        )
    }

    /// Mean over all elements; the mean of an empty tensor is 0.
    pub fn mean(self) -> Var<'g> {
        let x = self.value();
        let n = x.len();
        let m = if n == 0 { 0.0 } else { x.sum() / n as f64 };
        self.graph().record(
            "mean",
            &[self],
            Tensor::scalar(m),
            Box::new(move |g, _| vec![Some(vec![g[0] / n.max(1) as f64; n])]),
        )
    }

    /// Broadcasts a one-element tensor to `shape`.
    pub fn expand(self, shape: &[usize]) -> Result<Var<'g>> {
        let x = self.value();
        if x.len() != 1 {
            return Err(Error::Shape(format!(
                "expand needs a one-element tensor, got {:?}",
                x.shape()
            )));
        }
        let out = Tensor::full(shape, x.item());
        Ok(self.graph().record(
            "expand",
            &[self],
            out,
            Box::new(|g, _| vec![Some(vec![g.iter().sum()])]),
        ))
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'g>> {
        let out = (*self.value()).clone().reshaped(shape.to_vec())?;
        Ok(self.graph().record(
            "reshape",
            &[self],
            out,
            Box::new(|g, _| vec![Some(g.to_vec())]),
        ))
    }

    /// Selects rows of an N×C tensor: out[r] = x[index[r]].
    pub fn gather_rows(self, index: &[usize]) -> Result<Var<'g>> {
        let x = self.value();
        let (n, c) = check_rows("gather_rows", &x, None)?;
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(Error::Shape(format!("gather_rows: row {bad} out of {n}")));
        }
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            data.extend_from_slice(&x.data()[i * c..(i + 1) * c]);
        }
        let index = index.to_vec();
        Ok(self.graph().record(
            "gather_rows",
            &[self],
            Tensor::from_parts(vec![index.len(), c], data),
            Box::new(move |g, _| {
                let mut dx = vec![0.0; n * c];
                for (r, &i) in index.iter().enumerate() {
                    for j in 0..c {
                        dx[i * c + j] += g[r * c + j];
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Flat gather: out[i] = x[index[i]], or `fill` where the index is `None`.
    pub fn take(self, index: &[Option<usize>], fill: f64) -> Result<Var<'g>> {
        let x = self.value();
        let n = x.len();
        if let Some(bad) = index.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::Shape(format!("take: element {bad} out of {n}")));
        }
        let data = index
            .iter()
            .map(|i| i.map_or(fill, |i| x.data()[i]))
            .collect();
        let index = index.to_vec();
        Ok(self.graph().record(
            "take",
            &[self],
            Tensor::vector(data),
            Box::new(move |g, _| {
                let mut dx = vec![0.0; n];
                for (gi, i) in g.iter().zip(&index) {
                    if let Some(i) = i {
                        dx[*i] += gi;
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Constant sparse operator applied to an N×C tensor: M·X.
    pub fn sparse_matmul(self, m: Rc<CsrMatrix>) -> Result<Var<'g>> {
        let x = self.value();
        let (n, c) = check_rows("sparse_matmul", &x, None)?;
        if m.cols != n {
            return Err(Error::Shape(format!(
                "sparse_matmul: operator has {} columns, tensor has {n} rows",
                m.cols
            )));
        }
        let out = Tensor::from_parts(vec![m.rows, c], m.apply(x.data(), c));
        Ok(self.graph().record(
            "sparse_matmul",
            &[self],
            out,
            Box::new(move |g, _| vec![Some(m.apply_transpose(g, c))]),
        ))
    }

    /// Row-wise affine map: out[r] = M·x[r] + t with M of shape b×a.
    pub fn linear_rows(self, m: &[Vec<f64>], t: &[f64]) -> Result<Var<'g>> {
        let x = self.value();
        let b = m.len();
        let a = m.first().map_or(0, Vec::len);
        if t.len() != b || m.iter().any(|r| r.len() != a) {
            return Err(Error::Shape("linear_rows: ragged matrix or offset".into()));
        }
        let (n, _) = check_rows("linear_rows", &x, Some(a))?;
        let mut data = vec![0.0; n * b];
        for r in 0..n {
            let row = &x.data()[r * a..(r + 1) * a];
            for i in 0..b {
                data[r * b + i] = t[i] + m[i].iter().zip(row).map(|(p, q)| p * q).sum::<f64>();
            }
        }
        let m = m.to_vec();
        Ok(self.graph().record(
            "linear_rows",
            &[self],
            Tensor::from_parts(vec![n, b], data),
            Box::new(move |g, _| {
                let mut dx = vec![0.0; n * a];
                for r in 0..n {
                    for i in 0..b {
                        let gi = g[r * b + i];
                        for j in 0..a {
                            dx[r * a + j] += m[i][j] * gi;
                        }
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Row-wise cross product of two N×3 tensors.
    pub fn cross_rows(self, other: Var<'g>) -> Result<Var<'g>> {
        let a = self.value();
        let b = other.value();
        check_same("cross_rows", &a, &b)?;
        let (n, _) = check_rows("cross_rows", &a, Some(3))?;
        let cross = |u: &[f64], v: &[f64]| {
            [
                u[1] * v[2] - u[2] * v[1],
                u[2] * v[0] - u[0] * v[2],
                u[0] * v[1] - u[1] * v[0],
            ]
        };
        let mut data = Vec::with_capacity(n * 3);
        for r in 0..n {
            data.extend(cross(
                &a.data()[3 * r..3 * r + 3],
                &b.data()[3 * r..3 * r + 3],
            ));
        }
        Ok(self.graph().record(
            "cross_rows",
            &[self, other],
            Tensor::from_parts(vec![n, 3], data),
            Box::new(move |g, need| {
                // d(a×b) with upstream g: da = b×g, db = g×a
                let mut da = vec![0.0; 3 * n];
                let mut db = vec![0.0; 3 * n];
                for r in 0..n {
                    let (u, v, gr) = (
                        &a.data()[3 * r..3 * r + 3],
                        &b.data()[3 * r..3 * r + 3],
                        &g[3 * r..3 * r + 3],
                    );
                    da[3 * r..3 * r + 3].copy_from_slice(&cross(v, gr));
                    db[3 * r..3 * r + 3].copy_from_slice(&cross(gr, u));
                }
                vec![need[0].then_some(da), need[1].then_some(db)]
            }),
        ))
    }

    /// Row-wise inner product of two N×C tensors, giving N values.
    pub fn dot_rows(self, other: Var<'g>) -> Result<Var<'g>> {
        let a = self.value();
        let b = other.value();
        check_same("dot_rows", &a, &b)?;
        let (n, c) = check_rows("dot_rows", &a, None)?;
        let data = (0..n)
            .map(|r| {
                a.data()[r * c..(r + 1) * c]
                    .iter()
                    .zip(&b.data()[r * c..(r + 1) * c])
                    .map(|(x, y)| x * y)
                    .sum()
            })
            .collect();
        Ok(self.graph().record(
            "dot_rows",
            &[self, other],
            Tensor::vector(data),
            Box::new(move |g, need| {
                let scaled = |src: &Tensor| -> Vec<f64> {
                    src.data()
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v * g[i / c])
                        .collect()
                };
                vec![need[0].then(|| scaled(&b)), need[1].then(|| scaled(&a))]
            }),
        ))
    }

    /// Euclidean norm of each row of an N×C tensor. Zero rows get a zero
    /// subgradient.
    pub fn row_norm(self) -> Result<Var<'g>> {
        let x = self.value();
        let (n, c) = check_rows("row_norm", &x, None)?;
        let norms: Vec<f64> = (0..n)
            .map(|r| {
                x.data()[r * c..(r + 1) * c]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let ns = norms.clone();
        Ok(self.graph().record(
            "row_norm",
            &[self],
            Tensor::vector(norms),
            Box::new(move |g, _| {
                let dx = x
                    .data()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let r = i / c;
                        if ns[r] > 0.0 {
                            g[r] * v / ns[r]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                vec![Some(dx)]
            }),
        ))
    }

    /// Scales each row of an N×C tensor to unit length.
    pub fn normalize_rows(self) -> Result<Var<'g>> {
        let x = self.value();
        let (n, c) = check_rows("normalize_rows", &x, None)?;
        let mut norms = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * c);
        for r in 0..n {
            let row = &x.data()[r * c..(r + 1) * c];
            let len = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len == 0.0 {
                return Err(Error::Numeric(format!(
                    "normalize_rows: row {r} has zero length"
                )));
            }
            norms.push(len);
            data.extend(row.iter().map(|v| v / len));
        }
        let y = Rc::new(Tensor::from_parts(vec![n, c], data.clone()));
        Ok(self.graph().record(
            "normalize_rows",
            &[self],
            Tensor::from_parts(vec![n, c], data),
            Box::new(move |g, _| {
                // d(x/|x|) = (g - y (y·g)) / |x|
                let mut dx = vec![0.0; n * c];
                for r in 0..n {
                    let yr = &y.data()[r * c..(r + 1) * c];
                    let gr = &g[r * c..(r + 1) * c];
                    let yg: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        dx[r * c + j] = (gr[j] - yr[j] * yg) / norms[r];
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }

    /// Probabilistic union along the last axis of a P×K tensor:
    /// out[p] = 1 − Π_k (1 − x[p,k]).
    pub fn prob_union(self) -> Result<Var<'g>> {
        let x = self.value();
        let (p, k) = check_rows("prob_union", &x, None)?;
        let data = (0..p)
            .map(|r| {
                1.0 - x.data()[r * k..(r + 1) * k]
                    .iter()
                    .map(|v| 1.0 - v)
                    .product::<f64>()
            })
            .collect();
        Ok(self.graph().record(
            "prob_union",
            &[self],
            Tensor::vector(data),
            Box::new(move |g, _| {
                let mut dx = vec![0.0; p * k];
                let mut prefix = vec![1.0; k + 1];
                for r in 0..p {
                    if g[r] == 0.0 {
                        continue;
                    }
                    let row = &x.data()[r * k..(r + 1) * k];
                    for j in 0..k {
                        prefix[j + 1] = prefix[j] * (1.0 - row[j]);
                    }
                    // product of the other factors, without division
                    let mut suffix = 1.0;
                    for j in (0..k).rev() {
                        dx[r * k + j] = g[r] * prefix[j] * suffix;
                        suffix *= 1.0 - row[j];
                    }
                }
                vec![Some(dx)]
            }),
        ))
    }
}

/// Concatenates tensors along the leading axis; trailing shapes must agree.
pub fn concat<'g>(parts: &[Var<'g>]) -> Result<Var<'g>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Shape("concat of nothing".into()))?;
    let values: Vec<Rc<Tensor>> = parts.iter().map(|v| v.value()).collect();
    let tail = values[0].shape().get(1..).unwrap_or(&[]).to_vec();
    let mut lead = 0;
    let mut data = Vec::new();
    let mut sizes = Vec::with_capacity(parts.len());
    for v in &values {
        let shape = v.shape();
        if shape.is_empty() || shape[1..] != tail[..] {
            return Err(Error::Shape(format!(
                "concat: incompatible shape {shape:?}"
            )));
        }
        lead += shape[0];
        sizes.push(v.len());
        data.extend_from_slice(v.data());
    }
    let mut shape = vec![lead];
    shape.extend(tail);
    Ok(first.graph().record(
        "concat",
        parts,
        Tensor::from_parts(shape, data),
        Box::new(move |g, _| {
            let mut off = 0;
            sizes
                .iter()
                .map(|&s| {
                    let part = g[off..off + s].to_vec();
                    off += s;
                    Some(part)
                })
                .collect()
        }),
    ))
}
