//! Dense tensors and the order-changing operators used to assemble network
//! total tensors: the Bhattacharya–Mesner product, blow, forget and
//! contraction. All slot indices are 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BilinearScheme;
use crate::scalar::Scalar;

/// Dense row-major tensor. The last index varies fastest.
///
/// Order-0 tensors (empty `dims`, one entry) only arise as the result of a
/// full contraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr<S>", bound(deserialize = "S: Scalar + Deserialize<'de>"))]
pub struct Tensor<S = f64> {
    dims: Vec<usize>,
    data: Vec<S>,
}

#[derive(Deserialize)]
struct TensorRepr<S> {
    dims: Vec<usize>,
    data: Vec<S>,
}

impl<S: Scalar> TryFrom<TensorRepr<S>> for Tensor<S> {
    type Error = Error;

    fn try_from(raw: TensorRepr<S>) -> Result<Self> {
        Tensor::new(raw.dims, raw.data)
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Advances `idx` to the next row-major multi-index; false once exhausted.
fn next_index(idx: &mut [usize], dims: &[usize]) -> bool {
    for k in (0..dims.len()).rev() {
        idx[k] += 1;
        if idx[k] < dims[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

/// Calls `f` on every multi-index of `dims` in row-major order.
pub fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    if dims.contains(&0) {
        return;
    }
    let mut idx = vec![0; dims.len()];
    loop {
        f(&idx);
        if !next_index(&mut idx, dims) {
            break;
        }
    }
}

fn check_slot_set(slots: &[usize], order: usize) -> Result<()> {
    let mut seen = vec![false; order];
    for &s in slots {
        if s >= order {
            return Err(Error::BadIndexSet(format!(
                "slot {s} out of range for order {order}"
            )));
        }
        if std::mem::replace(&mut seen[s], true) {
            return Err(Error::BadIndexSet(format!("slot {s} listed twice")));
        }
    }
    Ok(())
}

impl<S: Scalar> Tensor<S> {
    pub fn new(dims: Vec<usize>, data: Vec<S>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::ShapeMismatch(format!("zero extent in {dims:?}")));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![S::zero(); len],
        }
    }

    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> S) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for_each_index(dims, |idx| data.push(f(idx)));
        Self {
            dims: dims.to_vec(),
            data,
        }
    }

    pub fn vector(data: Vec<S>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    /// Builds an order-2 tensor from equal-length rows.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let n = rows.len();
        Self::new(vec![n, cols], rows.into_iter().flatten().collect())
    }

    pub fn scalar(value: S) -> Self {
        Self {
            dims: Vec::new(),
            data: vec![value],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> &S {
        &self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: S) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// Entry `(i, j)` of an order-2 tensor.
    pub fn at(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.dims[1] + j]
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        let cols = self.dims.get(1).copied().unwrap_or(1);
        self.data.chunks(cols).map(<[S]>::to_vec).collect()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Tensor<T> {
        Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(Self {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: &S) -> Self {
        self.map(|x| x.clone() * s.clone())
    }

    pub fn sum(&self) -> S {
        self.data.iter().cloned().fold(S::zero(), |a, b| a + b)
    }

    /// Sum of squared entries.
    pub fn norm_sq(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |a, b| a + b.clone() * b.clone())
    }

    pub fn transpose(&self) -> Result<Self> {
        let [r, c] = self.matrix_dims()?;
        Ok(Self::from_fn(&[c, r], |ix| self.at(ix[1], ix[0]).clone()))
    }

    /// Conventional matrix product of two order-2 tensors.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let [n, m] = self.matrix_dims()?;
        let [m2, p] = rhs.matrix_dims()?;
        if m != m2 {
            return Err(Error::ShapeMismatch(format!("{n}x{m} times {m2}x{p}")));
        }
        Ok(Self::from_fn(&[n, p], |ix| {
            (0..m).fold(S::zero(), |acc, k| {
                acc + self.at(ix[0], k).clone() * rhs.at(k, ix[1]).clone()
            })
        }))
    }

    pub fn matrix_dims(&self) -> Result<[usize; 2]> {
        match self.dims[..] {
            [r, c] => Ok([r, c]),
            _ => Err(Error::ShapeMismatch(format!(
                "expected a matrix, got dims {:?}",
                self.dims
            ))),
        }
    }

    /// Blow (inflation): appends a slot that copies the first index along a
    /// diagonal, `b(T)[i_1..i_d, j] = T[i_1..i_d]` if `i_1 == j` else 0.
    pub fn blow(&self) -> Result<Self> {
        let Some(&first) = self.dims.first() else {
            return Err(Error::ShapeMismatch("cannot blow an order-0 tensor".into()));
        };
        let mut dims = self.dims.clone();
        dims.push(first);
        let mut out = Self::zeros(&dims);
        for_each_index(&self.dims, |idx| {
            let mut full = idx.to_vec();
            full.push(idx[0]);
            out.set(&full, self.get(idx).clone());
        });
        Ok(out)
    }

    /// Forget (copy): inserts ignored slots at positions `slots` of the
    /// result, which has order `target_order`. `extents[k]` is the extent of
    /// the slot inserted at `slots[k]`.
    pub fn forget(&self, slots: &[usize], extents: &[usize], target_order: usize) -> Result<Self> {
        if target_order < self.order() || slots.len() != target_order - self.order() {
            return Err(Error::BadIndexSet(format!(
                "{} forgotten slots cannot lift order {} to {target_order}",
                slots.len(),
                self.order()
            )));
        }
        if extents.len() != slots.len() {
            return Err(Error::BadIndexSet(format!(
                "{} extents for {} forgotten slots",
                extents.len(),
                slots.len()
            )));
        }
        check_slot_set(slots, target_order)?;
        let mut new_extent = vec![None; target_order];
        for (&s, &e) in slots.iter().zip(extents) {
            if e == 0 {
                return Err(Error::ShapeMismatch("zero extent for forgotten slot".into()));
            }
            new_extent[s] = Some(e);
        }
        let mut kept = self.dims.iter();
        let dims: Vec<usize> = new_extent
            .iter()
            .map(|e| e.unwrap_or_else(|| *kept.next().expect("slot count checked")))
            .collect();
        let kept_slots: Vec<usize> = (0..target_order).filter(|s| new_extent[*s].is_none()).collect();
        let mut src = vec![0; self.order()];
        Ok(Self::from_fn(&dims, |idx| {
            for (k, &s) in kept_slots.iter().enumerate() {
                src[k] = idx[s];
            }
            self.get(&src).clone()
        }))
    }

    /// Sums out the slots in `slots`; the remaining slots keep their order.
    pub fn contraction(&self, slots: &[usize]) -> Result<Self> {
        check_slot_set(slots, self.order())?;
        let kept: Vec<usize> = (0..self.order()).filter(|s| !slots.contains(s)).collect();
        let dims: Vec<usize> = kept.iter().map(|&s| self.dims[s]).collect();
        let mut out = Self::zeros(&dims);
        let out_strides = strides(&dims);
        for_each_index(&self.dims, |idx| {
            let o: usize = kept.iter().zip(&out_strides).map(|(&s, st)| idx[s] * st).sum();
            let v = self.data[self.offset(idx)].clone();
            out.data[o] = out.data[o].clone() + v;
        });
        Ok(out)
    }
}

/// Generalised Bhattacharya–Mesner product of `d` order-`d` tensors.
///
/// Factor `k` carries the shared summation extent `l` in slot `k`:
/// `T[i_1..i_d] = Σ_h F_1[h, i_2, .., i_d] · F_2[i_1, h, .., i_d] · … · F_d[i_1, .., i_{d-1}, h]`.
/// For two factors this is the matrix product `F_2 · F_1`.
pub fn bmp<S: Scalar>(factors: &[Tensor<S>]) -> Result<Tensor<S>> {
    let d = factors.len();
    if d < 2 {
        return Err(Error::ArityMismatch { expected: 2, got: d });
    }
    if let Some(bad) = factors.iter().find(|f| f.order() != d) {
        return Err(Error::ArityMismatch {
            expected: d,
            got: bad.order(),
        });
    }
    let l = factors[0].dims[0];
    for (k, f) in factors.iter().enumerate() {
        if f.dims[k] != l {
            return Err(Error::ShapeMismatch(format!(
                "factor {k} has extent {} in its shared slot, expected {l}",
                f.dims[k]
            )));
        }
    }
    let mut dims = vec![0; d];
    for (m, extent) in dims.iter_mut().enumerate() {
        let mut others = factors
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != m)
            .map(|(_, f)| f.dims[m]);
        let first = others.next().expect("d >= 2");
        if others.any(|e| e != first) {
            return Err(Error::ShapeMismatch(format!(
                "factors disagree on the extent of slot {m}"
            )));
        }
        *extent = first;
    }
    let fstrides: Vec<Vec<usize>> = factors.iter().map(|f| strides(&f.dims)).collect();
    let mut base = vec![0usize; d];
    Ok(Tensor::from_fn(&dims, |idx| {
        for (k, st) in fstrides.iter().enumerate() {
            base[k] = idx
                .iter()
                .zip(st)
                .enumerate()
                .filter(|(m, _)| *m != k)
                .map(|(_, (i, s))| i * s)
                .sum();
        }
        let mut acc = S::zero();
        for h in 0..l {
            let mut term = S::one();
            for (k, f) in factors.iter().enumerate() {
                term = term * f.data[base[k] + h * fstrides[k][k]].clone();
            }
            acc = acc + term;
        }
        acc
    }))
}

/// The matrix-multiplication tensor ⟨a,b,c⟩ = Σ e_{ij} ⊗ e_{jk} ⊗ e_{ki},
/// each matrix space flattened row-major.
pub fn matmul_tensor<S: Scalar>(a: usize, b: usize, c: usize) -> Tensor<S> {
    let mut t = Tensor::zeros(&[a * b, b * c, c * a]);
    for i in 0..a {
        for j in 0..b {
            for k in 0..c {
                t.set(&[i * b + j, j * c + k, k * a + i], S::one());
            }
        }
    }
    t
}

/// Σ_s u_s ⊗ v_s ⊗ w_s where `u_s`, `v_s` are columns of `u`, `v` and `w_s`
/// is row `s` of `w`.
pub fn cp_reconstruct<S: Scalar>(u: &Tensor<S>, v: &Tensor<S>, w: &Tensor<S>) -> Result<Tensor<S>> {
    let [d1, r] = u.matrix_dims()?;
    let [d2, r2] = v.matrix_dims()?;
    let [r3, d3] = w.matrix_dims()?;
    if r != r2 || r != r3 {
        return Err(Error::ShapeMismatch(format!(
            "ranks disagree: {r}, {r2}, {r3}"
        )));
    }
    let mut t = Tensor::<S>::zeros(&[d1, d2, d3]);
    for s in 0..r {
        for x in 0..d1 {
            let ux = u.at(x, s);
            if ux.is_zero() {
                continue;
            }
            for y in 0..d2 {
                let uv = ux.clone() * v.at(y, s).clone();
                if uv.is_zero() {
                    continue;
                }
                for z in 0..d3 {
                    let o = (x * d2 + y) * d3 + z;
                    t.data[o] = t.data[o].clone() + uv.clone() * w.at(s, z).clone();
                }
            }
        }
    }
    Ok(t)
}

/// Tensor Σ_s h_s ⊗ k_s ⊗ f_s of a bilinear scheme, comparable with
/// `matmul_tensor(n, n, n)`.
///
/// Row `s` of `F` is indexed by vec(AB), i.e. the pair (i, k) at `i*n + k`,
/// while the third slot of ⟨n,n,n⟩ is the (k, i) space, so `f_s` is placed
/// transposed.
pub fn reconstruct<S: Scalar>(scheme: &BilinearScheme<S>, n: usize) -> Result<Tensor<S>> {
    if scheme.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "scheme is for n={}, asked for n={n}",
            scheme.n()
        )));
    }
    let f_t = Tensor::from_fn(&[scheme.r(), n * n], |ix| {
        let (k, i) = (ix[1] / n, ix[1] % n);
        scheme.f().at(ix[0], i * n + k).clone()
    });
    cp_reconstruct(scheme.h(), scheme.k(), &f_t)
}
