use std::collections::HashMap;
use std::rc::Rc;

use super::{ParamId, ParamStore};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Row-major sparse matrix, one list of `(column, weight)` per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub cols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(rows.iter().flatten().all(|&(c, _)| c < cols));
        SparseMatrix { cols, rows }
    }
}

/// Contiguous segments `offsets[s]..offsets[s + 1]` of a column vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    offsets: Vec<usize>,
}

impl Segments {
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for len in lengths {
            offsets.push(offsets.last().unwrap() + len);
        }
        Segments { offsets }
    }

    pub fn count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn range(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Log(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Rc<Vec<usize>>),
    SparseMul(Rc<SparseMatrix>, Var),
    Transpose(Var),
    SoftmaxRows(Var),
    SegmentSoftmax(Var, Rc<Segments>),
    SegmentWeightedSum(Var, Var, Rc<Segments>),
    MeanRows(Var),
    Sum(Var),
    Pick(Var, usize),
    MaskMul(Var, Rc<Vec<f64>>),
    PadCols(Var, usize),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

/// Records matrix operations for one forward pass and replays them backwards.
///
/// Every value is a `rows × cols` matrix; vectors are single rows. Binary
/// elementwise ops broadcast their right operand when it is `1 × cols` or
/// `1 × 1`.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Index into a broadcast right operand.
#[inline]
fn bidx(b_rows: usize, b_cols: usize, cols: usize, i: usize) -> usize {
    match (b_rows, b_cols) {
        (1, 1) => 0,
        (1, _) => i % cols,
        _ => i,
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let n = &self.nodes[v.0];
        assert_eq!(n.value.len(), 1, "not a scalar");
        n.value[0]
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(rows * cols, value.len(), "constant shape");
        self.push(rows, cols, value, Op::Leaf)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push(rows, cols, vec![0.0; rows * cols], Op::Leaf)
    }

    /// Parameter as a leaf; repeated calls reuse the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let t = &store.get(id).tensor;
        let (r, c) = t.dims();
        let v = self.push(r, c, t.values.clone(), Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        assert_eq!(k, k2, "matmul inner dimensions {m}x{k} · {k2}x{n}");
        let mut out = vec![0.0; m * n];
        {
            let av = &self.nodes[a.0].value;
            let bv = &self.nodes[b.0].value;
            for i in 0..m {
                let row = &mut out[i * n..(i + 1) * n];
                for p in 0..k {
                    let x = av[i * k + p];
                    if x == 0.0 {
                        continue;
                    }
                    let brow = &bv[p * n..(p + 1) * n];
                    for (o, bb) in row.iter_mut().zip(brow) {
                        *o += x * bb;
                    }
                }
            }
        }
        self.push(m, n, out, Op::MatMul(a, b))
    }

    fn check_broadcast(&self, a: Var, b: Var) -> (usize, usize) {
        let (r, c) = self.dims(a);
        let (br, bc) = self.dims(b);
        assert!(
            (br == r && bc == c) || (br == 1 && bc == c) || (br == 1 && bc == 1),
            "cannot broadcast {br}x{bc} onto {r}x{c}"
        );
        (r, c)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Var {
        let (r, c) = self.check_broadcast(a, b);
        let (br, bc) = self.dims(b);
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let out = av
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, bv[bidx(br, bc, c, i)]))
            .collect();
        self.push(r, c, out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let (r, c) = self.dims(a);
        let out = self.nodes[a.0].value.iter().map(|&x| f(x)).collect();
        self.push(r, c, out, op)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |x| k * x, Op::Scale(a, k))
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 - x, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Log(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.dims(parts[0]).0;
        assert!(parts.iter().all(|&p| self.dims(p).0 == rows), "concat_cols rows");
        let cols: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                let pc = self.dims(p).1;
                out.extend_from_slice(&self.nodes[p.0].value[r * pc..(r + 1) * pc]);
            }
        }
        self.push(rows, cols, out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.dims(parts[0]).1;
        assert!(parts.iter().all(|&p| self.dims(p).1 == cols), "concat_rows cols");
        let rows: usize = parts.iter().map(|&p| self.dims(p).0).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for &p in parts {
            out.extend_from_slice(&self.nodes[p.0].value);
        }
        self.push(rows, cols, out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let (r, c) = self.dims(a);
        assert!(start + len <= c, "slice_cols out of range");
        let av = &self.nodes[a.0].value;
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&av[i * c + start..i * c + start + len]);
        }
        self.push(r, len, out, Op::SliceCols(a, start))
    }

    pub fn gather_rows(&mut self, a: Var, indices: Rc<Vec<usize>>) -> Var {
        let (r, c) = self.dims(a);
        let av = &self.nodes[a.0].value;
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices.iter() {
            assert!(i < r, "gather index {i} out of {r} rows");
            out.extend_from_slice(&av[i * c..(i + 1) * c]);
        }
        let n = indices.len();
        self.push(n, c, out, Op::GatherRows(a, indices))
    }

    /// `s · a` for a constant sparse `s`.
    pub fn sparse_mul(&mut self, s: Rc<SparseMatrix>, a: Var) -> Var {
        let (r, c) = self.dims(a);
        assert_eq!(s.cols, r, "sparse_mul inner dimension");
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; s.rows.len() * c];
        for (i, row) in s.rows.iter().enumerate() {
            let o = &mut out[i * c..(i + 1) * c];
            for &(j, w) in row {
                for (x, y) in o.iter_mut().zip(&av[j * c..(j + 1) * c]) {
                    *x += w * y;
                }
            }
        }
        let rows = s.rows.len();
        self.push(rows, c, out, Op::SparseMul(s, a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av[i * c + j];
            }
        }
        self.push(c, r, out, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            softmax_into(&av[i * c..(i + 1) * c], &mut out[i * c..(i + 1) * c]);
        }
        self.push(r, c, out, Op::SoftmaxRows(a))
    }

    /// Softmax within each segment of a column vector.
    pub fn segment_softmax(&mut self, a: Var, segs: Rc<Segments>) -> Var {
        let (r, c) = self.dims(a);
        assert!(c == 1 && r == segs.total(), "segment_softmax expects a column of segs.total() rows");
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; r];
        for s in 0..segs.count() {
            let rg = segs.range(s);
            softmax_into(&av[rg.clone()], &mut out[rg]);
        }
        self.push(r, 1, out, Op::SegmentSoftmax(a, segs))
    }

    /// Row `s` of the result is `Σ_{e ∈ s} weights[e] · values[e]`.
    pub fn segment_weighted_sum(&mut self, weights: Var, values: Var, segs: Rc<Segments>) -> Var {
        let (wr, wc) = self.dims(weights);
        let (vr, c) = self.dims(values);
        assert!(wc == 1 && wr == vr && vr == segs.total(), "segment_weighted_sum shapes");
        let wv = &self.nodes[weights.0].value;
        let vv = &self.nodes[values.0].value;
        let mut out = vec![0.0; segs.count() * c];
        for s in 0..segs.count() {
            let o = &mut out[s * c..(s + 1) * c];
            for e in segs.range(s) {
                for (x, y) in o.iter_mut().zip(&vv[e * c..(e + 1) * c]) {
                    *x += wv[e] * y;
                }
            }
        }
        let n = segs.count();
        self.push(n, c, out, Op::SegmentWeightedSum(weights, values, segs))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let (r, c) = self.dims(a);
        let av = &self.nodes[a.0].value;
        let mut out = vec![0.0; c];
        for i in 0..r {
            for j in 0..c {
                out[j] += av[i * c + j];
            }
        }
        out.iter_mut().for_each(|x| *x /= r as f64);
        self.push(1, c, out, Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.nodes[a.0].value.iter().sum();
        self.push(1, 1, vec![s], Op::Sum(a))
    }

    /// Element at flat index `idx` as a `1 × 1` value.
    pub fn pick(&mut self, a: Var, idx: usize) -> Var {
        let x = self.nodes[a.0].value[idx];
        self.push(1, 1, vec![x], Op::Pick(a, idx))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask_mul(&mut self, a: Var, mask: Rc<Vec<f64>>) -> Var {
        let (r, c) = self.dims(a);
        assert_eq!(mask.len(), r * c, "mask shape");
        let out = self.nodes[a.0]
            .value
            .iter()
            .zip(mask.iter())
            .map(|(x, m)| x * m)
            .collect();
        self.push(r, c, out, Op::MaskMul(a, mask))
    }

    /// Appends `extra` zero columns.
    pub fn pad_cols(&mut self, a: Var, extra: usize) -> Var {
        let (r, c) = self.dims(a);
        let av = &self.nodes[a.0].value;
        let mut out = Vec::with_capacity(r * (c + extra));
        for i in 0..r {
            out.extend_from_slice(&av[i * c..(i + 1) * c]);
            out.extend(std::iter::repeat(0.0).take(extra));
        }
        self.push(r, c + extra, out, Op::PadCols(a, extra))
    }

    /// Backpropagates from `output` (seeded with ones) and adds parameter
    /// gradients into `store`.
    pub fn backward(&self, output: Var, store: &mut ParamStore) {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![1.0; self.nodes[output.0].value.len()]);
        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.backward_node(node, &g, &mut grads, store);
        }
    }

    fn backward_node(
        &self,
        node: &Node,
        g: &[f64],
        grads: &mut [Option<Vec<f64>>],
        store: &mut ParamStore,
    ) {
        let val = |v: Var| -> &[f64] { &self.nodes[v.0].value };
        let dims = |v: Var| (self.nodes[v.0].rows, self.nodes[v.0].cols);
        let (rows, cols) = (node.rows, node.cols);
        match &node.op {
            Op::Leaf => {}
            Op::Param(id) => store.accumulate_grad(*id, g),
            Op::MatMul(a, b) => {
                let (m, k) = dims(*a);
                let n = cols;
                let av = val(*a);
                let bv = val(*b);
                let ga = grad_buf(grads, *a, m * k);
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &bv[p * n..(p + 1) * n];
                        ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                let gb = grad_buf(grads, *b, k * n);
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let x = av[i * k + p];
                        if x == 0.0 {
                            continue;
                        }
                        for (o, gg) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                            *o += x * gg;
                        }
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                add_into(grad_buf(grads, *a, g.len()), g, 1.0);
                let (br, bc) = dims(*b);
                let gb = grad_buf(grads, *b, br * bc);
                for (i, x) in g.iter().enumerate() {
                    gb[bidx(br, bc, cols, i)] += sign * x;
                }
            }
            Op::Mul(a, b) => {
                let (br, bc) = dims(*b);
                let av = val(*a);
                let bv = val(*b);
                let ga = grad_buf(grads, *a, g.len());
                for (i, x) in g.iter().enumerate() {
                    ga[i] += x * bv[bidx(br, bc, cols, i)];
                }
                let gb = grad_buf(grads, *b, br * bc);
                for (i, x) in g.iter().enumerate() {
                    gb[bidx(br, bc, cols, i)] += x * av[i];
                }
            }
            Op::Scale(a, k) => add_into(grad_buf(grads, *a, g.len()), g, *k),
            Op::OneMinus(a) => add_into(grad_buf(grads, *a, g.len()), g, -1.0),
            Op::Sigmoid(a) => {
                let ga = grad_buf(grads, *a, g.len());
                for ((o, x), y) in ga.iter_mut().zip(g).zip(&node.value) {
                    *o += x * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let ga = grad_buf(grads, *a, g.len());
                for ((o, x), y) in ga.iter_mut().zip(g).zip(&node.value) {
                    *o += x * (1.0 - y * y);
                }
            }
            Op::Relu(a) => {
                let ga = grad_buf(grads, *a, g.len());
                for ((o, x), y) in ga.iter_mut().zip(g).zip(&node.value) {
                    if *y > 0.0 {
                        *o += x;
                    }
                }
            }
            Op::LeakyRelu(a, slope) => {
                let av = val(*a);
                let ga = grad_buf(grads, *a, g.len());
                for ((o, x), inp) in ga.iter_mut().zip(g).zip(av) {
                    *o += if *inp > 0.0 { *x } else { slope * x };
                }
            }
            Op::Log(a) => {
                let av = val(*a);
                let ga = grad_buf(grads, *a, g.len());
                for ((o, x), inp) in ga.iter_mut().zip(g).zip(av) {
                    *o += x / inp;
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (_, pc) = dims(p);
                    let gp = grad_buf(grads, p, rows * pc);
                    for r in 0..rows {
                        add_into(
                            &mut gp[r * pc..(r + 1) * pc],
                            &g[r * cols + offset..r * cols + offset + pc],
                            1.0,
                        );
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.nodes[p.0].value.len();
                    add_into(grad_buf(grads, p, n), &g[offset..offset + n], 1.0);
                    offset += n;
                }
            }
            Op::SliceCols(a, start) => {
                let (ar, ac) = dims(*a);
                let ga = grad_buf(grads, *a, ar * ac);
                for r in 0..rows {
                    add_into(
                        &mut ga[r * ac + start..r * ac + start + cols],
                        &g[r * cols..(r + 1) * cols],
                        1.0,
                    );
                }
            }
            Op::GatherRows(a, indices) => {
                let (ar, ac) = dims(*a);
                let ga = grad_buf(grads, *a, ar * ac);
                for (r, &i) in indices.iter().enumerate() {
                    add_into(&mut ga[i * ac..(i + 1) * ac], &g[r * cols..(r + 1) * cols], 1.0);
                }
            }
            Op::SparseMul(s, a) => {
                let (ar, ac) = dims(*a);
                let ga = grad_buf(grads, *a, ar * ac);
                for (i, row) in s.rows.iter().enumerate() {
                    for &(j, w) in row {
                        add_into(&mut ga[j * ac..(j + 1) * ac], &g[i * cols..(i + 1) * cols], w);
                    }
                }
            }
            Op::Transpose(a) => {
                let (ar, ac) = dims(*a);
                let ga = grad_buf(grads, *a, ar * ac);
                for i in 0..ar {
                    for j in 0..ac {
                        ga[i * ac + j] += g[j * ar + i];
                    }
                }
            }
            Op::SoftmaxRows(a) => {
                let ga = grad_buf(grads, *a, g.len());
                for r in 0..rows {
                    let rg = r * cols..(r + 1) * cols;
                    softmax_backward(&node.value[rg.clone()], &g[rg.clone()], &mut ga[rg]);
                }
            }
            Op::SegmentSoftmax(a, segs) => {
                let ga = grad_buf(grads, *a, g.len());
                for s in 0..segs.count() {
                    let rg = segs.range(s);
                    softmax_backward(&node.value[rg.clone()], &g[rg.clone()], &mut ga[rg]);
                }
            }
            Op::SegmentWeightedSum(w, v, segs) => {
                let wv = val(*w);
                let vv = val(*v);
                let (vr, c) = dims(*v);
                {
                    let gw = grad_buf(grads, *w, vr);
                    for s in 0..segs.count() {
                        let gs = &g[s * c..(s + 1) * c];
                        for e in segs.range(s) {
                            gw[e] += gs.iter().zip(&vv[e * c..(e + 1) * c]).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                let gv = grad_buf(grads, *v, vr * c);
                for s in 0..segs.count() {
                    for e in segs.range(s) {
                        add_into(&mut gv[e * c..(e + 1) * c], &g[s * c..(s + 1) * c], wv[e]);
                    }
                }
            }
            Op::MeanRows(a) => {
                let (ar, ac) = dims(*a);
                let ga = grad_buf(grads, *a, ar * ac);
                for r in 0..ar {
                    add_into(&mut ga[r * ac..(r + 1) * ac], g, 1.0 / ar as f64);
                }
            }
            Op::Sum(a) => {
                let n = self.nodes[a.0].value.len();
                grad_buf(grads, *a, n).iter_mut().for_each(|o| *o += g[0]);
            }
            Op::Pick(a, idx) => {
                let n = self.nodes[a.0].value.len();
                grad_buf(grads, *a, n)[*idx] += g[0];
            }
            Op::MaskMul(a, mask) => {
                let ga = grad_buf(grads, *a, g.len());
                for ((o, x), m) in ga.iter_mut().zip(g).zip(mask.iter()) {
                    *o += x * m;
                }
            }
            Op::PadCols(a, extra) => {
                let (ar, ac) = dims(*a);
                let ga = grad_buf(grads, *a, ar * ac);
                let wide = ac + extra;
                for r in 0..ar {
                    add_into(&mut ga[r * ac..(r + 1) * ac], &g[r * wide..r * wide + ac], 1.0);
                }
            }
        }
    }
}

fn grad_buf(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(dst: &mut [f64], src: &[f64], k: f64) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += k * s;
    }
}

fn softmax_into(x: &[f64], out: &mut [f64]) {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

fn softmax_backward(y: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, &yy), &gg) in out.iter_mut().zip(y).zip(g) {
        *o += yy * (gg - dot);
    }
}
