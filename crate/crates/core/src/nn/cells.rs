use rand::Rng;

use super::tape::{Tape, Var};
use super::{bias, matrix, NnError, ParamId, ParamStore};

fn check_cols(tape: &Tape, v: Var, cols: usize) -> Result<(), NnError> {
    let (r, c) = tape.dims(v);
    if c != cols {
        return Err(NnError::ShapeMismatch {
            expected: vec![r, cols],
            got: vec![r, c],
        });
    }
    Ok(())
}

fn check_rows(tape: &Tape, a: Var, b: Var) -> Result<(), NnError> {
    let (ra, ca) = tape.dims(a);
    let (rb, cb) = tape.dims(b);
    if ra != rb {
        return Err(NnError::ShapeMismatch {
            expected: vec![ra, cb],
            got: vec![rb, cb.max(ca)],
        });
    }
    Ok(())
}

/// One gate: `x W + h U + b`.
#[derive(Debug, Clone, Copy)]
struct Gate {
    w: ParamId,
    u: ParamId,
    b: ParamId,
}

impl Gate {
    fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_h: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(Gate {
            w: matrix(store, &format!("{prefix}.w"), d_in, d_h, rng)?,
            u: matrix(store, &format!("{prefix}.u"), d_h, d_h, rng)?,
            b: bias(store, &format!("{prefix}.b"), d_h)?,
        })
    }

    fn pre(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Var {
        let w = tape.param(store, self.w);
        let u = tape.param(store, self.u);
        let b = tape.param(store, self.b);
        let xw = tape.matmul(x, w);
        let hu = tape.matmul(h, u);
        let s = tape.add(xw, hu);
        tape.add(s, b)
    }
}

/// Gated recurrent unit. Rows of `x`/`h` are independent instances.
///
/// `z = σ(x W_z + h U_z + b_z)`, `r = σ(x W_r + h U_r + b_r)`,
/// `n = tanh(x W_n + (r ⊙ h) U_n + b_n)`, `h' = z ⊙ h + (1 − z) ⊙ n`.
#[derive(Debug, Clone)]
pub struct GruCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    update: Gate,
    reset: Gate,
    candidate: Gate,
}

impl GruCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(GruCell {
            input_dim,
            hidden_dim,
            update: Gate::new(store, &format!("{prefix}.update"), input_dim, hidden_dim, rng)?,
            reset: Gate::new(store, &format!("{prefix}.reset"), input_dim, hidden_dim, rng)?,
            candidate: Gate::new(store, &format!("{prefix}.candidate"), input_dim, hidden_dim, rng)?,
        })
    }

    pub fn update_bias(&self) -> ParamId {
        self.update.b
    }

    pub fn step(&self, tape: &mut Tape, store: &ParamStore, x: Var, h: Var) -> Result<Var, NnError> {
        check_cols(tape, x, self.input_dim)?;
        check_cols(tape, h, self.hidden_dim)?;
        check_rows(tape, x, h)?;
        let z = self.update.pre(tape, store, x, h);
        let z = tape.sigmoid(z);
        let r = self.reset.pre(tape, store, x, h);
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h);
        let n = self.candidate.pre(tape, store, x, rh);
        let n = tape.tanh(n);
        let keep = tape.mul(z, h);
        let one_minus_z = tape.one_minus(z);
        let fresh = tape.mul(one_minus_z, n);
        Ok(tape.add(keep, fresh))
    }
}

/// Long short-term memory cell with input, forget and output gates.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    input: Gate,
    forget: Gate,
    output: Gate,
    cell: Gate,
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Ok(LstmCell {
            input_dim,
            hidden_dim,
            input: Gate::new(store, &format!("{prefix}.input"), input_dim, hidden_dim, rng)?,
            forget: Gate::new(store, &format!("{prefix}.forget"), input_dim, hidden_dim, rng)?,
            output: Gate::new(store, &format!("{prefix}.output"), input_dim, hidden_dim, rng)?,
            cell: Gate::new(store, &format!("{prefix}.cell"), input_dim, hidden_dim, rng)?,
        })
    }

    pub fn input_bias(&self) -> ParamId {
        self.input.b
    }

    pub fn forget_bias(&self) -> ParamId {
        self.forget.b
    }

    /// Returns `(h', c')`.
    pub fn step(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        h: Var,
        c: Var,
    ) -> Result<(Var, Var), NnError> {
        check_cols(tape, x, self.input_dim)?;
        check_cols(tape, h, self.hidden_dim)?;
        check_cols(tape, c, self.hidden_dim)?;
        check_rows(tape, x, h)?;
        check_rows(tape, h, c)?;
        let i = self.input.pre(tape, store, x, h);
        let i = tape.sigmoid(i);
        let f = self.forget.pre(tape, store, x, h);
        let f = tape.sigmoid(f);
        let o = self.output.pre(tape, store, x, h);
        let o = tape.sigmoid(o);
        let g = self.cell.pre(tape, store, x, h);
        let g = tape.tanh(g);
        let kept = tape.mul(f, c);
        let written = tape.mul(i, g);
        let c_next = tape.add(kept, written);
        let squashed = tape.tanh(c_next);
        let h_next = tape.mul(o, squashed);
        Ok((h_next, c_next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    fn set(store: &mut ParamStore, name: &str, values: &[f64]) {
        let id = store.id(name).unwrap();
        store.get_mut(id).tensor.values = values.to_vec();
    }

    #[test]
    fn gru_update_gate_saturated_carries_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "gru", 3, 4, &mut rng).unwrap();
        set(&mut store, "gru.update.b", &[50.0; 4]);
        let mut t = Tape::new();
        let x = t.constant(1, 3, vec![0.3, -0.2, 0.9]);
        let h = t.constant(1, 4, vec![0.5, -0.5, 0.25, 0.0]);
        let out = gru.step(&mut t, &store, x, h).unwrap();
        for (a, b) in t.value(out).iter().zip([0.5, -0.5, 0.25, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gru_zero_weights_halve_state() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gru = GruCell::new(&mut store, "gru", 1, 1, &mut rng).unwrap();
        for p in store.iter_mut() {
            p.tensor.values = vec![0.0];
        }
        let mut t = Tape::new();
        let x = t.constant(1, 1, vec![0.7]);
        let h = t.constant(1, 1, vec![0.8]);
        let out = gru.step(&mut t, &store, x, h).unwrap();
        // z = 0.5, n = tanh(0) = 0
        assert!((t.scalar(out) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn gru_scalar_hand_oracle() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gru = GruCell::new(&mut store, "gru", 1, 1, &mut rng).unwrap();
        let (wz, uz, bz) = (0.5, -0.3, 0.1);
        let (wr, ur, br) = (-0.7, 0.2, 0.05);
        let (wn, un, bn) = (1.1, 0.9, -0.2);
        for (name, v) in [
            ("gru.update.w", wz),
            ("gru.update.u", uz),
            ("gru.update.b", bz),
            ("gru.reset.w", wr),
            ("gru.reset.u", ur),
            ("gru.reset.b", br),
            ("gru.candidate.w", wn),
            ("gru.candidate.u", un),
            ("gru.candidate.b", bn),
        ] {
            set(&mut store, name, &[v]);
        }
        let (x, h) = (0.4, -0.6);
        let z = sig(wz * x + uz * h + bz);
        let r = sig(wr * x + ur * h + br);
        let n = (wn * x + un * (r * h) + bn).tanh();
        let expected = z * h + (1.0 - z) * n;
        let mut t = Tape::new();
        let xv = t.constant(1, 1, vec![x]);
        let hv = t.constant(1, 1, vec![h]);
        let out = gru.step(&mut t, &store, xv, hv).unwrap();
        assert!((t.scalar(out) - expected).abs() < 1e-15);
    }

    #[test]
    fn gru_shape_mismatch() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gru = GruCell::new(&mut store, "gru", 2, 3, &mut rng).unwrap();
        let mut t = Tape::new();
        let x = t.constant(1, 3, vec![0.0; 3]);
        let h = t.constant(1, 3, vec![0.0; 3]);
        assert!(matches!(
            gru.step(&mut t, &store, x, h),
            Err(NnError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn gru_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let gru = GruCell::new(&mut store, "gru", 4, 4, &mut rng).unwrap();
        let xs = store.add("x", crate::nn::Tensor::glorot(2, 4, &mut rng)).unwrap();
        let hs = store.add("h", crate::nn::Tensor::glorot(2, 4, &mut rng)).unwrap();
        let err = grad_check(
            |t, s| {
                let x = t.param(s, xs);
                let h = t.param(s, hs);
                let out = gru.step(t, s, x, h).unwrap();
                let sq = t.mul(out, out);
                t.sum(sq)
            },
            &mut store,
            1e-5,
        );
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn lstm_conserves_cell_when_gated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let lstm = LstmCell::new(&mut store, "lstm", 2, 3, &mut rng).unwrap();
        set(&mut store, "lstm.forget.b", &[50.0; 3]);
        set(&mut store, "lstm.input.b", &[-50.0; 3]);
        let mut t = Tape::new();
        let x = t.constant(1, 2, vec![0.5, -1.0]);
        let h = t.constant(1, 3, vec![0.1, 0.2, 0.3]);
        let c = t.constant(1, 3, vec![1.5, -0.5, 0.25]);
        let (_, c2) = lstm.step(&mut t, &store, x, h, c).unwrap();
        for (a, b) in t.value(c2).iter().zip([1.5, -0.5, 0.25]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lstm_scalar_hand_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let lstm = LstmCell::new(&mut store, "lstm", 1, 1, &mut rng).unwrap();
        let vals = [
            ("input", (0.3, -0.4, 0.1)),
            ("forget", (0.8, 0.2, 0.5)),
            ("output", (-0.6, 0.7, 0.0)),
            ("cell", (1.2, -0.9, 0.3)),
        ];
        for (gate, (w, u, b)) in vals {
            set(&mut store, &format!("lstm.{gate}.w"), &[w]);
            set(&mut store, &format!("lstm.{gate}.u"), &[u]);
            set(&mut store, &format!("lstm.{gate}.b"), &[b]);
        }
        let (x, h, c) = (0.9, -0.3, 0.6);
        let pre = |(w, u, b): (f64, f64, f64)| w * x + u * h + b;
        let i = sig(pre(vals[0].1));
        let f = sig(pre(vals[1].1));
        let o = sig(pre(vals[2].1));
        let g = pre(vals[3].1).tanh();
        let c_next = f * c + i * g;
        let h_next = o * c_next.tanh();
        let mut t = Tape::new();
        let xv = t.constant(1, 1, vec![x]);
        let hv = t.constant(1, 1, vec![h]);
        let cv = t.constant(1, 1, vec![c]);
        let (h2, c2) = lstm.step(&mut t, &store, xv, hv, cv).unwrap();
        assert!((t.scalar(h2) - h_next).abs() < 1e-15);
        assert!((t.scalar(c2) - c_next).abs() < 1e-15);
    }

    #[test]
    fn lstm_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut store = ParamStore::new();
        let lstm = LstmCell::new(&mut store, "lstm", 4, 4, &mut rng).unwrap();
        let xs = store.add("x", crate::nn::Tensor::glorot(1, 4, &mut rng)).unwrap();
        let hs = store.add("h", crate::nn::Tensor::glorot(1, 4, &mut rng)).unwrap();
        let cs = store.add("c", crate::nn::Tensor::glorot(1, 4, &mut rng)).unwrap();
        let err = grad_check(
            |t, s| {
                let x = t.param(s, xs);
                let h = t.param(s, hs);
                let c = t.param(s, cs);
                let (h2, c2) = lstm.step(t, s, x, h, c).unwrap();
                let both = t.concat_cols(&[h2, c2]);
                let sq = t.mul(both, both);
                t.sum(sq)
            },
            &mut store,
            1e-5,
        );
        assert!(err < 1e-4, "max relative error {err}");
    }
}
