//! LSTM cell and bidirectional composition.
//!
//! Gate layout follows the single-bias formulation: each gate computes
//! `act(W h_prev + U x + b)` with sigmoid gates and a tanh candidate,
//! then `c = f*c_prev + i*g` and `h = o*tanh(c)`.

use super::math::{matvec_acc, matvec_t_acc, outer_acc, sigmoid};
use super::param::ParamTensor;
use super::rng::RngStream;
use super::NnError;
use crate::Real;

/// Parameters of one directional LSTM: per-gate recurrent matrix `W` (HxH),
/// input matrix `U` (HxD) and bias `b` (H).
#[derive(Debug, Clone)]
pub struct LSTMParams {
    pub w_i: ParamTensor,
    pub w_f: ParamTensor,
    pub w_o: ParamTensor,
    pub w_c: ParamTensor,
    pub u_i: ParamTensor,
    pub u_f: ParamTensor,
    pub u_o: ParamTensor,
    pub u_c: ParamTensor,
    pub b_i: ParamTensor,
    pub b_f: ParamTensor,
    pub b_o: ParamTensor,
    pub b_c: ParamTensor,
    pub hidden: usize,
    pub input: usize,
}

/// Cached forward activations of one LSTM run, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    xs: Vec<Vec<Real>>,
    pub i: Vec<Vec<Real>>,
    pub f: Vec<Vec<Real>>,
    pub o: Vec<Vec<Real>>,
    pub g: Vec<Vec<Real>>,
    pub c: Vec<Vec<Real>>,
    pub tanh_c: Vec<Vec<Real>>,
    pub h: Vec<Vec<Real>>,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

impl LSTMParams {
    pub fn init(hidden: usize, input: usize, rng: &mut RngStream) -> Self {
        LSTMParams {
            w_i: ParamTensor::weight(hidden, hidden, rng),
            w_f: ParamTensor::weight(hidden, hidden, rng),
            w_o: ParamTensor::weight(hidden, hidden, rng),
            w_c: ParamTensor::weight(hidden, hidden, rng),
            u_i: ParamTensor::weight(hidden, input, rng),
            u_f: ParamTensor::weight(hidden, input, rng),
            u_o: ParamTensor::weight(hidden, input, rng),
            u_c: ParamTensor::weight(hidden, input, rng),
            b_i: ParamTensor::bias(hidden),
            b_f: ParamTensor::forget_bias(hidden),
            b_o: ParamTensor::bias(hidden),
            b_c: ParamTensor::bias(hidden),
            hidden,
            input,
        }
    }

    /// One cell update. Returns `(h_t, c_t)`.
    pub fn step(
        &self,
        x: &[Real],
        h_prev: &[Real],
        c_prev: &[Real],
    ) -> Result<(Vec<Real>, Vec<Real>), NnError> {
        let (i, f, o, g) = self.gates(x, h_prev)?;
        if c_prev.len() != self.hidden {
            return Err(NnError::Shape {
                expected: self.hidden,
                found: c_prev.len(),
                context: "lstm_step cell state",
            });
        }
        let mut c = vec![0.0; self.hidden];
        let mut h = vec![0.0; self.hidden];
        for k in 0..self.hidden {
            c[k] = f[k] * c_prev[k] + i[k] * g[k];
            h[k] = o[k] * c[k].tanh();
        }
        Ok((h, c))
    }

    fn gates(
        &self,
        x: &[Real],
        h_prev: &[Real],
    ) -> Result<(Vec<Real>, Vec<Real>, Vec<Real>, Vec<Real>), NnError> {
        if x.len() != self.input {
            return Err(NnError::Shape {
                expected: self.input,
                found: x.len(),
                context: "lstm_step input",
            });
        }
        if h_prev.len() != self.hidden {
            return Err(NnError::Shape {
                expected: self.hidden,
                found: h_prev.len(),
                context: "lstm_step hidden state",
            });
        }
        let h = self.hidden;
        let pre = |w: &ParamTensor, u: &ParamTensor, b: &ParamTensor| {
            let mut a = b.values.clone();
            matvec_acc(&w.values, h, h, h_prev, &mut a);
            matvec_acc(&u.values, h, self.input, x, &mut a);
            a
        };
        let mut i = pre(&self.w_i, &self.u_i, &self.b_i);
        let mut f = pre(&self.w_f, &self.u_f, &self.b_f);
        let mut o = pre(&self.w_o, &self.u_o, &self.b_o);
        let mut g = pre(&self.w_c, &self.u_c, &self.b_c);
        for v in i.iter_mut().chain(f.iter_mut()).chain(o.iter_mut()) {
            *v = sigmoid(*v);
        }
        for v in g.iter_mut() {
            *v = v.tanh();
        }
        Ok((i, f, o, g))
    }

    /// Runs the cell across a sequence from zero initial state, caching every
    /// activation needed by [`LSTMParams::backward`].
    pub fn forward_trace(&self, xs: &[Vec<Real>]) -> Result<LstmTrace, NnError> {
        if xs.is_empty() {
            return Err(NnError::EmptySequence);
        }
        let n = xs.len();
        let mut trace = LstmTrace {
            xs: xs.to_vec(),
            i: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
            o: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            tanh_c: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
        };
        let zeros = vec![0.0; self.hidden];
        for (t, x) in xs.iter().enumerate() {
            let h_prev = if t == 0 { &zeros } else { &trace.h[t - 1] };
            let c_prev = if t == 0 { &zeros } else { &trace.c[t - 1] };
            let (i, f, o, g) = self.gates(x, h_prev)?;
            let mut c = vec![0.0; self.hidden];
            let mut tc = vec![0.0; self.hidden];
            let mut h = vec![0.0; self.hidden];
            for k in 0..self.hidden {
                c[k] = f[k] * c_prev[k] + i[k] * g[k];
                tc[k] = c[k].tanh();
                h[k] = o[k] * tc[k];
            }
            trace.i.push(i);
            trace.f.push(f);
            trace.o.push(o);
            trace.g.push(g);
            trace.c.push(c);
            trace.tanh_c.push(tc);
            trace.h.push(h);
        }
        Ok(trace)
    }

    /// Backpropagates through a cached run. `dhs[t]` is the loss gradient on
    /// the step-`t` output; gradients accumulate into the parameter buffers
    /// and the per-step input gradients are returned.
    pub fn backward(&mut self, trace: &LstmTrace, dhs: &[Vec<Real>]) -> Vec<Vec<Real>> {
        let n = trace.len();
        assert_eq!(dhs.len(), n, "one output gradient per step");
        let hd = self.hidden;
        let zeros = vec![0.0; hd];
        let mut dxs = vec![vec![0.0; self.input]; n];
        let mut dh_carry = vec![0.0; hd];
        let mut dc_carry = vec![0.0; hd];
        for t in (0..n).rev() {
            let h_prev = if t == 0 { &zeros } else { &trace.h[t - 1] };
            let c_prev = if t == 0 { &zeros } else { &trace.c[t - 1] };
            let (i, f, o, g) = (&trace.i[t], &trace.f[t], &trace.o[t], &trace.g[t]);
            let tc = &trace.tanh_c[t];

            let mut da_i = vec![0.0; hd];
            let mut da_f = vec![0.0; hd];
            let mut da_o = vec![0.0; hd];
            let mut da_g = vec![0.0; hd];
            let mut dc_prev = vec![0.0; hd];
            for k in 0..hd {
                let dh = dhs[t][k] + dh_carry[k];
                let dc = dc_carry[k] + dh * o[k] * (1.0 - tc[k] * tc[k]);
                let do_ = dh * tc[k];
                let df = dc * c_prev[k];
                let di = dc * g[k];
                let dg = dc * i[k];
                da_i[k] = di * i[k] * (1.0 - i[k]);
                da_f[k] = df * f[k] * (1.0 - f[k]);
                da_o[k] = do_ * o[k] * (1.0 - o[k]);
                da_g[k] = dg * (1.0 - g[k] * g[k]);
                dc_prev[k] = dc * f[k];
            }

            dh_carry.fill(0.0);
            let x = &trace.xs[t];
            let dx = &mut dxs[t];
            for (w, u, b, da) in [
                (&mut self.w_i, &mut self.u_i, &mut self.b_i, &da_i),
                (&mut self.w_f, &mut self.u_f, &mut self.b_f, &da_f),
                (&mut self.w_o, &mut self.u_o, &mut self.b_o, &da_o),
                (&mut self.w_c, &mut self.u_c, &mut self.b_c, &da_g),
            ] {
                outer_acc(&mut w.grad, hd, hd, da, h_prev);
                outer_acc(&mut u.grad, hd, self.input, da, x);
                for (bg, d) in b.grad.iter_mut().zip(da) {
                    *bg += d;
                }
                matvec_t_acc(&w.values, hd, hd, da, &mut dh_carry);
                matvec_t_acc(&u.values, hd, self.input, da, dx);
            }
            dc_carry = dc_prev;
        }
        dxs
    }

    pub(crate) fn tensors(&self, prefix: &str) -> Vec<(String, &ParamTensor)> {
        vec![
            (format!("{prefix}.w_i"), &self.w_i),
            (format!("{prefix}.w_f"), &self.w_f),
            (format!("{prefix}.w_o"), &self.w_o),
            (format!("{prefix}.w_c"), &self.w_c),
            (format!("{prefix}.u_i"), &self.u_i),
            (format!("{prefix}.u_f"), &self.u_f),
            (format!("{prefix}.u_o"), &self.u_o),
            (format!("{prefix}.u_c"), &self.u_c),
            (format!("{prefix}.b_i"), &self.b_i),
            (format!("{prefix}.b_f"), &self.b_f),
            (format!("{prefix}.b_o"), &self.b_o),
            (format!("{prefix}.b_c"), &self.b_c),
        ]
    }

    pub(crate) fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut ParamTensor)> {
        vec![
            (format!("{prefix}.w_i"), &mut self.w_i),
            (format!("{prefix}.w_f"), &mut self.w_f),
            (format!("{prefix}.w_o"), &mut self.w_o),
            (format!("{prefix}.w_c"), &mut self.w_c),
            (format!("{prefix}.u_i"), &mut self.u_i),
            (format!("{prefix}.u_f"), &mut self.u_f),
            (format!("{prefix}.u_o"), &mut self.u_o),
            (format!("{prefix}.u_c"), &mut self.u_c),
            (format!("{prefix}.b_i"), &mut self.b_i),
            (format!("{prefix}.b_f"), &mut self.b_f),
            (format!("{prefix}.b_o"), &mut self.b_o),
            (format!("{prefix}.b_c"), &mut self.b_c),
        ]
    }
}

/// Two independent LSTMs, one per direction, sharing hidden and input sizes.
#[derive(Debug, Clone)]
pub struct BiLSTMParams {
    pub fw: LSTMParams,
    pub bw: LSTMParams,
}

/// Forward caches of both directions. The backward trace runs over the
/// reversed input, so its step `j` corresponds to original position `n-1-j`.
#[derive(Debug, Clone)]
pub struct BiLstmTrace {
    pub fw: LstmTrace,
    pub bw: LstmTrace,
}

impl BiLstmTrace {
    pub fn len(&self) -> usize {
        self.fw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fw.is_empty()
    }

    /// Output at original position `t`: `concat(h_fw[t], h_bw[n-1-t])`.
    pub fn output(&self, t: usize) -> Vec<Real> {
        let n = self.len();
        let mut out = self.fw.h[t].clone();
        out.extend_from_slice(&self.bw.h[n - 1 - t]);
        out
    }

    /// Concatenation of the final forward and final backward outputs.
    pub fn last_concat(&self) -> Vec<Real> {
        let mut out = self.fw.h[self.len() - 1].clone();
        out.extend_from_slice(&self.bw.h[self.len() - 1]);
        out
    }
}

impl BiLSTMParams {
    pub fn init(hidden: usize, input: usize, rng: &mut RngStream) -> Self {
        BiLSTMParams {
            fw: LSTMParams::init(hidden, input, rng),
            bw: LSTMParams::init(hidden, input, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.fw.hidden
    }

    pub fn input(&self) -> usize {
        self.fw.input
    }

    pub fn forward_trace(&self, xs: &[Vec<Real>]) -> Result<BiLstmTrace, NnError> {
        let fw = self.fw.forward_trace(xs)?;
        let reversed: Vec<Vec<Real>> = xs.iter().rev().cloned().collect();
        let bw = self.bw.forward_trace(&reversed)?;
        Ok(BiLstmTrace { fw, bw })
    }

    /// Per-position concatenated outputs, length `2 * hidden` each.
    pub fn run(&self, xs: &[Vec<Real>]) -> Result<Vec<Vec<Real>>, NnError> {
        let trace = self.forward_trace(xs)?;
        Ok((0..trace.len()).map(|t| trace.output(t)).collect())
    }

    /// Backward from per-position output gradients (`2 * hidden` each).
    pub fn backward(&mut self, trace: &BiLstmTrace, d_out: &[Vec<Real>]) -> Vec<Vec<Real>> {
        let n = trace.len();
        let h = self.hidden();
        let dhs_fw: Vec<Vec<Real>> = (0..n).map(|t| d_out[t][..h].to_vec()).collect();
        let dhs_bw: Vec<Vec<Real>> = (0..n).map(|j| d_out[n - 1 - j][h..].to_vec()).collect();
        let dxs_fw = self.fw.backward(&trace.fw, &dhs_fw);
        let dxs_bw = self.bw.backward(&trace.bw, &dhs_bw);
        let mut dxs = dxs_fw;
        for j in 0..n {
            let t = n - 1 - j;
            for (a, b) in dxs[t].iter_mut().zip(&dxs_bw[j]) {
                *a += b;
            }
        }
        dxs
    }

    /// Backward when only the concatenated last outputs fed the loss
    /// (the byte-embedding read-out).
    pub fn backward_last(&mut self, trace: &BiLstmTrace, d_last: &[Real]) -> Vec<Vec<Real>> {
        let n = trace.len();
        let h = self.hidden();
        let mut dhs_fw = vec![vec![0.0; h]; n];
        let mut dhs_bw = vec![vec![0.0; h]; n];
        dhs_fw[n - 1] = d_last[..h].to_vec();
        dhs_bw[n - 1] = d_last[h..].to_vec();
        let dxs_fw = self.fw.backward(&trace.fw, &dhs_fw);
        let dxs_bw = self.bw.backward(&trace.bw, &dhs_bw);
        let mut dxs = dxs_fw;
        for j in 0..n {
            let t = n - 1 - j;
            for (a, b) in dxs[t].iter_mut().zip(&dxs_bw[j]) {
                *a += b;
            }
        }
        dxs
    }

    pub(crate) fn tensors(&self, prefix: &str) -> Vec<(String, &ParamTensor)> {
        let mut v = self.fw.tensors(&format!("{prefix}.fw"));
        v.extend(self.bw.tensors(&format!("{prefix}.bw")));
        v
    }

    pub(crate) fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut ParamTensor)> {
        let mut v = self.fw.tensors_mut(&format!("{prefix}.fw"));
        v.extend(self.bw.tensors_mut(&format!("{prefix}.bw")));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::byte_embed;

    fn zeroed(hidden: usize, input: usize) -> LSTMParams {
        let mut rng = RngStream::from_seed(0);
        let mut p = LSTMParams::init(hidden, input, &mut rng);
        for (_, t) in p.tensors_mut("p") {
            t.values.fill(0.0);
        }
        p
    }

    #[test]
    fn zero_params_zero_cell_is_identity_zero() {
        let p = zeroed(4, 3);
        let (h, c) = p.step(&[1.0, -2.0, 0.5], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn zero_params_halve_previous_cell() {
        // With all parameters zero, every gate sits at 0.5 and the candidate
        // at 0, so c_t = 0.5 * c_prev and h_t = 0.5 * tanh(0.5 * c_prev).
        let p = zeroed(2, 2);
        let c_prev = [0.8, -1.2];
        let (h, c) = p.step(&[0.0, 0.0], &[0.0, 0.0], &c_prev).unwrap();
        for k in 0..2 {
            assert!((c[k] - 0.5 * c_prev[k]).abs() < 1e-15);
            assert!((h[k] - 0.5 * (0.5 * c_prev[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_bad_shapes() {
        let p = zeroed(2, 3);
        assert!(p.step(&[1.0], &[0.0; 2], &[0.0; 2]).is_err());
        assert!(p.step(&[1.0; 3], &[0.0; 1], &[0.0; 2]).is_err());
        assert!(p.step(&[1.0; 3], &[0.0; 2], &[0.0; 5]).is_err());
    }

    #[test]
    fn gates_stay_in_open_unit_interval() {
        let mut rng = RngStream::from_seed(11);
        let p = LSTMParams::init(3, 2, &mut rng);
        let xs: Vec<Vec<Real>> = (0..6)
            .map(|_| (0..2).map(|_| rng.range(-3.0, 3.0)).collect())
            .collect();
        let trace = p.forward_trace(&xs).unwrap();
        for t in 0..trace.len() {
            for k in 0..3 {
                for v in [trace.i[t][k], trace.f[t][k], trace.o[t][k]] {
                    assert!(v > 0.0 && v < 1.0);
                }
                assert!(trace.g[t][k].abs() < 1.0);
                assert!(trace.tanh_c[t][k].abs() < 1.0);
            }
        }
    }

    /// Central finite differences of a scalar readout of h_t against the
    /// analytic backward pass, on a small random instance.
    #[test]
    fn step_gradients_match_finite_differences() {
        let mut rng = RngStream::from_seed(42);
        let mut p = LSTMParams::init(3, 2, &mut rng);
        let xs = vec![
            vec![rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)],
            vec![rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)],
        ];
        let readout: Vec<Vec<Real>> = (0..2)
            .map(|_| (0..3).map(|_| rng.range(-1.0, 1.0)).collect())
            .collect();
        let loss = |p: &LSTMParams| -> Real {
            let trace = p.forward_trace(&xs).unwrap();
            let mut l = 0.0;
            for t in 0..trace.len() {
                for k in 0..3 {
                    l += readout[t][k] * trace.h[t][k];
                }
            }
            l
        };

        let trace = p.forward_trace(&xs).unwrap();
        p.backward(&trace, &readout);
        let analytic: Vec<(String, Vec<Real>)> = p
            .tensors("p")
            .into_iter()
            .map(|(n, t)| (n, t.grad.clone()))
            .collect();

        let h = 1e-5;
        for (name, grad) in analytic {
            let numel = grad.len();
            for idx in 0..numel {
                let pick = |p: &mut LSTMParams, delta: Real| {
                    for (n, t) in p.tensors_mut("p") {
                        if n == name {
                            t.values[idx] += delta;
                        }
                    }
                };
                pick(&mut p, h);
                let plus = loss(&p);
                pick(&mut p, -2.0 * h);
                let minus = loss(&p);
                pick(&mut p, h);
                let numeric = (plus - minus) / (2.0 * h);
                let rel = (grad[idx] - numeric).abs()
                    / grad[idx].abs().max(numeric.abs()).max(1e-6);
                assert!(
                    rel < 1e-6,
                    "{name}[{idx}]: analytic {} vs numeric {numeric}",
                    grad[idx]
                );
            }
        }
    }

    #[test]
    fn bilstm_output_shape() {
        let mut rng = RngStream::from_seed(5);
        let p = BiLSTMParams::init(4, 3, &mut rng);
        let xs: Vec<Vec<Real>> = (0..5)
            .map(|_| (0..3).map(|_| rng.range(-1.0, 1.0)).collect())
            .collect();
        let out = p.run(&xs).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|o| o.len() == 8));
        assert!(p.run(&[]).is_err());
    }

    #[test]
    fn bilstm_zero_params_zero_outputs() {
        let mut rng = RngStream::from_seed(5);
        let mut p = BiLSTMParams::init(2, 2, &mut rng);
        for (_, t) in p.tensors_mut("p") {
            t.values.fill(0.0);
        }
        let out = p.run(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        assert!(out.iter().all(|o| o.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn single_element_runs_one_step_each_direction() {
        let mut rng = RngStream::from_seed(6);
        let p = BiLSTMParams::init(3, 2, &mut rng);
        let x = vec![vec![0.3, -0.7]];
        let out = p.run(&x).unwrap();
        let (h_fw, _) = p.fw.step(&x[0], &[0.0; 3], &[0.0; 3]).unwrap();
        let (h_bw, _) = p.bw.step(&x[0], &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(&out[0][..3], h_fw.as_slice());
        assert_eq!(&out[0][3..], h_bw.as_slice());
    }

    /// Swapping the direction parameters and reversing the input reverses and
    /// swaps the outputs.
    #[test]
    fn reversal_symmetry() {
        let mut rng = RngStream::from_seed(8);
        let a = LSTMParams::init(3, 2, &mut rng);
        let b = LSTMParams::init(3, 2, &mut rng);
        let xs: Vec<Vec<Real>> = (0..4)
            .map(|_| (0..2).map(|_| rng.range(-1.0, 1.0)).collect())
            .collect();
        let reversed: Vec<Vec<Real>> = xs.iter().rev().cloned().collect();

        let ab = BiLSTMParams {
            fw: a.clone(),
            bw: b.clone(),
        };
        let ba = BiLSTMParams { fw: b, bw: a };
        let out1 = ab.run(&xs).unwrap();
        let out2 = ba.run(&reversed).unwrap();
        let n = xs.len();
        for t in 0..n {
            assert_eq!(&out1[t][..3], &out2[n - 1 - t][3..]);
            assert_eq!(&out1[t][3..], &out2[n - 1 - t][..3]);
        }
    }

    #[test]
    fn byte_embed_zero_params_gives_zero_vector() {
        let mut rng = RngStream::from_seed(5);
        let mut p = BiLSTMParams::init(64, 8, &mut rng);
        for (_, t) in p.tensors_mut("p") {
            t.values.fill(0.0);
        }
        let projections = vec![vec![0.5; 8]; 4];
        let be = byte_embed(&p, &projections).unwrap();
        assert_eq!(be.len(), 128);
        assert!(be.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn byte_embed_is_deterministic() {
        let mut rng = RngStream::from_seed(13);
        let p = BiLSTMParams::init(4, 3, &mut rng);
        let projections: Vec<Vec<Real>> = (0..5)
            .map(|_| (0..3).map(|_| rng.range(-1.0, 1.0)).collect())
            .collect();
        let a = byte_embed(&p, &projections).unwrap();
        let b = byte_embed(&p, &projections).unwrap();
        assert_eq!(a, b);
    }
}
