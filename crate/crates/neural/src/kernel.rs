//! Small numeric kernel: activations, softmax and the LSTM cell with its
//! hand-derived backward pass.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub fn softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut e = x.mapv(|v| (v - max).exp());
    let sum = e.sum();
    e /= sum;
    e
}

pub fn log_softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let max = x.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.mapv(|v| v - lse)
}

/// Outer product `a ⊗ b` added into `m`.
pub fn add_outer(m: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        m.row_mut(i).scaled_add(ai, &b);
    }
}

pub fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..scale))
}

/// One LSTM layer. Gate blocks are stacked in the order input, forget,
/// cell candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `4H × input`
    pub wx: Array2<f64>,
    /// `4H × H`
    pub wh: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn init(rng: &mut impl Rng, input: usize, hidden: usize, scale: f64) -> LstmParams {
        let wx = uniform(rng, 4 * hidden, input, scale);
        let wh = uniform(rng, 4 * hidden, hidden, scale);
        let mut b = Array1::from_shape_simple_fn(4 * hidden, || rng.gen_range(-scale..scale));
        b.slice_mut(s![hidden..2 * hidden]).mapv_inplace(|v| v + 1.0);
        LstmParams { wx, wh, b }
    }

    pub fn hidden(&self) -> usize {
        self.wh.ncols()
    }

    pub fn zeros_like(&self) -> LstmParams {
        LstmParams {
            wx: Array2::zeros(self.wx.raw_dim()),
            wh: Array2::zeros(self.wh.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }
}

/// Activated gates `[i; f; g; o]` and new state for one step.
pub struct CellOut {
    pub gates: Array1<f64>,
    pub c: Array1<f64>,
    pub tanh_c: Array1<f64>,
    pub h: Array1<f64>,
}

/// Applies the cell to a pre-activation `z = Wx x + Wh h + b`.
pub fn cell_forward(mut z: Array1<f64>, c_prev: ArrayView1<f64>) -> CellOut {
    let h = c_prev.len();
    for (k, v) in z.iter_mut().enumerate() {
        *v = if (2 * h..3 * h).contains(&k) { v.tanh() } else { sigmoid(*v) };
    }
    let (i, f, g, o) = (
        z.slice(s![..h]),
        z.slice(s![h..2 * h]),
        z.slice(s![2 * h..3 * h]),
        z.slice(s![3 * h..]),
    );
    let c = &f * &c_prev + &i * &g;
    let tanh_c = c.mapv(f64::tanh);
    let hn = &o * &tanh_c;
    CellOut {
        gates: z,
        c,
        tanh_c,
        h: hn,
    }
}

/// Backward through one cell step. Returns the pre-activation gradient and
/// the gradient reaching the previous cell state.
pub fn cell_backward(
    gates: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
    tanh_c: ArrayView1<f64>,
    dh: ArrayView1<f64>,
    dc_next: ArrayView1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let h = c_prev.len();
    let mut dz = Array1::zeros(4 * h);
    let mut dc_prev = Array1::zeros(h);
    for k in 0..h {
        let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
        let tc = tanh_c[k];
        let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
        dz[k] = dc * g * i * (1.0 - i);
        dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
        dz[2 * h + k] = dc * i * (1.0 - g * g);
        dz[3 * h + k] = dh[k] * tc * o * (1.0 - o);
        dc_prev[k] = dc * f;
    }
    (dz, dc_prev)
}

/// Cached forward pass of an LSTM over a whole sequence, starting from
/// zero state.
pub struct SeqCache {
    /// `n × input`
    pub x: Array2<f64>,
    /// `(n+1) × H`; row 0 is the initial state.
    pub hs: Array2<f64>,
    pub cs: Array2<f64>,
    /// `n × 4H`
    pub gates: Array2<f64>,
    pub tanh_c: Array2<f64>,
}

impl SeqCache {
    pub fn outputs(&self) -> ndarray::ArrayView2<'_, f64> {
        self.hs.slice(s![1.., ..])
    }
}

pub fn lstm_forward(p: &LstmParams, x: Array2<f64>) -> SeqCache {
    let n = x.nrows();
    let hd = p.hidden();
    // input projections for all steps in one product
    let pre = x.dot(&p.wx.t()) + &p.b;
    let mut hs = Array2::zeros((n + 1, hd));
    let mut cs = Array2::zeros((n + 1, hd));
    let mut gates = Array2::zeros((n, 4 * hd));
    let mut tanh_c = Array2::zeros((n, hd));
    for t in 0..n {
        let z = &pre.row(t) + &p.wh.dot(&hs.row(t));
        let out = cell_forward(z, cs.row(t));
        gates.row_mut(t).assign(&out.gates);
        tanh_c.row_mut(t).assign(&out.tanh_c);
        cs.row_mut(t + 1).assign(&out.c);
        hs.row_mut(t + 1).assign(&out.h);
    }
    SeqCache {
        x,
        hs,
        cs,
        gates,
        tanh_c,
    }
}

/// Backward over a sequence given the loss gradient on every output.
/// Accumulates into `grads` and returns the input gradient.
pub fn lstm_backward(p: &LstmParams, cache: &SeqCache, dh_out: &Array2<f64>, grads: &mut LstmParams) -> Array2<f64> {
    let n = cache.x.nrows();
    let hd = p.hidden();
    let mut dzs = Array2::zeros((n, 4 * hd));
    let wh_t = p.wh.t().to_owned();
    let mut dh_next = Array1::zeros(hd);
    let mut dc_next = Array1::zeros(hd);
    for t in (0..n).rev() {
        let dh = &dh_out.row(t) + &dh_next;
        let (dz, dc_prev) = cell_backward(
            cache.gates.row(t),
            cache.cs.row(t),
            cache.tanh_c.row(t),
            dh.view(),
            dc_next.view(),
        );
        dh_next = wh_t.dot(&dz);
        dc_next = dc_prev;
        dzs.row_mut(t).assign(&dz);
    }
    grads.wx += &dzs.t().dot(&cache.x);
    grads.wh += &dzs.t().dot(&cache.hs.slice(s![..n, ..]));
    grads.b += &dzs.sum_axis(Axis(0));
    dzs.dot(&p.wx)
}
