//! Single-direction LSTM over a sequence with an explicit backward pass.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::params::{Float, LstmWeights};

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Activations kept for the backward pass.
pub struct LstmCache<F> {
    input: Array2<F>,
    /// Post-activation gates per step, `[i | f | g | o]`.
    gates: Array2<F>,
    cells: Array2<F>,
    tanh_cells: Array2<F>,
    hidden: Array2<F>,
}

/// Run the cell over the rows of `x` in order (or reversed). Returns the
/// hidden states aligned with the rows of `x`.
pub fn forward<F: Float>(w: &LstmWeights<F>, x: ArrayView2<'_, F>, reverse: bool) -> (Array2<F>, LstmCache<F>) {
    let input = if reverse {
        x.slice(s![..;-1, ..]).to_owned()
    } else {
        x.to_owned()
    };
    let steps = input.nrows();
    let h = w.w_hh.ncols();
    let pre = input.dot(&w.w_ih.t()) + &w.bias;

    let mut gates = Array2::zeros((steps, 4 * h));
    let mut cells = Array2::zeros((steps, h));
    let mut tanh_cells = Array2::zeros((steps, h));
    let mut hidden = Array2::zeros((steps, h));
    let mut h_prev = Array1::<F>::zeros(h);
    let mut c_prev = Array1::<F>::zeros(h);

    for t in 0..steps {
        let z = &pre.row(t) + &w.w_hh.dot(&h_prev);
        let mut g = gates.row_mut(t);
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let c_hat = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            let c = f * c_prev[k] + i * c_hat;
            let tc = c.tanh();
            g[k] = i;
            g[h + k] = f;
            g[2 * h + k] = c_hat;
            g[3 * h + k] = o;
            cells[[t, k]] = c;
            tanh_cells[[t, k]] = tc;
            hidden[[t, k]] = o * tc;
        }
        h_prev.assign(&hidden.row(t));
        c_prev.assign(&cells.row(t));
    }

    let out = if reverse {
        hidden.slice(s![..;-1, ..]).to_owned()
    } else {
        hidden.clone()
    };
    (
        out,
        LstmCache {
            input,
            gates,
            cells,
            tanh_cells,
            hidden,
        },
    )
}

/// Accumulate weight gradients into `grads` and return the gradient with
/// respect to the input rows (aligned with the original `x`).
pub fn backward<F: Float>(
    w: &LstmWeights<F>,
    cache: &LstmCache<F>,
    d_out: ArrayView2<'_, F>,
    reverse: bool,
    grads: &mut LstmWeights<F>,
) -> Array2<F> {
    let d_out = if reverse {
        d_out.slice(s![..;-1, ..]).to_owned()
    } else {
        d_out.to_owned()
    };
    let steps = d_out.nrows();
    let h = w.w_hh.ncols();
    let one = F::one();

    let mut d_gates = Array2::<F>::zeros((steps, 4 * h));
    let mut dh_next = Array1::<F>::zeros(h);
    let mut dc_next = Array1::<F>::zeros(h);

    for t in (0..steps).rev() {
        let g = cache.gates.row(t);
        let mut dg = d_gates.row_mut(t);
        let mut dc_prev = Array1::<F>::zeros(h);
        for k in 0..h {
            let (i, f, c_hat, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = cache.tanh_cells[[t, k]];
            let c_prev = if t > 0 { cache.cells[[t - 1, k]] } else { F::zero() };
            let dh = d_out[[t, k]] + dh_next[k];
            let dc = dh * o * (one - tc * tc) + dc_next[k];
            dg[k] = dc * c_hat * i * (one - i);
            dg[h + k] = dc * c_prev * f * (one - f);
            dg[2 * h + k] = dc * i * (one - c_hat * c_hat);
            dg[3 * h + k] = dh * tc * o * (one - o);
            dc_prev[k] = dc * f;
        }
        dh_next = w.w_hh.t().dot(&d_gates.row(t));
        dc_next = dc_prev;
    }

    let mut h_prev = Array2::<F>::zeros((steps, h));
    if steps > 1 {
        h_prev
            .slice_mut(s![1.., ..])
            .assign(&cache.hidden.slice(s![..steps - 1, ..]));
    }
    grads.w_ih += &d_gates.t().dot(&cache.input);
    grads.w_hh += &d_gates.t().dot(&h_prev);
    grads.bias += &d_gates.sum_axis(Axis(0));

    let dx = d_gates.dot(&w.w_ih);
    if reverse {
        dx.slice(s![..;-1, ..]).to_owned()
    } else {
        dx
    }
}
