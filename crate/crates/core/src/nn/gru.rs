//! Gated recurrent unit with full backpropagation through time.
//!
//! Gate convention, per step with input x and previous hidden state h':
//!
//! ```text
//! z = sigmoid(Wz x + Uz h' + bz)          update gate
//! r = sigmoid(Wr x + Ur h' + br)          reset gate
//! n = tanh(Wn x + r .* (Un h') + bn)      candidate state
//! h = (1 - z) .* n + z .* h'
//! ```

use crate::error::{Error, Result};
use crate::nn::dense::sigmoid;
use crate::nn::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GruLayer {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Vec<f64>,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Vec<f64>,
    pub w_n: Matrix,
    pub u_n: Matrix,
    pub b_n: Vec<f64>,
    input_size: usize,
    hidden_size: usize,
}

struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    /// Un h_prev, needed for the reset-gate gradient.
    uh_n: Vec<f64>,
}

/// Per-sequence forward cache consumed by [`GruLayer::backward`].
pub struct GruCache {
    steps: Vec<StepCache>,
}

#[derive(Debug, Clone)]
pub struct GruGrads {
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Vec<f64>,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Vec<f64>,
    pub w_n: Matrix,
    pub u_n: Matrix,
    pub b_n: Vec<f64>,
}

impl GruGrads {
    pub fn zeros(layer: &GruLayer) -> Self {
        let h = layer.hidden_size;
        let i = layer.input_size;
        GruGrads {
            w_z: Matrix::zeros(h, i),
            u_z: Matrix::zeros(h, h),
            b_z: vec![0.0; h],
            w_r: Matrix::zeros(h, i),
            u_r: Matrix::zeros(h, h),
            b_r: vec![0.0; h],
            w_n: Matrix::zeros(h, i),
            u_n: Matrix::zeros(h, h),
            b_n: vec![0.0; h],
        }
    }

    pub fn scale(&mut self, s: f64) {
        for m in [
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.w_n,
            &mut self.u_n,
        ] {
            m.scale(s);
        }
        for b in [&mut self.b_z, &mut self.b_r, &mut self.b_n] {
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }
}

impl GruLayer {
    pub fn new(input_size: usize, hidden_size: usize, rng: &mut Rng) -> Self {
        GruLayer {
            w_z: Matrix::glorot(hidden_size, input_size, rng),
            u_z: Matrix::glorot(hidden_size, hidden_size, rng),
            b_z: vec![0.0; hidden_size],
            w_r: Matrix::glorot(hidden_size, input_size, rng),
            u_r: Matrix::glorot(hidden_size, hidden_size, rng),
            b_r: vec![0.0; hidden_size],
            w_n: Matrix::glorot(hidden_size, input_size, rng),
            u_n: Matrix::glorot(hidden_size, hidden_size, rng),
            b_n: vec![0.0; hidden_size],
            input_size,
            hidden_size,
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let mut rng = Rng::new(0);
        let mut layer = Self::new(input_size, hidden_size, &mut rng);
        for m in [
            &mut layer.w_z,
            &mut layer.u_z,
            &mut layer.w_r,
            &mut layer.u_r,
            &mut layer.w_n,
            &mut layer.u_n,
        ] {
            m.fill(0.0);
        }
        layer
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    /// Run the recurrence over `xs`, returning every hidden state h_1..h_T.
    pub fn forward(&self, xs: &[Vec<f64>], h0: &[f64]) -> Result<(Vec<Vec<f64>>, GruCache)> {
        if xs.is_empty() {
            return Err(Error::Empty(
                "GRU forward requires a non-empty sequence".into(),
            ));
        }
        if h0.len() != self.hidden_size {
            return Err(Error::Shape {
                context: "GruLayer::forward h0",
                expected: self.hidden_size,
                got: h0.len(),
            });
        }
        let mut h = h0.to_vec();
        let mut hidden = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            if x.len() != self.input_size {
                return Err(Error::Shape {
                    context: "GruLayer::forward input",
                    expected: self.input_size,
                    got: x.len(),
                });
            }
            let mut az = self.w_z.matvec(x)?;
            let uz = self.u_z.matvec(&h)?;
            let mut ar = self.w_r.matvec(x)?;
            let ur = self.u_r.matvec(&h)?;
            let mut an = self.w_n.matvec(x)?;
            let uh_n = self.u_n.matvec(&h)?;

            let mut z = vec![0.0; self.hidden_size];
            let mut r = vec![0.0; self.hidden_size];
            let mut n = vec![0.0; self.hidden_size];
            let mut h_new = vec![0.0; self.hidden_size];
            for k in 0..self.hidden_size {
                az[k] += uz[k] + self.b_z[k];
                ar[k] += ur[k] + self.b_r[k];
                z[k] = sigmoid(az[k]);
                r[k] = sigmoid(ar[k]);
                an[k] += r[k] * uh_n[k] + self.b_n[k];
                n[k] = an[k].tanh();
                h_new[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
            }
            steps.push(StepCache {
                x: x.clone(),
                h_prev: h,
                z,
                r,
                n,
                uh_n,
            });
            hidden.push(h_new.clone());
            h = h_new;
        }
        Ok((hidden, GruCache { steps }))
    }

    /// Backpropagation through time from a gradient on the final hidden
    /// state. Accumulates parameter gradients into `grads` and returns the
    /// gradient with respect to each input vector.
    pub fn backward(
        &self,
        cache: &GruCache,
        d_h_last: &[f64],
        grads: &mut GruGrads,
    ) -> Result<Vec<Vec<f64>>> {
        if d_h_last.len() != self.hidden_size {
            return Err(Error::Shape {
                context: "GruLayer::backward d_h_last",
                expected: self.hidden_size,
                got: d_h_last.len(),
            });
        }
        let t_len = cache.steps.len();
        let mut dxs = vec![vec![0.0; self.input_size]; t_len];
        let mut dh = d_h_last.to_vec();
        for t in (0..t_len).rev() {
            let s = &cache.steps[t];
            let hs = self.hidden_size;

            let mut dz = vec![0.0; hs];
            let mut dn = vec![0.0; hs];
            let mut dh_prev = vec![0.0; hs];
            for k in 0..hs {
                dz[k] = dh[k] * (s.h_prev[k] - s.n[k]);
                dn[k] = dh[k] * (1.0 - s.z[k]);
                dh_prev[k] = dh[k] * s.z[k];
            }

            // candidate: n = tanh(an), an = Wn x + r .* (Un h_prev) + bn
            let mut da_n = vec![0.0; hs];
            let mut dr = vec![0.0; hs];
            let mut da_n_r = vec![0.0; hs]; // da_n .* r, the slice seen by Un
            for k in 0..hs {
                da_n[k] = dn[k] * (1.0 - s.n[k] * s.n[k]);
                dr[k] = da_n[k] * s.uh_n[k];
                da_n_r[k] = da_n[k] * s.r[k];
            }
            grads.w_n.add_outer(&da_n, &s.x)?;
            grads.u_n.add_outer(&da_n_r, &s.h_prev)?;
            for k in 0..hs {
                grads.b_n[k] += da_n[k];
            }
            let dx_n = self.w_n.matvec_t(&da_n)?;
            let dh_n = self.u_n.matvec_t(&da_n_r)?;

            // gates: z = sigmoid(az), r = sigmoid(ar)
            let mut da_z = vec![0.0; hs];
            let mut da_r = vec![0.0; hs];
            for k in 0..hs {
                da_z[k] = dz[k] * s.z[k] * (1.0 - s.z[k]);
                da_r[k] = dr[k] * s.r[k] * (1.0 - s.r[k]);
            }
            grads.w_z.add_outer(&da_z, &s.x)?;
            grads.u_z.add_outer(&da_z, &s.h_prev)?;
            grads.w_r.add_outer(&da_r, &s.x)?;
            grads.u_r.add_outer(&da_r, &s.h_prev)?;
            for k in 0..hs {
                grads.b_z[k] += da_z[k];
                grads.b_r[k] += da_r[k];
            }
            let dx_z = self.w_z.matvec_t(&da_z)?;
            let dh_z = self.u_z.matvec_t(&da_z)?;
            let dx_r = self.w_r.matvec_t(&da_r)?;
            let dh_r = self.u_r.matvec_t(&da_r)?;

            for k in 0..self.input_size {
                dxs[t][k] = dx_n[k] + dx_z[k] + dx_r[k];
            }
            for k in 0..hs {
                dh_prev[k] += dh_n[k] + dh_z[k] + dh_r[k];
            }
            dh = dh_prev;
        }
        Ok(dxs)
    }
}
