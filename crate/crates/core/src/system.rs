//! Affine control systems `x' = f(x) + g(x) u`, time-varying input boxes,
//! held uniform noise, and augmentation with penalty integrator chains.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numerics::{self, lift, DualScalar, NumericsError, Vector, VectorFn};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("chain length must be at least 1 (chain {0})")]
    EmptyChain(usize),
    #[error("noise amplitude for channel {0} is negative or non-finite")]
    BadNoiseAmplitude(usize),
    #[error("noise hold interval must be positive")]
    BadHoldInterval,
    #[error("noise queried at negative time {0}")]
    NegativeTime(f64),
    #[error("input bounds crossed at t={t}: lower {lower} > upper {upper} on channel {channel}")]
    CrossedBounds {
        t: f64,
        channel: usize,
        lower: f64,
        upper: f64,
    },
}

pub type Result<T, E = SystemError> = std::result::Result<T, E>;

/// `x' = f(x) + g(x) u` with `g` stored row-major as an `n x q` matrix.
#[derive(Clone, Debug)]
pub struct AffineControlSystem {
    n: usize,
    q: usize,
    drift: VectorFn,
    input_matrix: VectorFn,
}

impl AffineControlSystem {
    pub fn new(drift: VectorFn, input_matrix: VectorFn, q: usize) -> Result<Self> {
        let n = drift.input_dim();
        numerics::check_dim("drift output", n, drift.output_dim())?;
        numerics::check_dim("input matrix input", n, input_matrix.input_dim())?;
        numerics::check_dim("input matrix output", n * q, input_matrix.output_dim())?;
        Ok(Self {
            n,
            q,
            drift,
            input_matrix,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.q
    }

    pub fn drift_dual(&self, x: &[DualScalar]) -> Vec<DualScalar> {
        self.drift.eval(x)
    }

    /// Row-major `n x q` entries of `g(x)`.
    pub fn input_matrix_dual(&self, x: &[DualScalar]) -> Vec<DualScalar> {
        self.input_matrix.eval(x)
    }

    pub fn drift(&self, x: &[f64]) -> Result<Vector> {
        Ok(Vector::from_vec(self.drift.eval_real(x)?))
    }

    /// Column `j` of `g(x)`.
    pub fn input_column(&self, x: &[f64], j: usize) -> Result<Vector> {
        let g = self.input_matrix.eval_real(x)?;
        Ok(Vector::from_iterator(
            self.n,
            (0..self.n).map(|i| g[i * self.q + j]),
        ))
    }

    /// `f(x) + g(x) u`.
    pub fn evaluate_rhs(&self, x: &[f64], u: &[f64]) -> Result<Vector> {
        numerics::check_dim("state", self.n, x.len())?;
        numerics::check_dim("input", self.q, u.len())?;
        let xd = lift(x);
        let f = self.drift.eval(&xd);
        let g = self.input_matrix.eval(&xd);
        let mut out = Vector::zeros(self.n);
        for i in 0..self.n {
            let mut v = f[i].value();
            for (j, uj) in u.iter().enumerate() {
                v += g[i * self.q + j].value() * uj;
            }
            out[i] = v;
        }
        numerics::check_finite("right-hand side", out.as_slice())?;
        Ok(out)
    }
}

/// Context handed to bound evaluators. `activated_at` is the first time the
/// safety constraint was active at the optimum, if it has been.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsQuery {
    pub t: f64,
    pub activated_at: Option<f64>,
}

impl BoundsQuery {
    pub fn at(t: f64) -> Self {
        Self {
            t,
            activated_at: None,
        }
    }
}

type BoundEval = dyn Fn(&BoundsQuery) -> Vec<f64> + Send + Sync;

/// Componentwise box `u_min(t) <= u <= u_max(t)`.
#[derive(Clone)]
pub struct InputBounds {
    q: usize,
    lower: Arc<BoundEval>,
    upper: Arc<BoundEval>,
}

impl fmt::Debug for InputBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InputBounds").field("q", &self.q).finish()
    }
}

impl InputBounds {
    pub fn new(
        q: usize,
        lower: impl Fn(&BoundsQuery) -> Vec<f64> + Send + Sync + 'static,
        upper: impl Fn(&BoundsQuery) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            q,
            lower: Arc::new(lower),
            upper: Arc::new(upper),
        }
    }

    pub fn constant(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        let q = lower.len();
        Self::new(q, move |_| lower.clone(), move |_| upper.clone())
    }

    /// No bounds on any of `q` channels.
    pub fn unbounded(q: usize) -> Self {
        Self::constant(vec![f64::NEG_INFINITY; q], vec![f64::INFINITY; q])
    }

    pub fn input_dim(&self) -> usize {
        self.q
    }

    pub fn evaluate(&self, query: &BoundsQuery) -> Result<(Vec<f64>, Vec<f64>)> {
        let lo = (self.lower)(query);
        let hi = (self.upper)(query);
        numerics::check_dim("lower bound", self.q, lo.len())?;
        numerics::check_dim("upper bound", self.q, hi.len())?;
        for (channel, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(SystemError::CrossedBounds {
                    t: query.t,
                    channel,
                    lower: l,
                    upper: h,
                });
            }
        }
        Ok((lo, hi))
    }
}

/// Additive noise, uniform on `[-amp, amp]` per channel and held constant
/// over each interval `[k h, (k+1) h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    amplitudes: Vec<f64>,
    seed: u64,
    hold: f64,
}

impl NoiseModel {
    pub fn new(amplitudes: Vec<f64>, seed: u64, hold: f64) -> Result<Self> {
        for (i, a) in amplitudes.iter().enumerate() {
            if !(a.is_finite() && *a >= 0.0) {
                return Err(SystemError::BadNoiseAmplitude(i));
            }
        }
        if !(hold.is_finite() && hold > 0.0) {
            return Err(SystemError::BadHoldInterval);
        }
        Ok(Self {
            amplitudes,
            seed,
            hold,
        })
    }

    pub fn zero(channels: usize) -> Self {
        Self {
            amplitudes: vec![0.0; channels],
            seed: 0,
            hold: 1.0,
        }
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hold(&self) -> f64 {
        self.hold
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|&a| a == 0.0)
    }

    /// Index of the hold interval containing `t`. A small relative guard
    /// keeps `k * hold` inside interval `k` despite rounding.
    pub fn interval(&self, t: f64) -> u64 {
        ((t / self.hold) * (1.0 + 1e-12) + 1e-9).floor() as u64
    }

    /// Pure function of `(seed, interval(t))`.
    pub fn sample(&self, t: f64) -> Result<Vector> {
        if t < 0.0 {
            return Err(SystemError::NegativeTime(t));
        }
        if self.is_zero() {
            return Ok(Vector::zeros(self.amplitudes.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.interval(t));
        Ok(Vector::from_iterator(
            self.amplitudes.len(),
            self.amplitudes.iter().map(|&a| {
                if a == 0.0 {
                    // keep the stream position independent of zero channels
                    let _: f64 = rng.random();
                    0.0
                } else {
                    rng.random_range(-a..=a)
                }
            }),
        ))
    }
}

/// Base system extended with pure integrator chains for penalty functions.
///
/// State `z = (x, chain_0, chain_1, ...)`, input `w = (u, nu_0, nu_1, ...)`.
/// Chain `c` of length `L` evolves as `p' = p_2, ..., p_L' = nu_c`; its
/// output is the chain head `p`.
#[derive(Clone, Debug)]
pub struct AugmentedSystem {
    base: AffineControlSystem,
    chains: Vec<usize>,
    combined: AffineControlSystem,
}

impl AugmentedSystem {
    pub fn augment(base: &AffineControlSystem, chain_lengths: &[usize]) -> Result<Self> {
        if let Some(c) = chain_lengths.iter().position(|&l| l == 0) {
            return Err(SystemError::EmptyChain(c));
        }
        let n = base.state_dim();
        let q = base.input_dim();
        let chains = chain_lengths.to_vec();
        let big_n = n + chains.iter().sum::<usize>();
        let big_q = q + chains.len();

        let offsets: Vec<usize> = chains
            .iter()
            .scan(n, |off, &l| {
                let o = *off;
                *off += l;
                Some(o)
            })
            .collect();

        let drift_base = base.clone();
        let drift_chains = chains.clone();
        let drift_offsets = offsets.clone();
        let drift = VectorFn::new(big_n, big_n, move |z| {
            let mut out = drift_base.drift_dual(&z[..n]);
            out.resize(big_n, DualScalar::constant(0.0));
            for (&off, &len) in drift_offsets.iter().zip(&drift_chains) {
                for k in 0..len - 1 {
                    out[off + k] = z[off + k + 1].clone();
                }
            }
            out
        });

        let g_base = base.clone();
        let g_chains = chains.clone();
        let g_offsets = offsets;
        let input_matrix = VectorFn::new(big_n, big_n * big_q, move |z| {
            let g = g_base.input_matrix_dual(&z[..n]);
            let mut out = vec![DualScalar::constant(0.0); big_n * big_q];
            for i in 0..n {
                for j in 0..q {
                    out[i * big_q + j] = g[i * q + j].clone();
                }
            }
            for (c, (&off, &len)) in g_offsets.iter().zip(&g_chains).enumerate() {
                out[(off + len - 1) * big_q + q + c] = DualScalar::constant(1.0);
            }
            out
        });

        let combined = AffineControlSystem::new(drift, input_matrix, big_q)?;
        Ok(Self {
            base: base.clone(),
            chains,
            combined,
        })
    }

    pub fn base(&self) -> &AffineControlSystem {
        &self.base
    }

    /// Augmented dynamics as a plain affine system over `(z, w)`.
    pub fn combined(&self) -> &AffineControlSystem {
        &self.combined
    }

    pub fn chains(&self) -> &[usize] {
        &self.chains
    }

    pub fn state_dim(&self) -> usize {
        self.combined.state_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.combined.input_dim()
    }

    pub fn base_state_dim(&self) -> usize {
        self.base.state_dim()
    }

    pub fn base_input_dim(&self) -> usize {
        self.base.input_dim()
    }

    /// Index in `z` of the head `p` of chain `c`.
    pub fn chain_offset(&self, c: usize) -> usize {
        self.base.state_dim() + self.chains[..c].iter().sum::<usize>()
    }

    /// Index in `w` of `nu_c`.
    pub fn nu_index(&self, c: usize) -> usize {
        self.base.input_dim() + c
    }

    /// Auxiliary output `y_c = p_c`.
    pub fn output(&self, z: &[f64], c: usize) -> f64 {
        z[self.chain_offset(c)]
    }

    pub fn evaluate_rhs(&self, z: &[f64], w: &[f64]) -> Result<Vector> {
        self.combined.evaluate_rhs(z, w)
    }
}
