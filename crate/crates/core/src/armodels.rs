//! Autoregressive and time-varying autoregressive signal models: companion
//! structure, stability checks, simulation and the synthetic datasets used by
//! the verification experiments.
//!
//! Time convention: a state vector at time `t` holds the most recent sample
//! first, `[x_t, x_{t-1}, ..., x_{t-M+1}]`.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dists::{Categorical, DirichletCols, Gamma, Gaussian, Sample};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::real::Real;

/// Largest admissible companion eigenvalue modulus for generated processes.
pub const STABILITY_MARGIN: f64 = 0.999;

/// Resampling cap for unstable draws.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 100;

/// Companion matrix of an AR recursion: first row `θᵀ`, identity shift below.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionMatrix<T> {
    coefficients: Vec<T>,
    matrix: Matrix<T>,
}

impl<T: Real> CompanionMatrix<T> {
    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// One step of the noiseless recursion: inner product in front, shift behind.
    pub fn apply(&self, state: &[T]) -> Vec<T> {
        let mut next = Vec::with_capacity(state.len());
        next.push(dot(&self.coefficients, state));
        next.extend_from_slice(&state[..state.len() - 1]);
        next
    }
}

pub fn companion<T: Real>(theta: &[T]) -> Result<CompanionMatrix<T>> {
    let m = theta.len();
    if m == 0 {
        return Err(Error::Empty("AR coefficients"));
    }
    let mut matrix = Matrix::zeros(m, m);
    for (j, &c) in theta.iter().enumerate() {
        matrix[(0, j)] = c;
    }
    for i in 1..m {
        matrix[(i, i - 1)] = T::one();
    }
    Ok(CompanionMatrix { coefficients: theta.to_vec(), matrix })
}

/// True iff every root of the characteristic polynomial of `coeffs` lies
/// strictly inside the disc of the given radius.
///
/// Uses the Schur-Cohn step-down recursion on reflection coefficients, which
/// avoids explicit root finding.
pub fn roots_inside<T: Real>(coeffs: &[T], radius: T) -> bool {
    let mut a: Vec<f64> = coeffs.iter().enumerate().map(|(i, &c)| c.f64() / radius.f64().powi(i as i32 + 1)).collect();
    if a.iter().any(|c| !c.is_finite()) {
        return false;
    }
    while let Some(&k) = a.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let p = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1).map(|i| (a[i] + k * a[p - 2 - i]) / denom).collect();
        a = next;
    }
    true
}

/// True iff all companion eigenvalues have modulus `< 1`.
pub fn is_stable<T: Real>(coeffs: &[T]) -> bool {
    !coeffs.is_empty() && roots_inside(coeffs, T::one())
}

/// Stability with the generation margin (`|λ| < 0.999`).
pub fn is_stable_with_margin<T: Real>(coeffs: &[T]) -> bool {
    !coeffs.is_empty() && roots_inside(coeffs, T::c(STABILITY_MARGIN))
}

/// Parameters of a stationary AR process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArParams<T> {
    pub coefficients: Vec<T>,
    /// Innovation precision `τ`.
    pub precision: T,
}

impl<T: Real> ArParams<T> {
    pub fn new(coefficients: Vec<T>, precision: T) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Empty("AR coefficients"));
        }
        if !(precision > T::zero()) || !precision.is_finite() {
            return Err(Error::InvalidParameter(format!("AR precision {precision}")));
        }
        Ok(Self { coefficients, precision })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }
}

fn normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::c(StandardNormal.sample(rng))
}

/// Simulate `len` samples of an AR process.
///
/// `init` is the state before the first sample, most recent first. Only the
/// leading state entry receives innovation noise; the rest is the shift.
pub fn simulate_ar<T: Real, R: Rng + ?Sized>(params: &ArParams<T>, len: usize, init: &[T], rng: &mut R) -> Result<Vec<T>> {
    if !(params.precision > T::zero()) {
        return Err(Error::InvalidParameter(format!("AR precision {}", params.precision)));
    }
    if init.len() != params.order() {
        return Err(Error::DimensionMismatch { expected: params.order(), got: init.len() });
    }
    let sd = params.precision.recip().sqrt();
    let mut state = init.to_vec();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let x = dot(&params.coefficients, &state) + sd * normal::<T, R>(rng);
        state.rotate_right(1);
        state[0] = x;
        out.push(x);
    }
    Ok(out)
}

/// A sampled time-varying AR path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvarTrajectory<T> {
    /// `θ_0 ..= θ_T`; `θ_t` generates `s_t` for `t ≥ 1`.
    pub theta: Vec<Vec<T>>,
    /// Initial state `[s_0, s_{-1}, ..., s_{1-M}]`.
    pub init: Vec<T>,
    /// `s_1 ..= s_T`.
    pub samples: Vec<T>,
    pub omega: T,
    pub gamma: T,
}

impl<T: Real> TvarTrajectory<T> {
    pub fn order(&self) -> usize {
        self.init.len()
    }

    /// State vector at time `t` (`0 ≤ t ≤ T`), most recent first.
    pub fn state(&self, t: usize) -> Vec<T> {
        let m = self.order();
        (0..m)
            .map(|j| if j < t { self.samples[t - 1 - j] } else { self.init[j - t] })
            .collect()
    }
}

/// Simulate a TVAR process whose coefficients follow a Gaussian random walk
/// with covariance `ωI`, starting from `θ_0 ~ N(0, ωI)` and `s_0 ~ N(0, I)`.
///
/// Paths whose coefficients leave the stability margin at any step are
/// rejected and redrawn.
pub fn simulate_tvar<T: Real, R: Rng + ?Sized>(order: usize, omega: T, gamma: T, len: usize, rng: &mut R) -> Result<TvarTrajectory<T>> {
    simulate_tvar_from(order, omega, gamma, len, None, rng)
}

/// Like [`simulate_tvar`] with an optional fixed starting coefficient vector.
pub fn simulate_tvar_from<T: Real, R: Rng + ?Sized>(
    order: usize,
    omega: T,
    gamma: T,
    len: usize,
    theta0: Option<&[T]>,
    rng: &mut R,
) -> Result<TvarTrajectory<T>> {
    if order == 0 {
        return Err(Error::Empty("TVAR order"));
    }
    if !(omega >= T::zero()) || !(gamma > T::zero()) {
        return Err(Error::InvalidParameter(format!("TVAR omega {omega}, gamma {gamma}")));
    }
    let step_sd = omega.sqrt();
    let sd = gamma.recip().sqrt();
    'attempt: for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let mut theta = match theta0 {
            Some(t0) => t0.to_vec(),
            None => (0..order).map(|_| step_sd * normal::<T, R>(rng)).collect(),
        };
        if !is_stable_with_margin(&theta) {
            continue;
        }
        let init: Vec<T> = (0..order).map(|_| normal::<T, R>(rng)).collect();
        let mut thetas = Vec::with_capacity(len + 1);
        thetas.push(theta.clone());
        let mut state = init.clone();
        let mut samples = Vec::with_capacity(len);
        for _ in 0..len {
            if step_sd > T::zero() {
                for c in &mut theta {
                    *c += step_sd * normal::<T, R>(rng);
                }
                if !is_stable_with_margin(&theta) {
                    continue 'attempt;
                }
            }
            let s = dot(&theta, &state) + sd * normal::<T, R>(rng);
            if !s.is_finite() {
                continue 'attempt;
            }
            state.rotate_right(1);
            state[0] = s;
            samples.push(s);
            thetas.push(theta.clone());
        }
        return Ok(TvarTrajectory { theta: thetas, init, samples, omega, gamma });
    }
    Err(Error::ResamplingCapExceeded { attempts: MAX_RESAMPLE_ATTEMPTS })
}

/// Draw from `dist` until the coefficients are stable with margin.
pub fn sample_stable_coefficients<T: Real, R: Rng + ?Sized>(dist: &Gaussian<T>, cap: usize, rng: &mut R) -> Result<Vec<T>> {
    for _ in 0..cap {
        let c = dist.sample(rng);
        if is_stable_with_margin(&c) {
            return Ok(c);
        }
    }
    Err(Error::ResamplingCapExceeded { attempts: cap })
}

/// Noise contexts of the classification experiment: AR coefficients and
/// innovation variance per context.
pub fn table1_contexts<T: Real>() -> Vec<ArParams<T>> {
    let rows: [(&[f64], f64); 4] = [
        (&[-0.308], 1.0),
        (&[0.722, -0.673], 2.0),
        (&[-0.081, 0.079, -0.362], 0.5),
        (&[-1.433, -0.174, 0.757, 0.466], 1.0),
    ];
    rows.iter()
        .map(|(c, var)| ArParams { coefficients: c.iter().map(|&x| T::c(x)).collect(), precision: T::c(1.0 / var) })
        .collect()
}

/// Frames and ground-truth context labels for the classification experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextDataset<T> {
    pub frames: Vec<Vec<T>>,
    pub labels: Vec<usize>,
    /// Column-stochastic transition matrix used for generation.
    pub transition: Matrix<T>,
}

/// Generate a context-switching AR signal: a Markov chain over contexts with
/// transition matrix columns drawn from `Dirichlet(1)` and a uniform initial
/// context; each frame is simulated with the parameters of its context. The
/// signal history is carried across frame boundaries.
pub fn generate_context_dataset<T: Real, R: Rng + ?Sized>(
    bank: &[ArParams<T>],
    frames: usize,
    frame_len: usize,
    rng: &mut R,
) -> Result<ContextDataset<T>> {
    if bank.is_empty() {
        return Err(Error::Empty("context bank"));
    }
    let l = bank.len();
    let transition = DirichletCols::symmetric(l, T::one())?.sample(rng);
    let max_order = bank.iter().map(ArParams::order).max().unwrap_or(1);
    let mut history: Vec<T> = (0..max_order).map(|_| normal::<T, R>(rng)).collect();
    let mut label = Categorical::<T>::uniform(l).sample(rng);
    let mut out = Vec::with_capacity(frames);
    let mut labels = Vec::with_capacity(frames);
    for k in 0..frames {
        if k > 0 {
            let column: Vec<T> = (0..l).map(|i| transition[(i, label)]).collect();
            label = Categorical::from_weights(&column)?.sample(rng);
        }
        let p = &bank[label];
        let frame = simulate_ar(p, frame_len, &history[..p.order()], rng)?;
        for &x in &frame {
            history.rotate_right(1);
            history[0] = x;
        }
        out.push(frame);
        labels.push(label);
    }
    Ok(ContextDataset { frames: out, labels, transition })
}

/// Ranges for the coupled speech-plus-noise datasets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledGenConfig {
    pub len: usize,
    pub speech_orders: (usize, usize),
    pub noise_orders: (usize, usize),
    pub omega: f64,
    /// Gamma (shape, rate) the true speech precision is drawn from.
    pub speech_precision: (f64, f64),
    /// Gamma (shape, rate) the true noise precision is drawn from.
    pub noise_precision: (f64, f64),
}

impl Default for CoupledGenConfig {
    fn default() -> Self {
        Self {
            len: 100,
            speech_orders: (4, 8),
            noise_orders: (1, 4),
            omega: 1e-4,
            speech_precision: (1.0, 1.0),
            noise_precision: (1.0, 1.0),
        }
    }
}

/// One synthetic observation `x = s + n` with its hidden ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledDataset<T> {
    pub x: Vec<T>,
    pub speech: TvarTrajectory<T>,
    pub noise: Vec<T>,
    /// Initial noise state `[n_0, ..., n_{1-N}]`.
    pub noise_init: Vec<T>,
    pub zeta: Vec<T>,
    pub tau: T,
}

/// Draw orders, parameters and signals for one coupled dataset.
pub fn generate_coupled_dataset<T: Real, R: Rng + ?Sized>(cfg: &CoupledGenConfig, rng: &mut R) -> Result<CoupledDataset<T>> {
    let m = rng.random_range(cfg.speech_orders.0..=cfg.speech_orders.1);
    let n = rng.random_range(cfg.noise_orders.0..=cfg.noise_orders.1.min(m));
    let gamma = Gamma::new(T::c(cfg.speech_precision.0), T::c(cfg.speech_precision.1))?.sample(rng);
    let tau = Gamma::new(T::c(cfg.noise_precision.0), T::c(cfg.noise_precision.1))?.sample(rng);
    let speech = simulate_tvar(m, T::c(cfg.omega), gamma, cfg.len, rng)?;
    let zeta = sample_stable_coefficients(&Gaussian::isotropic(vec![T::zero(); n], T::one())?, 100_000, rng)?;
    let noise_init: Vec<T> = (0..n).map(|_| normal::<T, R>(rng)).collect();
    let raw = simulate_ar(&ArParams::new(zeta.clone(), tau)?, cfg.len, &noise_init, rng)?;
    let x: Vec<T> = speech.samples.iter().zip(&raw).map(|(&s, &v)| s + v).collect();
    // Stored as x - s so the observation identity holds bit-exactly in
    // floating point (differs from the simulated noise by at most one ulp).
    let noise = x.iter().zip(&speech.samples).map(|(&x, &s)| x - s).collect();
    Ok(CoupledDataset { x, speech, noise, noise_init, zeta, tau })
}

const MAGIC: &[u8; 8] = b"AIDADS01";

/// Serialized dataset: a JSON header plus named little-endian `f64` arrays.
///
/// Layout: `AIDADS01`, `u32` LE header byte length, UTF-8 JSON header, then
/// the arrays back to back in header order. The header is an object with an
/// `arrays` list of `{name, len}` and a free-form `meta` value (orders,
/// seeds, parameters).
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub meta: serde_json::Value,
    pub arrays: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct ArrayEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: serde_json::Value,
    arrays: Vec<ArrayEntry>,
}

impl DatasetFile {
    pub fn array(&self, name: &str) -> Option<&[f64]> {
        self.arrays.iter().find(|(n, _)| n == name).map(|(_, a)| a.as_slice())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let header = Header {
            meta: self.meta.clone(),
            arrays: self.arrays.iter().map(|(n, a)| ArrayEntry { name: n.clone(), len: a.len() }).collect(),
        };
        let json = serde_json::to_vec(&header)?;
        let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&json)?;
        for (_, a) in &self.arrays {
            for v in a {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        let mut arrays = Vec::with_capacity(header.arrays.len());
        let mut buf = [0u8; 8];
        for entry in header.arrays {
            let mut a = Vec::with_capacity(entry.len);
            for _ in 0..entry.len {
                r.read_exact(&mut buf)?;
                a.push(f64::from_le_bytes(buf));
            }
            arrays.push((entry.name, a));
        }
        Ok(Self { meta: header.meta, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl ContextDataset<f64> {
    pub fn to_file(&self, meta: serde_json::Value) -> DatasetFile {
        DatasetFile {
            meta,
            arrays: vec![
                ("x".into(), self.frames.concat()),
                ("labels".into(), self.labels.iter().map(|&l| l as f64).collect()),
                ("transition".into(), self.transition.as_slice().to_vec()),
            ],
        }
    }
}
