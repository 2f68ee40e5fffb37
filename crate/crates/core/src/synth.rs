//! Seeded synthetic datasets: the shifted sine wave and the spiral
//! memorization task.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

fn invalid(field: &'static str, reason: &str) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

/// One-dimensional regression: `y = sin(x) + noise + shift_era`, where each
/// era draws its own vertical shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SineWaveSpec {
    pub n_eras: usize,
    pub rows_per_era: usize,
    pub noise_sigma: f64,
    pub shift_range: (f64, f64),
    /// Shift of the held-out era; drawn like a training era when `None`.
    pub test_shift: Option<f64>,
    pub seed: u64,
}

impl Default for SineWaveSpec {
    fn default() -> Self {
        Self {
            n_eras: 8,
            rows_per_era: 64,
            noise_sigma: 1.0,
            shift_range: (-3.0, 3.0),
            test_shift: None,
            seed: 0,
        }
    }
}

impl SineWaveSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_eras == 0 {
            return Err(invalid("n_eras", "must be positive"));
        }
        if self.rows_per_era == 0 {
            return Err(invalid("rows_per_era", "must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma", "must be finite and >= 0"));
        }
        let (lo, hi) = self.shift_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid("shift_range", "needs finite low <= high"));
        }
        if self.test_shift.is_some_and(|s| !s.is_finite()) {
            return Err(invalid("test_shift", "must be finite"));
        }
        Ok(())
    }
}

/// Generated data plus the latent per-era shifts, training eras first and
/// the test era last.
#[derive(Debug, Clone)]
pub struct SineWaveData {
    pub train: Dataset,
    pub test: Dataset,
    pub shifts: Vec<f64>,
}

fn draw_shift(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn sine_era(rng: &mut ChaCha8Rng, spec: &SineWaveSpec, shift: f64, x: &mut Vec<f64>, y: &mut Vec<f64>) {
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    for _ in 0..spec.rows_per_era {
        let xi = rng.random_range(0.0..TAU);
        x.push(xi);
        y.push(xi.sin() + noise.sample(rng) + shift);
    }
}

pub fn gen_sine_wave(spec: &SineWaveSpec) -> Result<SineWaveData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut x, mut y, mut eras, mut shifts) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for j in 0..spec.n_eras {
        let shift = draw_shift(&mut rng, spec.shift_range);
        shifts.push(shift);
        sine_era(&mut rng, spec, shift, &mut x, &mut y);
        eras.resize(x.len(), j);
    }
    let train = Dataset::new(vec!["x".into()], vec![x], y, eras)?;

    let drawn = draw_shift(&mut rng, spec.shift_range);
    let shift = spec.test_shift.unwrap_or(drawn);
    shifts.push(shift);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    sine_era(&mut rng, spec, shift, &mut x, &mut y);
    let n = x.len();
    let test = Dataset::new(vec!["x".into()], vec![x], y, vec![0; n])?
        .with_era_labels(vec![spec.n_eras as i64])?;
    Ok(SineWaveData { train, test, shifts })
}

/// Binary classification with an invariant two-arm spiral in the first two
/// dimensions and per-era shortcut clusters in the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemorizationSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub dims: usize,
    pub n_eras: usize,
    pub spiral_turns: f64,
    pub spiral_noise: f64,
    pub shortcut_scale: f64,
    pub seed: u64,
}

impl Default for MemorizationSpec {
    fn default() -> Self {
        Self {
            n_train: 12288,
            n_test: 2000,
            dims: 18,
            n_eras: 16,
            spiral_turns: 1.0,
            spiral_noise: 0.05,
            shortcut_scale: 1.0,
            seed: 0,
        }
    }
}

/// Spread of a shortcut cluster relative to `shortcut_scale`.
const SHORTCUT_SPREAD: f64 = 0.05;
/// Innermost spiral radius; keeps the two arms apart at the center.
const SPIRAL_INNER: f64 = 0.1;

impl MemorizationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims < 3 {
            return Err(invalid("dims", "need at least 3 dimensions"));
        }
        if self.n_eras == 0 {
            return Err(invalid("n_eras", "must be positive"));
        }
        if self.n_train == 0 || !self.n_train.is_multiple_of(self.n_eras) {
            return Err(invalid("n_train", "must be a positive multiple of n_eras"));
        }
        if !(self.n_train / self.n_eras).is_multiple_of(2) {
            return Err(invalid("n_train", "rows per era must be even for exact class balance"));
        }
        if self.n_test == 0 || !self.n_test.is_multiple_of(2) {
            return Err(invalid("n_test", "must be positive and even"));
        }
        for (field, v) in [
            ("spiral_turns", self.spiral_turns),
            ("spiral_noise", self.spiral_noise),
            ("shortcut_scale", self.shortcut_scale),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(field, "must be finite and >= 0"));
            }
        }
        if self.spiral_turns == 0.0 || self.shortcut_scale == 0.0 {
            return Err(invalid("spiral_turns", "spiral_turns and shortcut_scale must be positive"));
        }
        Ok(())
    }

    /// Shortcut dimensions used by `era`: a cyclic window over half of the
    /// shortcut dimensions, so each dimension serves about half the eras.
    pub fn shortcut_dims(&self, era: usize) -> Vec<usize> {
        let k = self.dims - 2;
        (0..(k / 2).max(1)).map(|i| 2 + (era + i) % k).collect()
    }
}

#[derive(Debug, Clone)]
pub struct MemorizationData {
    pub train: Dataset,
    pub test: Dataset,
}

fn spiral_point(rng: &mut ChaCha8Rng, spec: &MemorizationSpec, label: usize, jitter: &Normal<f64>) -> (f64, f64) {
    let t: f64 = rng.random();
    let radius = SPIRAL_INNER + (1.0 - SPIRAL_INNER) * t + jitter.sample(rng);
    let angle = TAU * spec.spiral_turns * t + PI * label as f64;
    (radius * angle.cos(), radius * angle.sin())
}

/// Generates the memorization task.
///
/// Era `j` draws, for each of its [`MemorizationSpec::shortcut_dims`], an
/// offset and a margin and places class 1 at `offset + margin` and class 0 at
/// `offset - margin`; shortcut dimensions the era does not use are exactly
/// zero. Pooled over eras the shortcut dimensions stay linearly separable,
/// yet every threshold on one of them leaves the eras that do not use it
/// entirely on one side. Test rows keep the spiral but replace every shortcut
/// dimension with class-independent Gaussian noise of scale `shortcut_scale`.
pub fn gen_memorization(spec: &MemorizationSpec) -> Result<MemorizationData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale = spec.shortcut_scale;
    let jitter = Normal::new(0.0, spec.spiral_noise).expect("validated noise");
    let spread = Normal::new(0.0, SHORTCUT_SPREAD * scale).expect("validated scale");
    let names: Vec<String> = (0..spec.dims).map(|k| format!("x{k}")).collect();

    // (dim, offset, margin) per era
    let clusters: Vec<Vec<(usize, f64, f64)>> = (0..spec.n_eras)
        .map(|j| {
            spec.shortcut_dims(j)
                .into_iter()
                .map(|dim| {
                    let offset = rng.random_range(-0.25..0.25) * scale;
                    let margin = rng.random_range(0.75..1.25) * scale;
                    (dim, offset, margin)
                })
                .collect()
        })
        .collect();

    let per_era = spec.n_train / spec.n_eras;
    let mut cols = vec![vec![0.0; spec.n_train]; spec.dims];
    let mut labels = Vec::with_capacity(spec.n_train);
    let mut eras = Vec::with_capacity(spec.n_train);
    for (j, era_clusters) in clusters.iter().enumerate() {
        for i in 0..per_era {
            let row = labels.len();
            let label = i % 2;
            let (a, b) = spiral_point(&mut rng, spec, label, &jitter);
            cols[0][row] = a;
            cols[1][row] = b;
            for &(dim, offset, margin) in era_clusters {
                let side = if label == 1 { margin } else { -margin };
                cols[dim][row] = offset + side + spread.sample(&mut rng);
            }
            labels.push(label as f64);
            eras.push(j);
        }
    }
    let train = Dataset::new(names.clone(), cols, labels, eras)?;

    let noise = Normal::new(0.0, scale).expect("validated scale");
    let mut cols = vec![Vec::with_capacity(spec.n_test); spec.dims];
    let mut labels = Vec::with_capacity(spec.n_test);
    for i in 0..spec.n_test {
        let label = i % 2;
        let (a, b) = spiral_point(&mut rng, spec, label, &jitter);
        cols[0].push(a);
        cols[1].push(b);
        for col in cols.iter_mut().skip(2) {
            col.push(noise.sample(&mut rng));
        }
        labels.push(label as f64);
    }
    let test = Dataset::new(names, cols, labels, vec![0; spec.n_test])?
        .with_era_labels(vec![spec.n_eras as i64])?;
    Ok(MemorizationData { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_defaults() {
        let data = gen_sine_wave(&SineWaveSpec { seed: 7, ..Default::default() }).unwrap();
        assert_eq!(data.train.n_rows(), 512);
        assert_eq!(data.train.n_eras(), 8);
        assert_eq!(data.test.n_rows(), 64);
        assert!(data.train.column(0).iter().all(|&x| (0.0..=TAU).contains(&x)));
        for rows in data.train.group_rows_by_era() {
            assert_eq!(rows.len(), 64);
        }
    }

    #[test]
    fn noiseless_sine_is_exact() {
        let spec = SineWaveSpec {
            noise_sigma: 0.0,
            shift_range: (0.0, 0.0),
            ..Default::default()
        };
        let data = gen_sine_wave(&spec).unwrap();
        for (x, y) in data.train.column(0).iter().zip(data.train.targets()) {
            assert_eq!(*y, x.sin());
        }
    }

    #[test]
    fn shifts_are_recoverable() {
        let data = gen_sine_wave(&SineWaveSpec { seed: 3, ..Default::default() }).unwrap();
        let x = data.train.column(0);
        let y = data.train.targets();
        for (j, rows) in data.train.group_rows_by_era().iter().enumerate() {
            let mean = rows.iter().map(|&i| y[i] - x[i].sin()).sum::<f64>() / rows.len() as f64;
            assert!((mean - data.shifts[j]).abs() < 3.0 / 8.0, "era {j}");
        }
    }

    #[test]
    fn fixed_test_shift() {
        let data = gen_sine_wave(&SineWaveSpec { test_shift: Some(0.0), ..Default::default() }).unwrap();
        assert_eq!(*data.shifts.last().unwrap(), 0.0);
        assert_eq!(data.test.era_labels(), &[8]);
    }

    #[test]
    fn memorization_shapes_and_balance() {
        let spec = MemorizationSpec { seed: 7, ..Default::default() };
        let data = gen_memorization(&spec).unwrap();
        assert_eq!(data.train.n_rows(), 12288);
        assert_eq!(data.train.n_features(), 18);
        assert_eq!(data.train.n_eras(), 16);
        assert_eq!(data.test.n_rows(), 2000);
        let y = data.train.targets();
        for rows in data.train.group_rows_by_era() {
            assert_eq!(rows.len(), 768);
            assert_eq!(rows.iter().filter(|&&i| y[i] == 1.0).count(), 384);
        }
        assert_eq!(data.test.targets().iter().filter(|&&t| t == 1.0).count(), 1000);
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = MemorizationSpec { n_train: 320, n_test: 40, n_eras: 4, dims: 6, seed: 9, ..Default::default() };
        let a = gen_memorization(&spec).unwrap();
        let b = gen_memorization(&spec).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        let c = gen_memorization(&MemorizationSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn invalid_specs() {
        assert!(gen_memorization(&MemorizationSpec { dims: 2, ..Default::default() }).is_err());
        assert!(gen_memorization(&MemorizationSpec { n_train: 1000, ..Default::default() }).is_err());
        assert!(gen_sine_wave(&SineWaveSpec { shift_range: (1.0, -1.0), ..Default::default() }).is_err());
        assert!(gen_sine_wave(&SineWaveSpec { noise_sigma: -1.0, ..Default::default() }).is_err());
    }
}
