use super::{kernel_unchecked, Hyperparameters, PackedLower};
use crate::error::{Error, Result};

/// Number of retries after the first failed factorization.
const JITTER_RETRIES: usize = 4;
/// First retry adds `JITTER_BASE · sigma_f²` to the diagonal; each retry multiplies by ten.
const JITTER_BASE: f64 = 1e-10;

fn jitter_at(level: usize, signal_variance: f64) -> f64 {
    if level == 0 {
        0.0
    } else {
        JITTER_BASE * 10f64.powi(level as i32 - 1) * signal_variance
    }
}

/// One exact GP expert: training data, the Cholesky factor of
/// `K(X, X) + (sigma_n² + jitter)·I` and one weight vector per output.
#[derive(Debug, Clone)]
pub struct LocalGp {
    hp: Hyperparameters,
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    chol: PackedLower,
    // L⁻¹ y_j per output; extending it by one entry is O(n)
    whitened: Vec<Vec<f64>>,
    alphas: Vec<Vec<f64>>,
    jitter_level: usize,
}

impl LocalGp {
    pub fn empty(hp: Hyperparameters) -> Result<Self> {
        hp.validate()?;
        let d_out = hp.d_out;
        Ok(LocalGp {
            hp,
            inputs: Vec::new(),
            outputs: Vec::new(),
            chol: PackedLower::new(),
            whitened: vec![Vec::new(); d_out],
            alphas: vec![Vec::new(); d_out],
            jitter_level: 0,
        })
    }

    pub fn fit(inputs: &[Vec<f64>], outputs: &[Vec<f64>], hp: Hyperparameters) -> Result<Self> {
        hp.validate()?;
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("fit needs at least one training point".into()));
        }
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} outputs",
                inputs.len(),
                outputs.len()
            )));
        }
        let mut flat_in = Vec::with_capacity(inputs.len() * hp.d_in);
        let mut flat_out = Vec::with_capacity(outputs.len() * hp.d_out);
        for (x, y) in inputs.iter().zip(outputs) {
            check_point(&hp, x, y)?;
            flat_in.extend_from_slice(x);
            flat_out.extend_from_slice(y);
        }
        Self::factor_flat(hp, flat_in, flat_out, 0)
    }

    /// Builds a model from flattened row-major data, escalating jitter from `first_level`.
    fn factor_flat(hp: Hyperparameters, inputs: Vec<f64>, outputs: Vec<f64>, first_level: usize) -> Result<Self> {
        let n = inputs.len() / hp.d_in;
        let mut gram = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            let xi = &inputs[i * hp.d_in..(i + 1) * hp.d_in];
            for j in 0..=i {
                gram.push(kernel_unchecked(xi, &inputs[j * hp.d_in..(j + 1) * hp.d_in], &hp));
            }
        }

        let mut tried = Vec::new();
        for level in first_level..=JITTER_RETRIES {
            let jitter = jitter_at(level, hp.signal_variance());
            tried.push(jitter);
            let mut shifted = gram.clone();
            for i in 0..n {
                shifted[i * (i + 1) / 2 + i] += hp.noise_variance() + jitter;
            }
            if let Some(chol) = PackedLower::factor(&shifted, n) {
                let mut model = LocalGp {
                    whitened: vec![Vec::new(); hp.d_out],
                    alphas: vec![Vec::new(); hp.d_out],
                    hp,
                    inputs,
                    outputs,
                    chol,
                    jitter_level: level,
                };
                model.solve_all_outputs();
                return Ok(model);
            }
        }
        Err(Error::Numerical { jitters: tried })
    }

    fn solve_all_outputs(&mut self) {
        let n = self.len();
        let d_out = self.hp.d_out;
        for j in 0..d_out {
            let mut z: Vec<f64> = (0..n).map(|i| self.outputs[i * d_out + j]).collect();
            self.chol.forward_solve_in_place(&mut z);
            self.whitened[j] = z;
        }
        self.refresh_alphas();
    }

    fn refresh_alphas(&mut self) {
        for (alpha, z) in self.alphas.iter_mut().zip(&self.whitened) {
            alpha.clone_from(z);
            self.chol.back_solve_in_place(alpha);
        }
    }

    /// Adds one training point by extending the Cholesky factor with a single
    /// row. Falls back to a full refactorization with a larger jitter only when
    /// the new pivot is not positive. On error the model is left unchanged.
    pub fn add_point(&mut self, x: &[f64], y: &[f64]) -> Result<()> {
        check_point(&self.hp, x, y)?;
        let n = self.len();
        let d_in = self.hp.d_in;
        let mut cross: Vec<f64> = (0..n)
            .map(|i| kernel_unchecked(&self.inputs[i * d_in..(i + 1) * d_in], x, &self.hp))
            .collect();
        let diag = self.hp.signal_variance() + self.hp.noise_variance() + self.jitter();

        if self.chol.push_row(&mut cross, diag).is_none() {
            let mut inputs = self.inputs.clone();
            let mut outputs = self.outputs.clone();
            inputs.extend_from_slice(x);
            outputs.extend_from_slice(y);
            *self = Self::factor_flat(self.hp.clone(), inputs, outputs, self.jitter_level + 1)?;
            return Ok(());
        }

        self.inputs.extend_from_slice(x);
        self.outputs.extend_from_slice(y);
        // the new row of L is [cross, pivot]; previous entries of L⁻¹y are unchanged
        let new_row = self.chol.row(n);
        let pivot = new_row[n];
        for (z, &yj) in self.whitened.iter_mut().zip(y) {
            let dot: f64 = new_row[..n].iter().zip(z.iter()).map(|(l, zi)| l * zi).sum();
            z.push((yj - dot) / pivot);
        }
        self.refresh_alphas();
        Ok(())
    }

    /// Posterior mean; the zero vector for an empty model.
    pub fn predict_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.hp.check_input(x)?;
        if self.is_empty() {
            return Ok(vec![0.0; self.hp.d_out]);
        }
        let k = self.cross_covariance(x);
        Ok(self
            .alphas
            .iter()
            .map(|alpha| k.iter().zip(alpha).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Posterior variance of the latent function (noise excluded).
    pub fn predict_var(&self, x: &[f64]) -> Result<f64> {
        self.hp.check_input(x)?;
        let prior = self.hp.signal_variance();
        if self.is_empty() {
            return Ok(prior);
        }
        let mut v = self.cross_covariance(x);
        self.chol.forward_solve_in_place(&mut v);
        let explained: f64 = v.iter().map(|vi| vi * vi).sum();
        Ok((prior - explained).max(0.0))
    }

    fn cross_covariance(&self, x: &[f64]) -> Vec<f64> {
        self.inputs
            .chunks_exact(self.hp.d_in)
            .map(|xi| kernel_unchecked(xi, x, &self.hp))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.chol.order()
    }

    pub fn is_empty(&self) -> bool {
        self.chol.is_empty()
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hp
    }

    /// Diagonal jitter currently added on top of `sigma_n²`.
    pub fn jitter(&self) -> f64 {
        jitter_at(self.jitter_level, self.hp.signal_variance())
    }

    pub fn cholesky(&self) -> &PackedLower {
        &self.chol
    }

    /// Weight vector for output `j`, solving `(K + sigma_n²·I)·alpha = Y[:, j]`.
    pub fn alpha(&self, j: usize) -> &[f64] {
        &self.alphas[j]
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.hp.d_in..(i + 1) * self.hp.d_in]
    }

    pub fn output(&self, i: usize) -> &[f64] {
        &self.outputs[i * self.hp.d_out..(i + 1) * self.hp.d_out]
    }

    pub fn points(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.inputs
            .chunks_exact(self.hp.d_in)
            .zip(self.outputs.chunks_exact(self.hp.d_out))
    }
}

fn check_point(hp: &Hyperparameters, x: &[f64], y: &[f64]) -> Result<()> {
    hp.check_input(x)?;
    hp.check_output(y)?;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("training points must be finite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_hp() -> Hyperparameters {
        Hyperparameters::new(1.0, vec![1.0], 1.0, 1).unwrap()
    }

    #[test]
    fn single_point_closed_form() {
        let m = LocalGp::fit(&[vec![0.0]], &[vec![3.0]], unit_hp()).unwrap();
        assert!((m.cholesky().get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.alpha(0)[0] - 1.5).abs() < 1e-15);
        assert!((m.predict_mean(&[0.0]).unwrap()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn empty_model_returns_prior() {
        let hp = Hyperparameters::new(2.0, vec![1.0, 1.0], 0.1, 3).unwrap();
        let m = LocalGp::empty(hp).unwrap();
        assert_eq!(m.predict_mean(&[0.3, 0.1]).unwrap(), vec![0.0; 3]);
        assert_eq!(m.predict_var(&[0.3, 0.1]).unwrap(), 4.0);
    }

    #[test]
    fn duplicate_inputs_are_fine_with_noise() {
        let m = LocalGp::fit(&[vec![0.0], vec![0.0]], &[vec![1.0], vec![2.0]], unit_hp()).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.jitter(), 0.0);
        // symmetric data: mean is the average shrunk by the noise
        let mu = m.predict_mean(&[0.0]).unwrap()[0];
        assert!((mu - 1.0).abs() < 1e-12, "{mu}");
    }

    #[test]
    fn add_to_empty_equals_fit_of_one() {
        let mut m = LocalGp::empty(unit_hp()).unwrap();
        m.add_point(&[0.0], &[3.0]).unwrap();
        let f = LocalGp::fit(&[vec![0.0]], &[vec![3.0]], unit_hp()).unwrap();
        assert_eq!(m.alpha(0), f.alpha(0));
        assert_eq!(m.cholesky(), f.cholesky());
    }

    #[test]
    fn add_point_matches_fresh_fit() {
        let mut m = LocalGp::fit(&[vec![0.0]], &[vec![3.0]], unit_hp()).unwrap();
        m.add_point(&[5.0], &[1.0]).unwrap();
        let f = LocalGp::fit(&[vec![0.0], vec![5.0]], &[vec![3.0], vec![1.0]], unit_hp()).unwrap();
        for probe in [-1.0, 0.0, 2.5, 5.0, 7.0] {
            let a = m.predict_mean(&[probe]).unwrap()[0];
            let b = f.predict_mean(&[probe]).unwrap()[0];
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let mut m = LocalGp::empty(unit_hp()).unwrap();
        assert_eq!(m.add_point(&[0.0, 1.0], &[1.0]).unwrap_err().code(), "invalid-argument");
        assert_eq!(m.add_point(&[0.0], &[f64::NAN]).unwrap_err().code(), "invalid-argument");
        assert_eq!(m.predict_mean(&[]).unwrap_err().code(), "invalid-argument");
        assert_eq!(m.predict_var(&[1.0, 2.0]).unwrap_err().code(), "invalid-argument");
        assert!(m.is_empty());
        assert!(LocalGp::fit(&[], &[], unit_hp()).is_err());
        assert!(LocalGp::fit(&[vec![0.0]], &[], unit_hp()).is_err());
    }

    #[test]
    fn far_away_variance_recovers_prior() {
        let hp = Hyperparameters::new(1.5, vec![0.2], 0.1, 1).unwrap();
        let m = LocalGp::fit(&[vec![0.0], vec![0.1]], &[vec![1.0], vec![1.0]], hp).unwrap();
        assert!((m.predict_var(&[50.0]).unwrap() - 2.25).abs() < 1e-6);
    }

    #[test]
    fn jitter_schedule() {
        assert_eq!(jitter_at(0, 4.0), 0.0);
        assert!((jitter_at(1, 4.0) - 4e-10).abs() < 1e-24);
        assert!((jitter_at(4, 4.0) - 4e-7).abs() < 1e-20);
    }

    #[test]
    fn near_singular_gram_escalates_jitter() {
        // sigma_n² is far below the resolution of sigma_f² = 1e16, so the
        // duplicate rows are numerically singular without jitter
        let hp = Hyperparameters::new(1e8, vec![1.0], 1e-12, 1).unwrap();
        let xs = vec![vec![0.0]; 3];
        let ys = vec![vec![1.0]; 3];
        let m = LocalGp::fit(&xs, &ys, hp.clone()).unwrap();
        assert_eq!(m.jitter(), jitter_at(1, 1e16));

        // incremental path escalates the same way
        let mut inc = LocalGp::fit(&xs[..1], &ys[..1], hp).unwrap();
        assert_eq!(inc.jitter(), 0.0);
        inc.add_point(&[0.0], &[1.0]).unwrap();
        assert!(inc.jitter() > 0.0);
        assert_eq!(inc.len(), 2);
    }

    #[test]
    fn numerical_error_names_jitter_levels() {
        let e = Error::Numerical {
            jitters: vec![0.0, 1e-10],
        };
        assert_eq!(e.code(), "numerical");
        assert!(e.to_string().contains("1e-10"));
    }
}
