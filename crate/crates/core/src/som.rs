//! Fixed-size Kohonen map with a Gaussian neighbourhood, used as baseline.

use crate::lattice::{Decay, Lattice, NetError, NeuronMap};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SomConfig<T> {
    pub rows: usize,
    pub cols: usize,
    /// Activity exponential factor σ.
    pub sigma: T,
    pub alpha: Decay<T>,
    /// Neighbourhood radius schedule; `None` means `max(rows, cols)/2 → 1`.
    pub radius: Option<Decay<T>>,
    pub epochs: usize,
    /// Contrast exponent applied to exported activity maps.
    pub softmax_exp: T,
    pub seed: u64,
}

impl<T: Real> Default for SomConfig<T> {
    fn default() -> Self {
        SomConfig {
            rows: 30,
            cols: 30,
            sigma: T::lit(1.0e6),
            alpha: Decay {
                start: T::lit(0.1),
                end: T::lit(0.001),
            },
            radius: None,
            epochs: 1300,
            softmax_exp: T::lit(10.0),
            seed: 0,
        }
    }
}

impl<T: Real> SomConfig<T> {
    pub fn radius_schedule(&self) -> Decay<T> {
        self.radius.unwrap_or_else(|| {
            let start = T::from_usize_lossy(self.rows.max(self.cols)) / T::lit(2.0);
            Decay {
                start: start.max(T::one()),
                end: T::one(),
            }
        })
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::InvalidConfig(m));
        if self.rows == 0 || self.cols == 0 || self.rows * self.cols < 4 {
            return bad(format!(
                "SOM needs at least 4 neurons, got {}x{}",
                self.rows, self.cols
            ));
        }
        if !(self.sigma > T::zero() && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.softmax_exp > T::zero() && self.softmax_exp.is_finite()) {
            return bad(format!(
                "softmax_exp must be positive, got {}",
                self.softmax_exp
            ));
        }
        self.alpha.validate("alpha")?;
        let r = self.radius_schedule();
        if !(r.start > T::zero() && r.end > T::zero() && r.end <= r.start && r.start.is_finite()) {
            return bad(format!(
                "radius schedule {}→{} must be positive and non-increasing",
                r.start, r.end
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SomNet<T> {
    pub config: SomConfig<T>,
    lattice: Lattice<T>,
    trained: bool,
    step: usize,
    horizon: usize,
}

impl<T: Real> NeuronMap<T> for SomNet<T> {
    fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    fn sigma(&self) -> T {
        self.config.sigma
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SomReport<T> {
    /// Mean winner distance per epoch, measured while training.
    pub quantization_error: Vec<T>,
}

impl<T: Real> SomNet<T> {
    pub fn init(config: SomConfig<T>, input_dim: usize) -> Result<Self, NetError> {
        config.validate()?;
        if input_dim == 0 {
            return Err(NetError::InvalidConfig(
                "input dimension must be at least 1".into(),
            ));
        }
        let lattice = Lattice::random(config.rows, config.cols, input_dim, config.seed);
        Ok(SomNet {
            config,
            lattice,
            trained: false,
            step: 0,
            horizon: 0,
        })
    }

    pub fn from_parts(
        config: SomConfig<T>,
        lattice: Lattice<T>,
        trained: bool,
    ) -> Result<Self, NetError> {
        config.validate()?;
        if lattice.rows() != config.rows || lattice.cols() != config.cols {
            return Err(NetError::InvalidConfig(
                "lattice shape differs from SOM configuration".into(),
            ));
        }
        Ok(SomNet {
            config,
            lattice,
            trained,
            step: 0,
            horizon: 0,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    /// Sets the schedule horizon and restarts the clock.
    pub fn begin_training(&mut self, horizon: usize) {
        self.step = 0;
        self.horizon = horizon;
    }

    /// Every neuron moves toward `x` by `α(t)·exp(-d²/(2r(t)²))`, `d` being
    /// its lattice distance to the winner.
    pub fn train_step(&mut self, x: &[T]) -> Result<crate::lattice::WinnerResult<T>, NetError> {
        if self.trained {
            return Err(NetError::Frozen);
        }
        let w = self.lattice.find_winner(x, self.config.sigma)?;
        let alpha = self.config.alpha.at(self.step, self.horizon);
        let r = self.config.radius_schedule().at(self.step, self.horizon);
        let denom = T::lit(2.0) * r * r;
        for row in 0..self.lattice.rows() {
            for col in 0..self.lattice.cols() {
                let dr = T::from_usize_lossy(row.abs_diff(w.row));
                let dc = T::from_usize_lossy(col.abs_diff(w.col));
                let h = (-(dr * dr + dc * dc) / denom).exp();
                self.lattice.pull(row, col, x, alpha * h);
            }
        }
        self.step += 1;
        Ok(w)
    }

    /// Trains for `config.epochs` epochs, taking each epoch's presentation
    /// order from `epoch_inputs`, then marks the map trained.
    pub fn train_epochs<F, I>(
        &mut self,
        epoch_size: usize,
        epoch_inputs: F,
    ) -> Result<SomReport<T>, NetError>
    where
        F: FnMut(usize) -> I,
        I: IntoIterator,
        I::Item: AsRef<[T]>,
    {
        self.train_stopped(self.config.epochs, epoch_size, epoch_inputs)
    }

    /// Runs the first `epochs` of the `config.epochs` schedule, then marks
    /// the map trained.
    pub fn train_stopped<F, I>(
        &mut self,
        epochs: usize,
        epoch_size: usize,
        mut epoch_inputs: F,
    ) -> Result<SomReport<T>, NetError>
    where
        F: FnMut(usize) -> I,
        I: IntoIterator,
        I::Item: AsRef<[T]>,
    {
        if epochs == 0 || epochs > self.config.epochs {
            return Err(NetError::InvalidConfig(format!(
                "training needs 1 ≤ epochs ≤ {}, got {epochs}",
                self.config.epochs
            )));
        }
        self.begin_training(self.config.epochs * epoch_size);
        let mut qe = Vec::with_capacity(epochs);
        for e in 0..epochs {
            let mut sum = T::zero();
            let mut n = 0usize;
            for x in epoch_inputs(e) {
                sum = sum + self.train_step(x.as_ref())?.distance;
                n += 1;
            }
            if n == 0 {
                return Err(NetError::EmptyInput);
            }
            qe.push(sum / T::from_usize_lossy(n));
        }
        self.trained = true;
        Ok(SomReport {
            quantization_error: qe,
        })
    }
}

/// Trains a fresh map on `inputs`, presented in order every epoch.
pub fn som_train<T: Real, V: AsRef<[T]>>(
    config: SomConfig<T>,
    inputs: &[V],
) -> Result<SomNet<T>, NetError> {
    let first = inputs.first().ok_or(NetError::EmptyInput)?;
    let mut net = SomNet::init(config, first.as_ref().len())?;
    net.train_epochs(inputs.len(), |_| inputs.iter())?;
    Ok(net)
}

pub fn som_find_winner<T: Real>(
    net: &SomNet<T>,
    x: &[T],
) -> Result<crate::lattice::WinnerResult<T>, NetError> {
    net.find_winner(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(rows: usize, cols: usize, epochs: usize) -> SomConfig<f64> {
        SomConfig {
            rows,
            cols,
            sigma: 1.0,
            epochs,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn repeated_input_collapses_winner() {
        let x = vec![vec![0.25, 0.75, 0.5]];
        let net = som_train(cfg(3, 3, 400), &x).unwrap();
        let w = net.find_winner(&x[0]).unwrap();
        assert!(w.distance < 1e-3, "{}", w.distance);
    }

    #[test]
    fn zero_rate_is_noop() {
        let mut c = cfg(3, 3, 5);
        c.alpha = Decay::constant(0.0);
        let fresh = SomNet::init(c.clone(), 2).unwrap();
        let trained = som_train(c, &[vec![0.1, 0.9], vec![0.4, 0.2]]).unwrap();
        assert_eq!(trained.lattice(), fresh.lattice());
        assert!(trained.is_trained());
    }

    #[test]
    fn neighbourhood_factor_decreases_with_lattice_distance() {
        let mut net = SomNet::init(cfg(1, 5, 1), 1).unwrap();
        net.lattice = Lattice::from_weights(1, 5, 1, vec![0.0; 5]).unwrap();
        net.begin_training(10);
        net.train_step(&[1.0]).unwrap();
        let w = net.lattice().weights().to_vec();
        assert_eq!(w[0], 0.1);
        assert!(w.windows(2).all(|p| p[0] >= p[1]), "{w:?}");
    }

    #[test]
    fn validation() {
        assert!(SomNet::<f64>::init(cfg(1, 3, 1), 2).is_err());
        let mut c = cfg(4, 4, 1);
        c.radius = Some(Decay {
            start: 1.0,
            end: 2.0,
        });
        assert!(c.validate().is_err());
        assert_eq!(
            cfg(10, 6, 1).radius_schedule(),
            Decay {
                start: 5.0,
                end: 1.0
            }
        );
    }
}
